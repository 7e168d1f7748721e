use crate::{NeuralError, Result, Scalar, Tensor};

/// Named parameter tensors in a fixed, model-defined order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> usize {
        self.names.push(name.into());
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn tensor(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    pub fn is_bias(&self, i: usize) -> bool {
        self.names[i].ends_with("bias")
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    /// Flattened copy of every parameter, in order.
    pub fn flatten(&self) -> Vec<T> {
        self.tensors.iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    /// Overwrites every parameter from a flat vector laid out like [`Self::flatten`].
    pub fn unflatten(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.numel() {
            return Err(NeuralError::shape(format!(
                "{} values for {} parameters",
                values.len(),
                self.numel()
            )));
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Replaces values from `(name, tensor)` records; names, order and shapes
    /// must match this set exactly.
    pub fn load_named(&mut self, records: Vec<(String, Tensor<T>)>) -> Result<()> {
        if records.len() != self.len() {
            return Err(NeuralError::shape(format!(
                "expected {} parameter records, found {}",
                self.len(),
                records.len()
            )));
        }
        for (i, (name, t)) in records.iter().enumerate() {
            if name != &self.names[i] || t.shape() != self.tensors[i].shape() {
                return Err(NeuralError::shape(format!(
                    "record {i}: expected {} {:?}, found {name} {:?}",
                    self.names[i],
                    self.tensors[i].shape(),
                    t.shape()
                )));
            }
        }
        self.tensors = records.into_iter().map(|(_, t)| t).collect();
        Ok(())
    }
}
