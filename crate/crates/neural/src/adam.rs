use crate::{NeuralError, ParamSet, Result, Scalar};

/// Adam moments for one parameter set, with bias-corrected updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, lr: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(lr > 0.0) {
            return Err(NeuralError::invalid(format!("learning rate must be positive, got {lr}")));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(NeuralError::invalid(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        let zeros = || params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect();
        Ok(Self {
            step: 0,
            m: zeros(),
            v: zeros(),
            lr,
            beta1,
            beta2,
            epsilon: 1e-8,
        })
    }

    /// One update `θ ← θ − lr·m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &[Vec<T>]) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(NeuralError::shape(format!(
                "adam: {} gradients / {} moment slots for {} parameters",
                grads.len(),
                self.m.len(),
                params.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.len() != params.tensor(i).len() {
                return Err(NeuralError::shape(format!(
                    "adam: gradient {i} has {} elements, parameter {} has {}",
                    g.len(),
                    params.name(i),
                    params.tensor(i).len()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::lit(1.0 - self.beta1.powi(t));
        let bc2 = T::lit(1.0 - self.beta2.powi(t));
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (lr, eps) = (T::lit(self.lr), T::lit(self.epsilon));
        for (i, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let theta = params.tensor_mut(i).data_mut();
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (T::one() - b1) * g[j];
                v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
