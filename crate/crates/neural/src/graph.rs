//! Define-by-run tape. Each op evaluates eagerly and records what its
//! backward pass needs; [`Graph::backward`] walks the tape in reverse.

use crate::conv::{conv2d, conv2d_backward, conv_transpose2d, conv_transpose2d_backward};
use crate::loss::{bce_loss, l1_loss, mean_log, mean_log1m};
use crate::{NeuralError, ParamSet, Result, Scalar, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
        pad: usize,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Var,
        stride: usize,
    },
    Relu(Var),
    LeakyRelu(Var, T),
    Sigmoid(Var),
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    Concat(Var, Var),
    Add(Var, Var),
    Scale(Var, T),
    /// Scalar-valued reduction with precomputed local gradients per input.
    Reduce(Vec<(Var, Vec<T>)>),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant: no gradient flows into it.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A leaf that receives a gradient on [`Self::backward`].
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Binds every tensor of `params` as a gradient leaf.
    pub fn params(&mut self, params: &ParamSet<T>) -> Vec<Var> {
        params.tensors().iter().map(|t| self.param(t.clone())).collect()
    }

    /// Binds `params` as constants (frozen network).
    pub fn frozen(&mut self, params: &ParamSet<T>) -> Vec<Var> {
        params.tensors().iter().map(|t| self.input(t.clone())).collect()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    /// Gradients of `vars`, zero-filled where nothing flowed.
    pub fn grads(&self, vars: &[Var]) -> Vec<Vec<T>> {
        vars.iter()
            .map(|&v| {
                self.grad(v)
                    .map(<[T]>::to_vec)
                    .unwrap_or_else(|| vec![T::zero(); self.value(v).len()])
            })
            .collect()
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let out = conv2d(self.value(x), self.value(w), Some(self.value(b)), stride, pad)?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(out, Op::Conv2d { x, w, b, stride, pad }, ng))
    }

    pub fn conv_transpose2d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let out = conv_transpose2d(self.value(x), self.value(w), Some(self.value(b)), stride)?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        Ok(self.push(out, Op::ConvTranspose2d { x, w, b, stride }, ng))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(T::zero()));
        let ng = self.needs(x);
        self.push(out, Op::Relu(x), ng)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::lit(slope);
        let out = self.value(x).map(|v| if v > T::zero() { v } else { s * v });
        let ng = self.needs(x);
        self.push(out, Op::LeakyRelu(x, s), ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| T::one() / (T::one() + (-v).exp()));
        let ng = self.needs(x);
        self.push(out, Op::Sigmoid(x), ng)
    }

    /// 2×2 max pooling with stride 2; ties resolve to the first element in
    /// row-major order.
    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let [n, c, h, w] = xv.shape();
        if h % 2 != 0 || w % 2 != 0 {
            return Err(NeuralError::shape(format!(
                "max_pool2 needs even spatial dims, got {h}x{w}"
            )));
        }
        let (oh, ow) = (h / 2, w / 2);
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        let data = xv.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if data[i] > data[best] {
                            best = i;
                        }
                    }
                    out.push(data[best]);
                    argmax.push(best);
                }
            }
        }
        let out = Tensor::new([n, c, oh, ow], out)?;
        let ng = self.needs(x);
        Ok(self.push(out, Op::MaxPool2 { x, argmax }, ng))
    }

    /// Concatenates along channels: `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let [n, ca, h, w] = av.shape();
        let [nb, cb, hb, wb] = bv.shape();
        if (n, h, w) != (nb, hb, wb) {
            return Err(NeuralError::shape(format!(
                "concat: {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let mut out = Vec::with_capacity(av.len() + bv.len());
        for i in 0..n {
            out.extend_from_slice(av.sample(i));
            out.extend_from_slice(bv.sample(i));
        }
        let out = Tensor::new([n, ca + cb, h, w], out)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Concat(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(NeuralError::shape(format!(
                "add: {:?} vs {:?}",
                av.shape(),
                bv.shape()
            )));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x + y).collect();
        let out = Tensor::new(av.shape(), data)?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let k = T::lit(k);
        let out = self.value(x).map(|v| v * k);
        let ng = self.needs(x);
        self.push(out, Op::Scale(x, k), ng)
    }

    fn reduce(&mut self, value: T, parts: Vec<(Var, Vec<T>)>) -> Var {
        let ng = parts.iter().any(|(v, _)| self.needs(*v));
        self.push(Tensor::scalar(value), Op::Reduce(parts), ng)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let total = xv.data().iter().copied().sum();
        let g = vec![T::one(); xv.len()];
        self.reduce(total, vec![(x, g)])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let n = T::lit(xv.len() as f64);
        let total = xv.data().iter().copied().sum::<T>() / n;
        let g = vec![T::one() / n; xv.len()];
        self.reduce(total, vec![(x, g)])
    }

    /// Mean binary cross-entropy; the target is treated as a constant.
    pub fn bce(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (l, g) = bce_loss(self.value(pred), self.value(target))?;
        Ok(self.reduce(l, vec![(pred, g.into_data())]))
    }

    pub fn l1(&mut self, a: Var, b: Var) -> Result<Var> {
        let (l, g) = l1_loss(self.value(a), self.value(b))?;
        let g = g.into_data();
        let neg = g.iter().map(|&v| -v).collect();
        Ok(self.reduce(l, vec![(a, g), (b, neg)]))
    }

    /// `mean(ln p)` over clamped probabilities.
    pub fn mean_log(&mut self, p: Var) -> Result<Var> {
        let (l, g) = mean_log(self.value(p))?;
        Ok(self.reduce(l, vec![(p, g.into_data())]))
    }

    /// `mean(ln(1 − p))` over clamped probabilities.
    pub fn mean_log1m(&mut self, p: Var) -> Result<Var> {
        let (l, g) = mean_log1m(self.value(p))?;
        Ok(self.reduce(l, vec![(p, g.into_data())]))
    }

    /// Reverse-mode sweep from a scalar `loss`. Afterwards every node that
    /// depends on a [`Self::param`] leaf carries its gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(NeuralError::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        fn acc<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
            match &mut grads[v.0] {
                Some(existing) => existing.iter_mut().zip(g).for_each(|(e, x)| *e += x),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(gout) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(gout);
                    continue;
                }
                Op::Conv2d { x, w, b, stride, pad } => {
                    let go = Tensor::new(node.value.shape(), gout)?;
                    let g = conv2d_backward(self.value(*x), self.value(*w), *stride, *pad, &go, self.needs(*x))?;
                    if let Some(gx) = g.input {
                        acc(&mut grads, *x, gx.into_data());
                    }
                    acc(&mut grads, *w, g.weight.into_data());
                    acc(&mut grads, *b, g.bias.into_data());
                }
                Op::ConvTranspose2d { x, w, b, stride } => {
                    let go = Tensor::new(node.value.shape(), gout)?;
                    let g = conv_transpose2d_backward(self.value(*x), self.value(*w), *stride, &go, self.needs(*x))?;
                    if let Some(gx) = g.input {
                        acc(&mut grads, *x, gx.into_data());
                    }
                    acc(&mut grads, *w, g.weight.into_data());
                    acc(&mut grads, *b, g.bias.into_data());
                }
                Op::Relu(x) => {
                    let g = gout
                        .iter()
                        .zip(node.value.data())
                        .map(|(&g, &y)| if y > T::zero() { g } else { T::zero() })
                        .collect();
                    acc(&mut grads, *x, g);
                }
                Op::LeakyRelu(x, s) => {
                    let g = gout
                        .iter()
                        .zip(self.value(*x).data())
                        .map(|(&g, &v)| if v > T::zero() { g } else { *s * g })
                        .collect();
                    acc(&mut grads, *x, g);
                }
                Op::Sigmoid(x) => {
                    let g = gout
                        .iter()
                        .zip(node.value.data())
                        .map(|(&g, &y)| g * y * (T::one() - y))
                        .collect();
                    acc(&mut grads, *x, g);
                }
                Op::MaxPool2 { x, argmax } => {
                    let mut g = vec![T::zero(); self.value(*x).len()];
                    for (&src, &go) in argmax.iter().zip(&gout) {
                        g[src] += go;
                    }
                    acc(&mut grads, *x, g);
                }
                Op::Concat(a, b) => {
                    let (la, lb) = (self.value(*a).len(), self.value(*b).len());
                    let n = node.value.batch();
                    let (pa, pb) = (la / n, lb / n);
                    let mut ga = Vec::with_capacity(la);
                    let mut gb = Vec::with_capacity(lb);
                    for s in gout.chunks(pa + pb) {
                        ga.extend_from_slice(&s[..pa]);
                        gb.extend_from_slice(&s[pa..]);
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, gout.clone());
                    acc(&mut grads, *b, gout);
                }
                Op::Scale(x, k) => {
                    let g = gout.iter().map(|&g| g * *k).collect();
                    acc(&mut grads, *x, g);
                }
                Op::Reduce(parts) => {
                    let up = gout[0];
                    for (v, local) in parts {
                        if self.needs(*v) {
                            acc(&mut grads, *v, local.iter().map(|&l| l * up).collect());
                        }
                    }
                }
            }
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if let (Op::Leaf, true, Some(g)) = (&node.op, node.needs_grad, g) {
                node.value.set_grad(g)?;
            }
        }
        Ok(())
    }
}
