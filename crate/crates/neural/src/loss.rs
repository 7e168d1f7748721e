//! Scalar objectives with their analytic gradients.
//!
//! Probabilities entering a logarithm are clamped to `[1e-7, 1 − 1e-7]`;
//! the derivative is zero where the clamp is active.

use crate::{NeuralError, Result, Scalar, Tensor};

pub const PROB_EPS: f64 = 1e-7;

fn same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(NeuralError::shape(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.is_empty() {
        return Err(NeuralError::shape(format!("{what}: empty tensors")));
    }
    Ok(())
}

#[inline]
fn clamp_prob<T: Scalar>(p: T) -> (T, bool) {
    let lo = T::lit(PROB_EPS);
    let hi = T::one() - lo;
    if p < lo {
        (lo, false)
    } else if p > hi {
        (hi, false)
    } else {
        (p, true)
    }
}

/// Mean binary cross-entropy `−[t·ln p + (1 − t)·ln(1 − p)]` and `∂/∂pred`.
pub fn bce_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    same_shape(pred, target, "bce_loss")?;
    let n = T::lit(pred.len() as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let (pc, live) = clamp_prob(p);
        total += -(t * pc.ln() + (T::one() - t) * (T::one() - pc).ln());
        grad.push(if live {
            (-(t / pc) + (T::one() - t) / (T::one() - pc)) / n
        } else {
            T::zero()
        });
    }
    Ok((total / n, Tensor::new(pred.shape(), grad)?))
}

/// `mean(ln p)` and its gradient.
pub fn mean_log<T: Scalar>(p: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if p.is_empty() {
        return Err(NeuralError::shape("mean_log of empty tensor"));
    }
    let n = T::lit(p.len() as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(p.len());
    for &v in p.data() {
        let (c, live) = clamp_prob(v);
        total += c.ln();
        grad.push(if live { T::one() / (c * n) } else { T::zero() });
    }
    Ok((total / n, Tensor::new(p.shape(), grad)?))
}

/// `mean(ln(1 − p))` and its gradient.
pub fn mean_log1m<T: Scalar>(p: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if p.is_empty() {
        return Err(NeuralError::shape("mean_log1m of empty tensor"));
    }
    let n = T::lit(p.len() as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(p.len());
    for &v in p.data() {
        let (c, live) = clamp_prob(v);
        total += (T::one() - c).ln();
        grad.push(if live {
            -T::one() / ((T::one() - c) * n)
        } else {
            T::zero()
        });
    }
    Ok((total / n, Tensor::new(p.shape(), grad)?))
}

/// The minimax value `V(D, G) = E[ln D(x)] + E[ln(1 − D(G(z)))]` evaluated on
/// discriminator probabilities, with the derived player losses.
#[derive(Debug, Clone)]
pub struct GanValue<T> {
    pub value: T,
    /// `−V`, minimized by the discriminator.
    pub discriminator_loss: T,
    /// `mean ln(1 − D(G(z)))`, minimized by the generator.
    pub generator_loss: T,
    /// `∂V/∂d_real`
    pub grad_real: Tensor<T>,
    /// `∂V/∂d_fake`
    pub grad_fake: Tensor<T>,
}

pub fn gan_value<T: Scalar>(d_real: &Tensor<T>, d_fake: &Tensor<T>) -> Result<GanValue<T>> {
    let (real_term, grad_real) = mean_log(d_real)?;
    let (fake_term, grad_fake) = mean_log1m(d_fake)?;
    let value = real_term + fake_term;
    Ok(GanValue {
        value,
        discriminator_loss: -value,
        generator_loss: fake_term,
        grad_real,
        grad_fake,
    })
}

/// Mean absolute error between two tensors and its gradient with respect to
/// the first argument (the second receives the negation). `sign(0) = 0`.
pub fn l1_loss<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    same_shape(a, b, "l1_loss")?;
    let n = T::lit(a.len() as f64);
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(a.len());
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x - y;
        total += d.abs();
        let s = if d > T::zero() {
            T::one()
        } else if d < T::zero() {
            -T::one()
        } else {
            T::zero()
        };
        grad.push(s / n);
    }
    Ok((total / n, Tensor::new(a.shape(), grad)?))
}

/// L1 cycle-consistency `mean |x − F(G(x))|`; gradient is with respect to
/// the reconstruction.
pub fn cycle_consistency_loss<T: Scalar>(
    x: &Tensor<T>,
    x_reconstructed: &Tensor<T>,
) -> Result<(T, Tensor<T>)> {
    l1_loss(x_reconstructed, x)
}
