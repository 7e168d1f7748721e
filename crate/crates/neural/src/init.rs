use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{ParamSet, Scalar};

/// Default standard deviation of the Gaussian weight initializer.
pub const INIT_STD: f64 = 0.02;

/// `count` i.i.d. draws from `N(0, std²)`.
pub fn gaussian_values<T: Scalar, R: Rng + ?Sized>(rng: &mut R, count: usize, std: f64) -> Vec<T> {
    let normal = Normal::new(0.0, std).expect("finite non-negative std");
    (0..count).map(|_| T::lit(normal.sample(rng))).collect()
}

/// Weights drawn from `N(0, std²)` in parameter order; biases set to zero.
pub fn init_weights_gaussian<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, rng: &mut R, std: f64) {
    for i in 0..params.len() {
        let bias = params.is_bias(i);
        let t = params.tensor_mut(i);
        if bias {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        } else {
            let values = gaussian_values(rng, t.len(), std);
            t.data_mut().copy_from_slice(&values);
        }
    }
}

/// He-normal variant: each weight tensor gets `std = gain·√(2 / fan_in)`,
/// with `fan_in = in_channels·k²` of a `[out, in, k, k]` kernel.
pub fn init_weights_he<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, rng: &mut R, gain: f64) {
    for i in 0..params.len() {
        let bias = params.is_bias(i);
        let t = params.tensor_mut(i);
        if bias {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        } else {
            let [_, cin, kh, kw] = t.shape();
            let std = gain * (2.0 / (cin * kh * kw).max(1) as f64).sqrt();
            let values = gaussian_values(rng, t.len(), std);
            t.data_mut().copy_from_slice(&values);
        }
    }
}
