//! A small reverse-mode tensor engine sized for desk-scale image-to-image
//! models. Everything is generic over [`Scalar`] so the same kernels train
//! in `f32` and are finite-difference checked in `f64`.

pub mod adam;
pub mod checkpoint;
pub mod conv;
mod error;
mod gemm;
pub mod gradcheck;
pub mod graph;
pub mod init;
pub mod loss;
pub mod models;
mod params;
mod scalar;
pub mod schedule;
mod tensor;

pub use error::{NeuralError, Result};
pub use graph::{Graph, Var};
pub use params::ParamSet;
pub use scalar::Scalar;
pub use tensor::Tensor;
