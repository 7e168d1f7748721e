//! Image-side building blocks for the fingerprint denoising benchmark:
//! grayscale images and netpbm I/O, procedural fingerprint masters with a
//! sensor distortion model, texture compositing, and MSE/PSNR/SSIM.

pub mod compositor;
mod error;
pub mod fpsynth;
mod image;
pub mod metrics;
pub mod pnm;
pub mod rng;

pub use error::{Error, Result};
pub use image::GrayImage;
