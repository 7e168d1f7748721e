//! Dataset generation, training and evaluation for fingerprint denoising.

pub mod checkpoint_io;
pub mod config;
pub mod dataset;
mod error;
pub mod eval;
pub mod manifest;
pub mod train;

pub use error::{HarnessError, Result};
