//! Fourier-optics multiplication simulator and carry-free Montgomery arithmetic.

pub mod codec;
pub mod error;
pub mod field;
pub mod image;
pub mod modmul;
pub mod optics;
pub mod propagate;
pub mod script;
pub mod validation;

pub use error::{Error, Result};
pub use field::ComplexField;
pub use image::{xcorr, IntensityImage};
pub use propagate::Backend;
