//! Learning-curve exponents for kernel ridge regression under polynomial
//! spectral decay: closed-form predictions and the simulations that test them.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fitting;
pub mod linalg;
pub mod rff;
pub mod rng;
pub mod simulate;
pub mod spectrum;
pub mod theory;
pub mod transforms;

pub use error::{Error, Result};
