//! Random Gauss-Renyi continued fraction dynamics and their transfer operators.

pub mod branch_algebra;
pub mod discretization;
pub mod dynamics;
pub mod error;
pub mod hardy_kernels;
pub mod markov_mod;
pub mod quadrature;
pub mod special;
pub mod spectral_bounds;
pub mod transfer;
pub mod verify;

pub use error::{Error, Result};
