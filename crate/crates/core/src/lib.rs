//! Numerical core of `rmtlab`.
//!
//! Everything here is pure computation over explicit inputs and explicit
//! random streams: isotropic vector laws and their moment structure
//! ([`vectors`]), the rank-one ensemble `M = Σ τ_α y_α y_αᵀ` and its
//! spectral statistics ([`ensemble`]), the limiting Stieltjes transform
//! ([`mp`]) and the limiting covariance/variance functionals of linear
//! eigenvalue statistics ([`variance`]).
//!
//! The crate is `no_std` and only needs `alloc`. IO, parallel replicate
//! drivers and the command line live in the `rmtlab` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ensemble;
pub mod error;
mod fft;
pub mod linalg;
pub mod mp;
pub mod rng;
pub mod special;
pub mod stats;
pub mod variance;
pub mod vectors;

pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use crate::ensemble::{SigmaMeasure, SpectralSample, TestFunction};
pub use crate::error::{Error, Result};
pub use crate::mp::MpSolution;
pub use crate::variance::VarianceReport;
pub use crate::vectors::{MomentProfile, VectorLaw};
