//! Brute-force numerical ground truth.
//!
//! Everything here is independent of the analytic machinery it certifies:
//! adaptive Simpson quadrature, Richardson-extrapolated finite differences,
//! and a 1D spectral-gap solver for Poincare constants. Dominance tests in
//! [`crate::bounds`] compare theorem values against these oracles.

mod finite_diff;
mod poincare1d;
mod quadrature;

pub use finite_diff::{fd_gradient, fd_hessian, FdEstimate, FdMatrixEstimate};
pub use poincare1d::{GridMeasure1D, PoincareEstimate};
pub use quadrature::{integrate, integrate_mapped_upper, QuadConfig, Quadrature};
