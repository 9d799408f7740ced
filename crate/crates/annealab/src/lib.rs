//! Numerical laboratory for diffusion annealed Langevin dynamics.
//!
//! The library builds the full pipeline around the interpolation flow
//! `X_t = sqrt(lambda_t) X + sqrt(1 - lambda_t) Z` between a target measure
//! `pi = e^{-U}` and a base measure `nu = e^{-W}`:
//!
//! - [`measures`]: analytic distribution families with potentials,
//!   derivatives, exact samplers and smoothness constants,
//! - [`schedule`]: schedule families `t -> lambda_t` and the action
//!   integrals `A0 = int |lambda'|^2 / lambda`, `A1 = int |lambda'|^2 / (1 - lambda)`,
//! - [`interpolation`]: the marginal `p_t`, the conditional `q_t^x`, and
//!   closed-form or self-normalized importance-sampling evaluators for the
//!   score `grad ln p_t` and the Hessian `hess ln p_t`,
//! - [`bounds`]: calculators for the explicit constants controlling the
//!   dynamics (score/Hessian bands, conditional Poincare constants,
//!   Lyapunov constructions, log-Sobolev flows, KL/BL/W2 bias bounds),
//! - [`oracle`]: brute-force ground truth (1D spectral gaps, finite
//!   differences, adaptive quadrature) used to certify the bounds,
//! - [`sampler`]: Euler-Maruyama integration of
//!   `dY = sqrt(2) dB + grad ln p_hat_t(Y) dt`,
//! - [`diagnostics`]: divergence estimators and bias-scaling studies.
//!
//! All randomized operations are deterministic given an explicit seed;
//! parallel paths derive independent sub-streams so results never depend on
//! thread scheduling.

pub mod bounds;
pub mod diagnostics;
pub mod interpolation;
pub mod measures;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod schedule;

mod error;
pub mod linalg;

pub use error::{Error, Result};
