//! Calculators for the explicit constants controlling the annealed dynamics.
//!
//! Every operation returns a [`BoundReport`]: the computed constants, the
//! validity window in `lambda`, and the assumption checklist with witness
//! values. When assumptions fail the report carries an empty validity window
//! instead of erroring, so callers can compare the applicability of
//! overlapping results; only nonsensical parameters (a non-positive
//! `epsilon`, a time outside the schedule) raise errors.

mod lsi;
mod poincare;
mod wellposed;

pub use lsi::{
    fi_mixture, fi_scaling, fi_tensor, fi_translation, lsi_flow, lsi_kl_bias,
    lsi_proposition_bounds, ou_entropy_bound, LsiCase, RateProfile,
};
pub use poincare::{
    conditional_poincare, conditional_rescale, lyapunov_poincare, perturbed_lyapunov,
    LyapunovVariant, PerturbedLyapunovInputs, PoincareMethod, DEFAULT_C_KLARTAG,
};
pub use wellposed::{
    gaussian_compact_band, hessian_band, quantitative_convex_linear_growth, score_sup_bound,
    wellposedness_report, BandStructure,
};

use serde::Serialize;
use std::collections::BTreeMap;

/// One checklist entry: the hypothesis name, whether it holds, and the
/// number that witnessed the decision.
#[derive(Debug, Clone, Serialize)]
pub struct Assumption {
    pub name: String,
    pub satisfied: bool,
    pub witness: f64,
}

/// Outcome of a bound calculator.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Which result produced the report.
    pub theorem: String,
    /// Named constants (the main bound is `"bound"` where one exists).
    pub constants: BTreeMap<String, f64>,
    /// `lambda` window on which the bound holds; `None` when some
    /// assumption fails everywhere.
    pub validity: Option<(f64, f64)>,
    pub assumptions: Vec<Assumption>,
    /// Named intermediate quantities of the formula.
    pub trace: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(theorem: &str) -> Self {
        BoundReport {
            theorem: theorem.to_string(),
            constants: BTreeMap::new(),
            validity: None,
            assumptions: Vec::new(),
            trace: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn assume(&mut self, name: &str, satisfied: bool, witness: f64) -> bool {
        self.assumptions.push(Assumption {
            name: name.to_string(),
            satisfied,
            witness,
        });
        satisfied
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.constants.insert(name.to_string(), value);
    }

    pub fn trace_value(&mut self, name: &str, value: f64) {
        self.trace.insert(name.to_string(), value);
    }

    /// All assumptions hold and the validity window is nonempty.
    pub fn is_applicable(&self) -> bool {
        self.validity.is_some() && self.assumptions.iter().all(|a| a.satisfied)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.get(name).copied()
    }

    /// The headline constant.
    pub fn bound(&self) -> Option<f64> {
        self.constant("bound")
    }
}

/// Two-sided spectral band for `hess ln p_t` with the Lipschitz estimate
/// `L_t <= sqrt(d) max(|lower|, |upper|)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HessianBand {
    pub lower: f64,
    pub upper: f64,
    pub lipschitz: f64,
}

impl HessianBand {
    pub fn assemble(lower: f64, upper: f64, dim: usize) -> Self {
        HessianBand {
            lower,
            upper,
            lipschitz: (dim as f64).sqrt() * lower.abs().max(upper.abs()),
        }
    }

    pub fn contains(&self, value: f64, slack: f64) -> bool {
        value >= self.lower - slack && value <= self.upper + slack
    }
}
