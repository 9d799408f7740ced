//! Smoothness constants of a potential and their numerical certification.
//!
//! The profile is the "constant sheet" a family carries into the bound
//! calculators: gradient sup bound M, Hessian band [D, C], convexity at
//! infinity, quasi-convexity and drift-growth exponents, and known
//! functional-inequality constants.

use super::{norm_sq, Potential, PotentialSpec};
use crate::linalg::sym_eigenvalues;
use crate::{Error, Result};
use serde::Serialize;

/// Radial drift condition `<x, grad H(x)> >= alpha |x|^beta` for `|x| >= radius`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuasiConvexity {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
}

/// Growth control `|<x, grad H(x)>| <= kappa |x|^beta`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftGrowth {
    pub kappa: f64,
    pub beta: f64,
}

/// `hess H >= bound * Id` outside the ball of the given radius.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RadialLowerBound {
    pub bound: f64,
    pub radius: f64,
}

/// Constant sheet of a potential. `grad_sup` may be infinite; quantities the
/// family has no closed form for stay `None`.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessProfile {
    /// M = sup |grad H|.
    pub grad_sup: f64,
    /// C with hess H <= C * Id.
    pub hess_upper: Option<f64>,
    /// D with hess H >= D * Id.
    pub hess_lower: Option<f64>,
    /// D^R: lower Hessian bound outside a ball.
    pub hess_lower_at_infinity: Option<RadialLowerBound>,
    /// Lipschitz constant of grad H (operator norm of the Hessian).
    pub grad_lipschitz: Option<f64>,
    pub quasiconvex: Option<QuasiConvexity>,
    pub drift_growth: Option<DriftGrowth>,
    /// C_P when known in closed form.
    pub poincare: Option<f64>,
    /// C_LS when known in closed form.
    pub log_sobolev: Option<f64>,
}

impl SmoothnessProfile {
    fn validate(self, dim: usize) -> Result<Self> {
        if let (Some(c), Some(d)) = (self.hess_upper, self.hess_lower) {
            if d > c {
                return Err(Error::Domain(format!(
                    "hessian band is empty: lower {d} > upper {c}"
                )));
            }
        }
        if let Some(l) = self.grad_lipschitz {
            let cap = (dim as f64).sqrt()
                * self
                    .hess_upper
                    .map(f64::abs)
                    .unwrap_or(0.0)
                    .max(self.hess_lower.map(f64::abs).unwrap_or(0.0));
            if cap > 0.0 && l > cap * (1.0 + 1e-12) {
                return Err(Error::Domain(format!(
                    "grad_lipschitz {l} exceeds sqrt(d) * max(|C|, |D|) = {cap}"
                )));
            }
        }
        if let Some(q) = &self.quasiconvex {
            if !(q.alpha > 0.0 && q.beta >= 1.0 && q.radius >= 0.0) {
                return Err(Error::Domain(format!(
                    "quasiconvexity needs alpha > 0, beta >= 1, radius >= 0; got {q:?}"
                )));
            }
        }
        Ok(self)
    }
}

/// One certification check with its worst offending point.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst_point: Vec<f64>,
    /// Observed extremal value at the worst point.
    pub observed: f64,
    /// Declared constant the observation is compared against.
    pub declared: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl Potential {
    /// Fills every constant the family admits in closed form; everything
    /// else stays `None` / infinite.
    pub fn closed_form_profile(&self) -> Result<SmoothnessProfile> {
        let d = self.dim();
        let profile = match self.spec() {
            PotentialSpec::Gaussian { variance, .. } => {
                let c = 1.0 / variance;
                SmoothnessProfile {
                    grad_sup: f64::INFINITY,
                    hess_upper: Some(c),
                    hess_lower: Some(c),
                    hess_lower_at_infinity: Some(RadialLowerBound { bound: c, radius: 0.0 }),
                    grad_lipschitz: Some(c),
                    quasiconvex: Some(QuasiConvexity {
                        alpha: c,
                        beta: 2.0,
                        radius: 0.0,
                    }),
                    drift_growth: Some(DriftGrowth { kappa: c, beta: 2.0 }),
                    poincare: Some(*variance),
                    log_sobolev: Some(*variance),
                }
            }
            PotentialSpec::GaussianMixture {
                means, variance, ..
            } => {
                let s2 = *variance;
                let mu_max = means.iter().map(|m| norm_sq(m).sqrt()).fold(0.0, f64::max);
                let diam = means
                    .iter()
                    .flat_map(|a| {
                        means.iter().map(move |b| {
                            a.iter()
                                .zip(b)
                                .map(|(x, y)| (x - y) * (x - y))
                                .sum::<f64>()
                                .sqrt()
                        })
                    })
                    .fold(0.0, f64::max);
                let c = 1.0 / s2;
                // Posterior covariance of the means is at most (diam/2)^2.
                let lower = c - diam * diam / (4.0 * s2 * s2);
                // <x, grad H> = (|x|^2 - <x, posterior mean>)/s^2
                //            >= |x|^2/(2 s^2) once |x| >= 2 mu_max.
                SmoothnessProfile {
                    grad_sup: f64::INFINITY,
                    hess_upper: Some(c),
                    hess_lower: Some(lower),
                    hess_lower_at_infinity: Some(RadialLowerBound {
                        bound: lower,
                        radius: 0.0,
                    }),
                    grad_lipschitz: Some(c.abs().max(lower.abs())),
                    quasiconvex: Some(QuasiConvexity {
                        alpha: 0.5 * c,
                        beta: 2.0,
                        radius: 2.0 * mu_max,
                    }),
                    drift_growth: None,
                    poincare: None,
                    log_sobolev: None,
                }
            }
            PotentialSpec::Student { alpha, sigma, .. } => {
                let a = *alpha;
                let df = d as f64;
                let m = (a + df) / (2.0 * sigma * a.sqrt());
                let c = (a + df) / (a * sigma * sigma);
                let lower = -(a + df) / (2.0 * a * sigma * sigma);
                SmoothnessProfile {
                    grad_sup: m,
                    hess_upper: Some(c),
                    hess_lower: Some(lower),
                    hess_lower_at_infinity: None,
                    grad_lipschitz: Some(c),
                    quasiconvex: None,
                    drift_growth: Some(DriftGrowth { kappa: m, beta: 1.0 }),
                    poincare: None,
                    log_sobolev: None,
                }
            }
            PotentialSpec::Subbotin { alpha, .. } => {
                let a = *alpha;
                // |grad H| = a r (1+r^2)^{a/2-1}: bounded iff a <= 1, with the
                // maximum at r^2 = 1/(1-a) for a < 1 and the limit 1 at a = 1.
                let grad_sup = if a > 1.0 {
                    f64::INFINITY
                } else if a == 1.0 {
                    1.0
                } else {
                    let r2 = 1.0 / (1.0 - a);
                    a * r2.sqrt() * (1.0 + r2).powf(0.5 * a - 1.0)
                };
                // Radial Hessian eigenvalue a (1+s)^{a/2-2} (1 + (a-1) s),
                // s = r^2: nonnegative for a >= 1; for a < 1 its minimum is
                // at s* = 3(1 - a/2) / ((a-1)(a/2-1)).
                let hess_lower = if a >= 2.0 {
                    2.0
                } else if a >= 1.0 {
                    0.0
                } else {
                    let s = 3.0 * (1.0 - 0.5 * a) / ((a - 1.0) * (0.5 * a - 1.0));
                    a * (1.0 + s).powf(0.5 * a - 2.0) * (1.0 + (a - 1.0) * s)
                };
                // <x, grad H> = a r^2 (1+r^2)^{a/2-1} >= a 2^{(a-2)/2} r^a
                // for r >= 1; usable as quasi-convexity only when a >= 1.
                let quasiconvex = if a >= 1.0 {
                    Some(QuasiConvexity {
                        alpha: a * 2f64.powf(0.5 * (a - 2.0)),
                        beta: a,
                        radius: 1.0,
                    })
                } else {
                    None
                };
                let drift_growth = if a <= 1.0 {
                    Some(DriftGrowth {
                        kappa: grad_sup,
                        beta: 1.0,
                    })
                } else {
                    // (1+r^2)^{a/2-1} <= r^{a-2} gives <x, grad H> <= a r^a.
                    Some(DriftGrowth { kappa: a, beta: a })
                };
                SmoothnessProfile {
                    grad_sup,
                    hess_upper: Some(a.min(2.0)),
                    hess_lower: Some(hess_lower),
                    hess_lower_at_infinity: None,
                    grad_lipschitz: Some(a.min(2.0).max(hess_lower.abs())),
                    quasiconvex,
                    drift_growth,
                    poincare: None,
                    log_sobolev: None,
                }
            }
            PotentialSpec::UniformBall { .. }
            | PotentialSpec::CompactGaussianConvolution { .. } => {
                return Err(Error::Unsupported(format!(
                    "closed-form profile needs a smooth family, got {}",
                    self.family_name()
                )))
            }
        };
        profile.validate(d)
    }

    /// Checks the declared constants against the analytic derivatives on a
    /// grid; each check reports its worst offending point.
    pub fn verify_profile(
        &self,
        profile: &SmoothnessProfile,
        grid: &[Vec<f64>],
    ) -> Result<VerificationReport> {
        if grid.is_empty() {
            return Err(Error::Domain("verification grid is empty".into()));
        }
        let slack = 1e-10;
        let mut checks = Vec::new();

        if profile.grad_sup.is_finite() {
            let mut worst = (f64::NEG_INFINITY, 0usize);
            for (i, x) in grid.iter().enumerate() {
                let g = norm_sq(&self.gradient(x)?).sqrt();
                if g > worst.0 {
                    worst = (g, i);
                }
            }
            checks.push(CheckResult {
                name: "grad_sup".into(),
                passed: worst.0 <= profile.grad_sup * (1.0 + slack) + slack,
                worst_point: grid[worst.1].clone(),
                observed: worst.0,
                declared: profile.grad_sup,
            });
        }

        if profile.hess_upper.is_some() || profile.hess_lower.is_some() {
            let mut worst_hi = (f64::NEG_INFINITY, 0usize);
            let mut worst_lo = (f64::INFINITY, 0usize);
            for (i, x) in grid.iter().enumerate() {
                let ev = sym_eigenvalues(&self.hessian(x)?);
                let (lo, hi) = (ev[0], ev[ev.len() - 1]);
                if hi > worst_hi.0 {
                    worst_hi = (hi, i);
                }
                if lo < worst_lo.0 {
                    worst_lo = (lo, i);
                }
            }
            if let Some(c) = profile.hess_upper {
                checks.push(CheckResult {
                    name: "hess_upper".into(),
                    passed: worst_hi.0 <= c + slack * (1.0 + c.abs()),
                    worst_point: grid[worst_hi.1].clone(),
                    observed: worst_hi.0,
                    declared: c,
                });
            }
            if let Some(dn) = profile.hess_lower {
                checks.push(CheckResult {
                    name: "hess_lower".into(),
                    passed: worst_lo.0 >= dn - slack * (1.0 + dn.abs()),
                    worst_point: grid[worst_lo.1].clone(),
                    observed: worst_lo.0,
                    declared: dn,
                });
            }
        }

        if let Some(q) = &profile.quasiconvex {
            let mut worst = (f64::INFINITY, None::<usize>);
            for (i, x) in grid.iter().enumerate() {
                let r = norm_sq(x).sqrt();
                if r < q.radius || r == 0.0 {
                    continue;
                }
                let margin = dot(x, &self.gradient(x)?) - q.alpha * r.powf(q.beta);
                if margin < worst.0 {
                    worst = (margin, Some(i));
                }
            }
            if let Some(i) = worst.1 {
                checks.push(CheckResult {
                    name: "quasiconvex".into(),
                    passed: worst.0 >= -slack * (1.0 + worst.0.abs()),
                    worst_point: grid[i].clone(),
                    observed: worst.0,
                    declared: 0.0,
                });
            }
        }

        Ok(VerificationReport { checks })
    }
}

use super::dot;
