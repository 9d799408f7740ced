//! The interpolated marginal `p_t`, the conditional law `q_t^x`, and
//! evaluators for `ln p_t`, its score and its Hessian.
//!
//! With `lambda = lambda_t`, the marginal is the law of
//! `sqrt(lambda) X + sqrt(1-lambda) Z`, `X ~ pi = e^{-U}`, `Z ~ nu = e^{-W}`.
//! Conditioning on the interpolant value `x` gives
//! `q_t^x(y) proportional to e^{-(U_t(y) + W_t(x-y))}` with
//! `U_t(y) = U(y / sqrt(lambda))`, `W_t(z) = W(z / sqrt(1-lambda))`, and the
//! derivatives of `ln p_t` are conditional expectations:
//!
//! ```text
//! grad ln p_t(x) = -(1-l)^{-1/2} E[grad W((x-Y)/sqrt(1-l))]
//!                = -l^{-1/2}     E[grad U(Y/sqrt(l))]
//! hess ln p_t(x) = (1-l)^{-1} (-E[hess W(.)] + Cov[grad W(.)])
//!                = l^{-1}     (-E[hess U(.)] + Cov[grad U(.)])
//!                = (l(1-l))^{-1/2} Cov[grad W(.), grad U(.)]
//! ```
//!
//! Evaluation strategy per `(pi, nu, lambda)`:
//! - gaussian / gaussian-mixture pairs: exact (the marginal is again a
//!   mixture family),
//! - a compactly supported factor convolved with gaussians (uniform_ball or
//!   compact_gaussian_convolution against a gaussian): the gaussian parts
//!   merge into one noise scale `alpha_t^2` and the conditional expectation
//!   runs over the compact factor only, so SNIS weights stay bounded even at
//!   `lambda = 1`,
//! - otherwise: self-normalized importance sampling with proposal
//!   `y = sqrt(lambda) X` and weight `exp(-W_t(x-y))` (no density of `pi` is
//!   ever evaluated), or the swapped representation on request.

mod snis;

pub use snis::{HessianForm, SnisConfig};
pub(crate) use snis::{normalize_log_weights, BlockSums};

use crate::measures::{MomentSummary, PointBatch, Potential, PotentialSpec};
use crate::rng::{stream, substream, Domain};
use crate::schedule::Schedule;
use crate::{Error, Result};
use rand::Rng;

/// Target, base and schedule with matching dimensions.
#[derive(Debug, Clone)]
pub struct InterpolationLaw {
    target: Potential,
    base: Potential,
    schedule: Schedule,
}

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    ClosedForm,
    Snis,
}

/// Score value with jackknife standard errors (zero for closed forms).
#[derive(Debug, Clone)]
pub struct ScoreEstimate {
    pub value: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub estimator: Estimator,
    pub ess: Option<f64>,
}

/// Hessian of `ln p_t` with the worst per-entry standard error.
#[derive(Debug, Clone)]
pub struct HessianEstimate {
    pub value: Vec<Vec<f64>>,
    pub standard_error: f64,
    pub estimator: Estimator,
    pub ess: Option<f64>,
    /// Max entrywise gap between two forms when cross-checking.
    pub cross_check_discrepancy: Option<f64>,
}

/// Which side the conditional proposal was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalSide {
    Target,
    SwappedBase,
}

/// Weighted particle representation of `q_t^x` (points live in y-space).
#[derive(Debug, Clone)]
pub struct ConditionalParticles {
    pub points: PointBatch,
    pub weights: Vec<f64>,
    pub ess: f64,
    pub side: ProposalSide,
}

/// The conditional law `q_t^x(y) ~ pi(y/sqrt(l)) nu((x-y)/sqrt(1-l))` of the
/// interpolation component given the interpolant value.
#[derive(Debug, Clone)]
pub struct ConditionalLaw<'a> {
    law: &'a InterpolationLaw,
    t: f64,
    pub lambda: f64,
    pub point: Vec<f64>,
}

impl<'a> ConditionalLaw<'a> {
    /// `ln q_t^x(y)` up to the normalizer `Z_t^x`.
    pub fn unnormalized_log_density(&self, y: &[f64]) -> Result<f64> {
        let d = self.law.dim();
        if y.len() != d {
            return Err(Error::Domain("conditional point dimension mismatch".into()));
        }
        let sl = self.lambda.sqrt();
        let sr = (1.0 - self.lambda).sqrt();
        let scaled_y: Vec<f64> = y.iter().map(|v| v / sl).collect();
        let scaled_rest: Vec<f64> = self
            .point
            .iter()
            .zip(y)
            .map(|(xi, yi)| (xi - yi) / sr)
            .collect();
        Ok(self.law.target.log_density(&scaled_y)?
            + self.law.base.log_density(&scaled_rest)?)
    }

    /// SNIS particle set (see [`InterpolationLaw::conditional_sample`]).
    pub fn sample(&self, n: usize, seed: u64, swap: bool) -> Result<ConditionalParticles> {
        self.law.conditional_sample(self.t, &self.point, n, seed, swap)
    }
}

/// Per-time evaluation plan, hoisted out of inner loops by the SDE driver.
#[derive(Debug, Clone)]
pub struct ScoreContext {
    pub lambda: f64,
    kind: ContextKind,
}

#[derive(Debug, Clone)]
enum ContextKind {
    /// `p_t` is itself a gaussian / mixture family.
    Closed(Potential),
    /// Endpoint delegation to a smooth potential (score = -grad H).
    Pure(Potential),
    /// Compact factor against merged gaussian noise.
    Compact(CompactContext),
    /// Generic SNIS; flags say which proposals are available.
    Snis { direct: bool, swapped: bool },
}

#[derive(Debug, Clone)]
struct CompactContext {
    /// Uniform-ball factor used as the SNIS proposal.
    ball: Potential,
    /// Coefficient multiplying the ball draw (sqrt of the side's lambda).
    scale: f64,
    /// Merged gaussian variance `alpha_t^2`.
    alpha2: f64,
}

/// `(tau2, radius)` when the potential is gaussian noise around a compact
/// factor (uniform_ball has `tau2 = 0`).
fn gaussian_plus_compact(p: &Potential) -> Option<(f64, f64)> {
    match *p.spec() {
        PotentialSpec::UniformBall { radius, .. } => Some((0.0, radius)),
        PotentialSpec::CompactGaussianConvolution { radius, tau2, .. } => Some((tau2, radius)),
        _ => None,
    }
}

/// Mixture representation `(weights, means, variance)` for gaussian and
/// gaussian-mixture families.
fn as_mixture(p: &Potential) -> Option<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    match p.spec() {
        PotentialSpec::Gaussian { variance, dim } => {
            Some((vec![1.0], vec![vec![0.0; *dim]], *variance))
        }
        PotentialSpec::GaussianMixture {
            weights,
            means,
            variance,
            ..
        } => Some((weights.clone(), means.clone(), *variance)),
        _ => None,
    }
}

impl InterpolationLaw {
    pub fn new(target: Potential, base: Potential, schedule: Schedule) -> Result<Self> {
        if target.dim() != base.dim() {
            return Err(Error::Domain(format!(
                "target dimension {} does not match base dimension {}",
                target.dim(),
                base.dim()
            )));
        }
        Ok(InterpolationLaw {
            target,
            base,
            schedule,
        })
    }

    pub fn target(&self) -> &Potential {
        &self.target
    }

    pub fn base(&self) -> &Potential {
        &self.base
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn lambda(&self, t: f64) -> Result<(f64, f64)> {
        self.schedule.lambda(t)
    }

    /// `E |X_t|^2 = lambda V_pi + (1 - lambda) V_nu`.
    pub fn interpolant_second_moment(&self, t: f64) -> Result<f64> {
        let (lam, _) = self.schedule.lambda(t)?;
        let vp = self.target.moments()?.second_moment;
        let vn = self.base.moments()?.second_moment;
        Ok(lam * vp + (1.0 - lam) * vn)
    }

    /// Exact draws `sqrt(lambda) X_i + sqrt(1-lambda) Z_i`.
    pub fn sample_interpolant(&self, t: f64, n: usize, seed: u64) -> Result<PointBatch> {
        if n == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        let (lam, _) = self.schedule.lambda(t)?;
        let (a, b) = (lam.sqrt(), (1.0 - lam).sqrt());
        let mut rng_x = stream(seed, Domain::TargetDraw);
        let mut rng_z = stream(seed, Domain::BaseDraw);
        let d = self.dim();
        let mut out = PointBatch::zeros(n, d);
        let mut x = vec![0.0; d];
        let mut z = vec![0.0; d];
        for i in 0..n {
            self.target.draw_into(&mut rng_x, &mut x)?;
            self.base.draw_into(&mut rng_z, &mut z)?;
            let row = out.row_mut(i);
            for j in 0..d {
                row[j] = a * x[j] + b * z[j];
            }
        }
        Ok(out)
    }

    /// The marginal as a gaussian / mixture potential when both sides admit
    /// the representation.
    pub fn closed_form_marginal(&self, t: f64) -> Result<Option<Potential>> {
        let (lam, _) = self.schedule.lambda(t)?;
        let (Some((wp, mp, vp)), Some((wn, mn, vn))) =
            (as_mixture(&self.target), as_mixture(&self.base))
        else {
            return Ok(None);
        };
        let d = self.dim();
        let (a, b) = (lam.sqrt(), (1.0 - lam).sqrt());
        let variance = lam * vp + (1.0 - lam) * vn;
        let mut weights = Vec::with_capacity(wp.len() * wn.len());
        let mut means: Vec<Vec<f64>> = Vec::with_capacity(wp.len() * wn.len());
        for (wi, mi) in wp.iter().zip(&mp) {
            for (wj, mj) in wn.iter().zip(&mn) {
                weights.push(wi * wj);
                means.push((0..d).map(|k| a * mi[k] + b * mj[k]).collect());
            }
        }
        let spec = if weights.len() == 1 && means[0].iter().all(|&m| m == 0.0) {
            PotentialSpec::Gaussian { variance, dim: d }
        } else {
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                dim: d,
            }
        };
        Ok(Some(Potential::from_spec(spec)?))
    }

    /// Exact `ln p_t(x)` where a closed form exists (gaussian / mixture
    /// pairs, or the endpoints).
    pub fn log_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        if let Some(p) = self.closed_form_marginal(t)? {
            return p.log_density(x);
        }
        let (lam, _) = self.schedule.lambda(t)?;
        if lam == 0.0 {
            return self.base.log_density(x);
        }
        if lam == 1.0 {
            return self.target.log_density(x);
        }
        Err(Error::Unsupported(format!(
            "log-density has no closed form for ({}, {}) at lambda = {lam}",
            self.target.family_name(),
            self.base.family_name()
        )))
    }

    /// Reference `ln p_t(x)` for 1D laws: the exact closed form where one
    /// exists, the erf form for compact-plus-gaussian arrangements, and
    /// direct convolution quadrature otherwise. Certification tests compare
    /// finite differences of this value against the analytic bands.
    pub fn reference_log_density_1d(&self, t: f64, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(
                "reference log-density is implemented for d = 1".into(),
            ));
        }
        if let Some(p) = self.closed_form_marginal(t)? {
            return p.log_density(&[x]);
        }
        let (lam, _) = self.schedule.lambda(t)?;
        if lam == 0.0 {
            return self.base.log_density(&[x]);
        }
        if lam == 1.0 && gaussian_plus_compact(&self.target).is_none() {
            return self.target.log_density(&[x]);
        }

        // Compact factor against merged gaussian noise: in 1D the uniform
        // convolution has the erf closed form
        // p_t(x) = (Phi((x + cR)/a) - Phi((x - cR)/a)) / (2 c R).
        let compact = match (
            gaussian_plus_compact(&self.target),
            self.base.spec(),
            gaussian_plus_compact(&self.base),
            self.target.spec(),
        ) {
            (Some((tau2, r)), PotentialSpec::Gaussian { variance, .. }, _, _) => {
                Some((lam * tau2 + (1.0 - lam) * variance, r, lam.sqrt()))
            }
            (None, _, Some((tau2, r)), PotentialSpec::Gaussian { variance, .. }) => {
                Some(((1.0 - lam) * tau2 + lam * variance, r, (1.0 - lam).sqrt()))
            }
            _ => {
                if lam == 1.0 {
                    gaussian_plus_compact(&self.target).map(|(tau2, r)| (tau2, r, 1.0))
                } else {
                    None
                }
            }
        };
        if let Some((alpha2, radius, scale)) = compact {
            let a = alpha2.sqrt();
            let cr = scale * radius;
            if !(a > 0.0) {
                return Err(Error::Unsupported(
                    "degenerate compact arrangement has no density".into(),
                ));
            }
            if cr < 1e-12 {
                return Ok(-0.5 * x * x / alpha2
                    - 0.5 * (2.0 * std::f64::consts::PI * alpha2).ln());
            }
            let phi = |z: f64| 0.5 * (1.0 + statrs::function::erf::erf(z / std::f64::consts::SQRT_2));
            let mass = phi((x + cr) / a) - phi((x - cr) / a);
            if mass <= 0.0 {
                // Far tail: fall back to the log of the dominant gaussian
                // slice to keep finite differences usable.
                return Ok(-0.5 * (x.abs() - cr) * (x.abs() - cr) / alpha2
                    - 0.5 * (2.0 * std::f64::consts::PI * alpha2).ln()
                    - (2.0 * cr).ln());
            }
            return Ok((mass / (2.0 * cr)).ln());
        }

        if !(self.target.is_smooth() || matches!(self.target.spec(), PotentialSpec::UniformBall { .. }))
            || !self.base.is_smooth()
        {
            return Err(Error::Unsupported(format!(
                "no reference density for the pair ({}, {})",
                self.target.family_name(),
                self.base.family_name()
            )));
        }

        // Direct convolution quadrature in log space with a located window.
        let sl = lam.sqrt();
        let sr = (1.0 - lam).sqrt();
        let g = |y: f64| -> f64 {
            let a = self.target.log_density(&[y / sl]).unwrap_or(f64::NEG_INFINITY) - sl.ln();
            let b = self
                .base
                .log_density(&[(x - y) / sr])
                .unwrap_or(f64::NEG_INFINITY)
                - sr.ln();
            a + b
        };
        let span = 60.0 * (1.0 + x.abs());
        let coarse = 4001usize;
        let mut best = (f64::NEG_INFINITY, 0.0);
        let mut step = 2.0 * span / (coarse - 1) as f64;
        for k in 0..coarse {
            let y = -span + step * k as f64;
            let v = g(y);
            if v > best.0 {
                best = (v, y);
            }
        }
        if !best.0.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        // Shrinking local scans pin the peak; a mis-located maximum would
        // leave the normalized integrand far above one and stall the
        // adaptive refinement.
        for _ in 0..12 {
            let center = best.1;
            for k in 0..41 {
                let y = center - step + 2.0 * step * k as f64 / 40.0;
                let v = g(y);
                if v > best.0 {
                    best = (v, y);
                }
            }
            step /= 10.0;
        }
        let (gmax, y_peak) = best;
        let mut lo = y_peak;
        while g(lo) > gmax - 60.0 && lo > -10.0 * span {
            lo -= 0.05 * (1.0 + y_peak.abs());
        }
        let mut hi = y_peak;
        while g(hi) > gmax - 60.0 && hi < 10.0 * span {
            hi += 0.05 * (1.0 + y_peak.abs());
        }
        let q = crate::oracle::integrate(
            |y| (g(y) - gmax).exp(),
            lo,
            hi,
            &[y_peak],
            &crate::oracle::QuadConfig {
                abs_tol: 1e-13,
                max_panels: 40_000,
            },
        )?;
        Ok(gmax + q.value.ln())
    }

    /// Builds the per-time evaluation plan.
    pub fn score_context(&self, t: f64) -> Result<ScoreContext> {
        let (lam, _) = self.schedule.lambda(t)?;
        if let Some(p) = self.closed_form_marginal(t)? {
            return Ok(ScoreContext {
                lambda: lam,
                kind: ContextKind::Closed(p),
            });
        }

        // Compact-plus-gaussian arrangements: all gaussian parts merge into
        // one noise scale, the compact factor is the proposal.
        let compact = if lam == 1.0 {
            gaussian_plus_compact(&self.target).map(|(tau2, r)| (tau2 * lam, r, lam.sqrt()))
        } else if lam == 0.0 {
            gaussian_plus_compact(&self.base)
                .map(|(tau2, r)| (tau2 * (1.0 - lam), r, (1.0 - lam).sqrt()))
        } else {
            match (
                gaussian_plus_compact(&self.target),
                self.base.spec(),
                gaussian_plus_compact(&self.base),
                self.target.spec(),
            ) {
                (Some((tau2, r)), PotentialSpec::Gaussian { variance, .. }, _, _) => {
                    Some((lam * tau2 + (1.0 - lam) * variance, r, lam.sqrt()))
                }
                (None, _, Some((tau2, r)), PotentialSpec::Gaussian { variance, .. }) => {
                    Some(((1.0 - lam) * tau2 + lam * variance, r, (1.0 - lam).sqrt()))
                }
                _ => None,
            }
        };
        if let Some((alpha2, radius, scale)) = compact {
            if alpha2 > 0.0 {
                let ball = Potential::from_spec(PotentialSpec::UniformBall {
                    radius,
                    dim: self.dim(),
                })?;
                return Ok(ScoreContext {
                    lambda: lam,
                    kind: ContextKind::Compact(CompactContext {
                        ball,
                        scale,
                        alpha2,
                    }),
                });
            }
        }

        if lam == 0.0 || lam == 1.0 {
            let p = if lam == 0.0 { &self.base } else { &self.target };
            if p.is_smooth() {
                return Ok(ScoreContext {
                    lambda: lam,
                    kind: ContextKind::Pure(p.clone()),
                });
            }
            return Err(Error::Unsupported(format!(
                "score at lambda = {lam} needs a smooth endpoint family, got {}",
                p.family_name()
            )));
        }

        let direct = self.base.is_smooth();
        let swapped = self.target.is_smooth();
        if !direct && !swapped {
            return Err(Error::Unsupported(format!(
                "no score estimator for the pair ({}, {})",
                self.target.family_name(),
                self.base.family_name()
            )));
        }
        Ok(ScoreContext {
            lambda: lam,
            kind: ContextKind::Snis { direct, swapped },
        })
    }

    /// Score with the default stream derived from `cfg.seed`.
    pub fn score(&self, t: f64, x: &[f64], cfg: &SnisConfig) -> Result<ScoreEstimate> {
        let ctx = self.score_context(t)?;
        let mut rng = stream(cfg.seed, Domain::SnisProposal);
        ctx.score(self, x, cfg, &mut rng)
    }

    /// Hessian of `ln p_t` with the default stream.
    pub fn hessian_log_density(
        &self,
        t: f64,
        x: &[f64],
        cfg: &SnisConfig,
    ) -> Result<HessianEstimate> {
        let ctx = self.score_context(t)?;
        let mut rng = stream(cfg.seed, Domain::SnisProposal);
        ctx.hessian(self, x, cfg, &mut rng)
    }

    /// View of the conditional law `q_t^x`; defined for `lambda` in (0, 1)
    /// with both factor densities evaluable.
    pub fn conditional(&self, t: f64, x: &[f64]) -> Result<ConditionalLaw<'_>> {
        let (lam, _) = self.schedule.lambda(t)?;
        if !(lam > 0.0 && lam < 1.0) {
            return Err(Error::Unsupported(format!(
                "conditional law degenerates at lambda = {lam}; it is defined for lambda in (0, 1)"
            )));
        }
        if x.len() != self.dim() {
            return Err(Error::Domain("conditioning point dimension mismatch".into()));
        }
        Ok(ConditionalLaw {
            law: self,
            t,
            lambda: lam,
            point: x.to_vec(),
        })
    }

    /// Hessian via the conditional SNIS estimator even when a closed form
    /// exists; used to cross-validate the covariance identities.
    pub fn hessian_log_density_snis(
        &self,
        t: f64,
        x: &[f64],
        cfg: &SnisConfig,
    ) -> Result<HessianEstimate> {
        let (lam, _) = self.schedule.lambda(t)?;
        if !(lam > 0.0 && lam < 1.0) {
            return Err(Error::Unsupported(
                "the SNIS estimator needs lambda in (0, 1)".into(),
            ));
        }
        let ctx = ScoreContext {
            lambda: lam,
            kind: ContextKind::Snis {
                direct: self.base.is_smooth(),
                swapped: self.target.is_smooth(),
            },
        };
        let mut rng = stream(cfg.seed, Domain::SnisProposal);
        ctx.hessian(self, x, cfg, &mut rng)
    }

    /// Weighted particle set for `q_t^x`.
    pub fn conditional_sample(
        &self,
        t: f64,
        x: &[f64],
        n: usize,
        seed: u64,
        swap: bool,
    ) -> Result<ConditionalParticles> {
        let (lam, _) = self.schedule.lambda(t)?;
        if !(lam > 0.0 && lam < 1.0) {
            return Err(Error::Unsupported(format!(
                "conditional law degenerates at lambda = {lam}; it is defined for lambda in (0, 1)"
            )));
        }
        let mut rng = substream(seed, Domain::SnisProposal, 0, 0);
        let particles = self.draw_conditional(lam, x, n, swap, &mut rng)?;
        let threshold = 0.05 * n as f64;
        let nw = normalize_log_weights(&particles.log_weights, threshold)?;
        Ok(ConditionalParticles {
            points: particles.points,
            weights: nw.weights,
            ess: nw.ess,
            side: particles.side,
        })
    }

    /// Raw proposal draws plus log-weights in y-space.
    fn draw_conditional<R: Rng>(
        &self,
        lam: f64,
        x: &[f64],
        n: usize,
        swap: bool,
        rng: &mut R,
    ) -> Result<RawParticles> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Domain("conditioning point dimension mismatch".into()));
        }
        let sl = lam.sqrt();
        let sr = (1.0 - lam).sqrt();
        if swap {
            if !self.target.is_smooth() {
                return Err(Error::Unsupported(
                    "swapped proposal needs a smooth target potential for its weights".into(),
                ));
            }
            let z = self.base.sample_with(rng, n)?;
            let mut points = PointBatch::zeros(n, d);
            let mut log_weights = vec![0.0; n];
            let mut arg = vec![0.0; d];
            for i in 0..n {
                let zi = z.row(i);
                let row = points.row_mut(i);
                for j in 0..d {
                    row[j] = x[j] - sr * zi[j];
                    arg[j] = row[j] / sl;
                }
                log_weights[i] = -self.target.core_value(&arg)?;
            }
            Ok(RawParticles {
                points,
                log_weights,
                side: ProposalSide::SwappedBase,
            })
        } else {
            if !self.base.is_smooth() {
                return Err(Error::Unsupported(
                    "direct proposal needs a smooth base potential for its weights".into(),
                ));
            }
            let xs = self.target.sample_with(rng, n)?;
            let mut points = PointBatch::zeros(n, d);
            let mut log_weights = vec![0.0; n];
            let mut arg = vec![0.0; d];
            for i in 0..n {
                let xi = xs.row(i);
                let row = points.row_mut(i);
                for j in 0..d {
                    row[j] = sl * xi[j];
                    arg[j] = (x[j] - row[j]) / sr;
                }
                log_weights[i] = -self.base.core_value(&arg)?;
            }
            Ok(RawParticles {
                points,
                log_weights,
                side: ProposalSide::Target,
            })
        }
    }
}

struct RawParticles {
    points: PointBatch,
    log_weights: Vec<f64>,
    side: ProposalSide,
}

fn closed_score(p: &Potential, x: &[f64]) -> Result<ScoreEstimate> {
    let g = p.gradient(x)?;
    Ok(ScoreEstimate {
        value: g.iter().map(|v| -v).collect(),
        standard_error: vec![0.0; x.len()],
        estimator: Estimator::ClosedForm,
        ess: None,
    })
}

fn closed_hessian(p: &Potential, x: &[f64]) -> Result<HessianEstimate> {
    let h = p.hessian(x)?;
    Ok(HessianEstimate {
        value: h
            .iter()
            .map(|row| row.iter().map(|v| -v).collect())
            .collect(),
        standard_error: 0.0,
        estimator: Estimator::ClosedForm,
        ess: None,
        cross_check_discrepancy: None,
    })
}

impl ScoreContext {
    /// The exact potential whose negative gradient is the score, when this
    /// context is closed-form.
    pub fn closed_marginal(&self) -> Option<&Potential> {
        match &self.kind {
            ContextKind::Closed(p) | ContextKind::Pure(p) => Some(p),
            _ => None,
        }
    }

    /// Score of `ln p_t` at `x` with the caller's stream (the SDE driver
    /// passes per-(chain, step) sub-streams).
    pub fn score<R: Rng>(
        &self,
        law: &InterpolationLaw,
        x: &[f64],
        cfg: &SnisConfig,
        rng: &mut R,
    ) -> Result<ScoreEstimate> {
        match &self.kind {
            ContextKind::Closed(p) | ContextKind::Pure(p) => closed_score(p, x),
            ContextKind::Compact(ctx) => ctx.score(x, cfg, rng),
            ContextKind::Snis { direct, swapped } => {
                let use_swap = resolve_swap(cfg.swap_proposal, *direct, *swapped)?;
                let lam = self.lambda;
                let d = x.len();
                let raw = law.draw_conditional(lam, x, cfg.particles, use_swap, rng)?;
                let nw = normalize_log_weights(
                    &raw.log_weights,
                    cfg.ess_threshold * cfg.particles as f64,
                )?;
                // Gradient of the proposal-side potential at its conditional
                // argument; the prefactor matches the representation in use.
                let (pot, prefactor) = if use_swap {
                    (&law.target, -1.0 / lam.sqrt())
                } else {
                    (&law.base, -1.0 / (1.0 - lam).sqrt())
                };
                let sl = lam.sqrt();
                let sr = (1.0 - lam).sqrt();
                let mut arg = vec![0.0; d];
                let mut grad = vec![0.0; d];
                let sums = BlockSums::accumulate(
                    cfg.particles,
                    1 + d,
                    cfg.blocks,
                    |i, row| {
                        let y = raw.points.row(i);
                        for j in 0..d {
                            // Direct: grad W at (x - y)/sqrt(1-l);
                            // swapped: grad U at y/sqrt(l).
                            arg[j] = if use_swap {
                                y[j] / sl
                            } else {
                                (x[j] - y[j]) / sr
                            };
                        }
                        pot.gradient_into(&arg, &mut grad).expect("smooth potential");
                        row[0] = nw.weights[i];
                        for j in 0..d {
                            row[1 + j] = nw.weights[i] * grad[j];
                        }
                    },
                );
                let (value, standard_error) = sums.jackknife(|s| {
                    (0..d).map(|j| prefactor * s[1 + j] / s[0]).collect()
                });
                Ok(ScoreEstimate {
                    value,
                    standard_error,
                    estimator: Estimator::Snis,
                    ess: Some(nw.ess),
                })
            }
        }
    }

    /// Hessian of `ln p_t` at `x`.
    pub fn hessian<R: Rng>(
        &self,
        law: &InterpolationLaw,
        x: &[f64],
        cfg: &SnisConfig,
        rng: &mut R,
    ) -> Result<HessianEstimate> {
        match &self.kind {
            ContextKind::Closed(p) | ContextKind::Pure(p) => closed_hessian(p, x),
            ContextKind::Compact(ctx) => ctx.hessian(x, cfg, rng),
            ContextKind::Snis { direct, swapped } => {
                let use_swap = resolve_swap(cfg.swap_proposal, *direct, *swapped)?;
                let raw = law.draw_conditional(self.lambda, x, cfg.particles, use_swap, rng)?;
                let nw = normalize_log_weights(
                    &raw.log_weights,
                    cfg.ess_threshold * cfg.particles as f64,
                )?;
                let primary =
                    snis_hessian(law, self.lambda, x, &raw, &nw.weights, cfg, cfg.hessian_form)?;
                let mut est = HessianEstimate {
                    value: primary.0,
                    standard_error: primary.1,
                    estimator: Estimator::Snis,
                    ess: Some(nw.ess),
                    cross_check_discrepancy: None,
                };
                if cfg.cross_check {
                    let other_form = match cfg.hessian_form {
                        HessianForm::WForm => HessianForm::UForm,
                        _ => HessianForm::WForm,
                    };
                    let other =
                        snis_hessian(law, self.lambda, x, &raw, &nw.weights, cfg, other_form)?;
                    let d = x.len();
                    let mut gap = 0.0f64;
                    for i in 0..d {
                        for j in 0..d {
                            gap = gap.max((est.value[i][j] - other.0[i][j]).abs());
                        }
                    }
                    est.cross_check_discrepancy = Some(gap);
                }
                Ok(est)
            }
        }
    }
}

fn resolve_swap(requested: bool, direct: bool, swapped: bool) -> Result<bool> {
    match (requested, direct, swapped) {
        (false, true, _) => Ok(false),
        (false, false, true) => Ok(true),
        (true, _, true) => Ok(true),
        (true, true, false) => Ok(false),
        _ => Err(Error::Unsupported("no usable SNIS proposal".into())),
    }
}

/// One Hessian form evaluated on a shared particle set. Returns the matrix
/// and the worst entrywise jackknife error.
fn snis_hessian(
    law: &InterpolationLaw,
    lam: f64,
    x: &[f64],
    raw: &RawParticles,
    weights: &[f64],
    cfg: &SnisConfig,
    form: HessianForm,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let d = x.len();
    let sl = lam.sqrt();
    let sr = (1.0 - lam).sqrt();
    let need_w = matches!(form, HessianForm::WForm | HessianForm::Mixed);
    let need_u = matches!(form, HessianForm::UForm | HessianForm::Mixed);
    if need_w && !law.base.is_smooth() {
        return Err(Error::Unsupported(
            "W-form Hessian needs a smooth base potential".into(),
        ));
    }
    if need_u && !law.target.is_smooth() {
        return Err(Error::Unsupported(
            "U-form Hessian needs a smooth target potential".into(),
        ));
    }

    let n = weights.len();
    let mut wz = vec![0.0; d];
    let mut uz = vec![0.0; d];
    let mut gw = vec![0.0; d];
    let mut gu = vec![0.0; d];
    // Sum layout per form:
    //   W/U: [w, w*g (d), w*gg^T (d^2), w*hess (d^2)]
    //   Mixed: [w, w*gw (d), w*gu (d), w*gw gu^T (d^2)]
    let width = match form {
        HessianForm::WForm | HessianForm::UForm => 1 + d + 2 * d * d,
        HessianForm::Mixed => 1 + 2 * d + d * d,
    };
    let sums = BlockSums::accumulate(n, width, cfg.blocks, |i, row| {
        let y = raw.points.row(i);
        for j in 0..d {
            wz[j] = (x[j] - y[j]) / sr;
            uz[j] = y[j] / sl;
        }
        let w = weights[i];
        row[0] = w;
        match form {
            HessianForm::WForm => {
                law.base.gradient_into(&wz, &mut gw).expect("smooth base");
                let h = law.base.hessian(&wz).expect("smooth base");
                for j in 0..d {
                    row[1 + j] = w * gw[j];
                }
                for a in 0..d {
                    for b in 0..d {
                        row[1 + d + a * d + b] = w * gw[a] * gw[b];
                        row[1 + d + d * d + a * d + b] = w * h[a][b];
                    }
                }
            }
            HessianForm::UForm => {
                law.target.gradient_into(&uz, &mut gu).expect("smooth target");
                let h = law.target.hessian(&uz).expect("smooth target");
                for j in 0..d {
                    row[1 + j] = w * gu[j];
                }
                for a in 0..d {
                    for b in 0..d {
                        row[1 + d + a * d + b] = w * gu[a] * gu[b];
                        row[1 + d + d * d + a * d + b] = w * h[a][b];
                    }
                }
            }
            HessianForm::Mixed => {
                law.base.gradient_into(&wz, &mut gw).expect("smooth base");
                law.target.gradient_into(&uz, &mut gu).expect("smooth target");
                for j in 0..d {
                    row[1 + j] = w * gw[j];
                    row[1 + d + j] = w * gu[j];
                }
                for a in 0..d {
                    for b in 0..d {
                        row[1 + 2 * d + a * d + b] = w * gw[a] * gu[b];
                    }
                }
            }
        }
    });

    let finish = |s: &[f64]| -> Vec<f64> {
        let w = s[0];
        let mut out = vec![0.0; d * d];
        match form {
            HessianForm::WForm | HessianForm::UForm => {
                let denom = if matches!(form, HessianForm::WForm) {
                    1.0 - lam
                } else {
                    lam
                };
                for a in 0..d {
                    for b in 0..d {
                        let mean_a = s[1 + a] / w;
                        let mean_b = s[1 + b] / w;
                        let cov = s[1 + d + a * d + b] / w - mean_a * mean_b;
                        let eh = s[1 + d + d * d + a * d + b] / w;
                        out[a * d + b] = (cov - eh) / denom;
                    }
                }
            }
            HessianForm::Mixed => {
                let c = 1.0 / (lam * (1.0 - lam)).sqrt();
                for a in 0..d {
                    for b in 0..d {
                        let cov_ab = s[1 + 2 * d + a * d + b] / w
                            - (s[1 + a] / w) * (s[1 + d + b] / w);
                        let cov_ba = s[1 + 2 * d + b * d + a] / w
                            - (s[1 + b] / w) * (s[1 + d + a] / w);
                        out[a * d + b] = 0.5 * c * (cov_ab + cov_ba);
                    }
                }
            }
        }
        out
    };
    let (flat, se) = sums.jackknife(&finish);
    let value: Vec<Vec<f64>> = (0..d)
        .map(|a| (0..d).map(|b| flat[a * d + b]).collect())
        .collect();
    let worst_se = se.iter().cloned().fold(0.0, f64::max);
    Ok((value, worst_se))
}

impl CompactContext {
    /// Draws ball particles and weights `exp(-|x - c u|^2 / (2 alpha^2))`.
    fn particles<R: Rng>(
        &self,
        x: &[f64],
        cfg: &SnisConfig,
        rng: &mut R,
    ) -> Result<(PointBatch, Vec<f64>, f64)> {
        let n = cfg.particles;
        let d = x.len();
        let u = self.ball.sample_with(rng, n)?;
        let mut log_weights = vec![0.0; n];
        for i in 0..n {
            let ui = u.row(i);
            let mut q = 0.0;
            for j in 0..d {
                let r = x[j] - self.scale * ui[j];
                q += r * r;
            }
            log_weights[i] = -0.5 * q / self.alpha2;
        }
        let nw = normalize_log_weights(&log_weights, cfg.ess_threshold * n as f64)?;
        Ok((u, nw.weights, nw.ess))
    }

    /// `grad ln p_t(x) = (c E[u|x] - x) / alpha^2`.
    fn score<R: Rng>(&self, x: &[f64], cfg: &SnisConfig, rng: &mut R) -> Result<ScoreEstimate> {
        let d = x.len();
        let (u, weights, ess) = self.particles(x, cfg, rng)?;
        let sums = BlockSums::accumulate(weights.len(), 1 + d, cfg.blocks, |i, row| {
            row[0] = weights[i];
            let ui = u.row(i);
            for j in 0..d {
                row[1 + j] = weights[i] * ui[j];
            }
        });
        let (value, se) = sums.jackknife(|s| {
            (0..d)
                .map(|j| (self.scale * s[1 + j] / s[0] - x[j]) / self.alpha2)
                .collect()
        });
        Ok(ScoreEstimate {
            value,
            standard_error: se,
            estimator: Estimator::Snis,
            ess: Some(ess),
        })
    }

    /// `hess ln p_t(x) = -I / alpha^2 + c^2 Cov[u|x] / alpha^4`.
    fn hessian<R: Rng>(&self, x: &[f64], cfg: &SnisConfig, rng: &mut R) -> Result<HessianEstimate> {
        let d = x.len();
        let (u, weights, ess) = self.particles(x, cfg, rng)?;
        let width = 1 + d + d * d;
        let sums = BlockSums::accumulate(weights.len(), width, cfg.blocks, |i, row| {
            let w = weights[i];
            let ui = u.row(i);
            row[0] = w;
            for j in 0..d {
                row[1 + j] = w * ui[j];
            }
            for a in 0..d {
                for b in 0..d {
                    row[1 + d + a * d + b] = w * ui[a] * ui[b];
                }
            }
        });
        let c2 = self.scale * self.scale;
        let a2 = self.alpha2;
        let (flat, se) = sums.jackknife(|s| {
            let w = s[0];
            let mut out = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    let cov = s[1 + d + a * d + b] / w - (s[1 + a] / w) * (s[1 + b] / w);
                    out[a * d + b] =
                        c2 * cov / (a2 * a2) - if a == b { 1.0 / a2 } else { 0.0 };
                }
            }
            out
        });
        Ok(HessianEstimate {
            value: (0..d)
                .map(|a| (0..d).map(|b| flat[a * d + b]).collect())
                .collect(),
            standard_error: se.iter().cloned().fold(0.0, f64::max),
            estimator: Estimator::Snis,
            ess: Some(ess),
            cross_check_discrepancy: None,
        })
    }
}

/// Convenience: moments of both sides, used by bound assemblers.
pub fn endpoint_moments(law: &InterpolationLaw) -> Result<(MomentSummary, MomentSummary)> {
    Ok((law.target().moments()?, law.base().moments()?))
}
