//! Analytic distribution families.
//!
//! Each family stores a potential `H` with `density = e^{-H}` integrating to
//! one (the log-normalizer is part of `H`), exposes closed-form gradient and
//! Hessian where the family is smooth, exact samplers, and moment summaries.
//!
//! Families:
//! - `gaussian(variance)`: N(0, sigma^2 I),
//! - `gaussian_mixture(weights, means, variance)`: shared isotropic
//!   component variance,
//! - `student(alpha, sigma)`: multivariate Student t(0, sigma^2 I, alpha),
//! - `subbotin(alpha)`: exponential power e^{-(1+|x|^2)^{alpha/2}},
//!   alpha in (0, 2], smooth at the origin,
//! - `uniform_ball(radius)`: sampling and moments only (non-smooth),
//! - `compact_gaussian_convolution(radius, tau2)`: uniform ball draw plus
//!   N(0, tau^2 I) noise; sampling and moments only, score access goes
//!   through the interpolation identities.

mod profile;
mod sampling;

pub use profile::{
    CheckResult, DriftGrowth, QuasiConvexity, RadialLowerBound, SmoothnessProfile,
    VerificationReport,
};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use statrs::function::gamma::ln_gamma;

/// JSON-facing family description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Gaussian {
        variance: f64,
        dim: usize,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        variance: f64,
        dim: usize,
    },
    Student {
        alpha: f64,
        sigma: f64,
        dim: usize,
    },
    Subbotin {
        alpha: f64,
        dim: usize,
    },
    UniformBall {
        radius: f64,
        dim: usize,
    },
    CompactGaussianConvolution {
        radius: f64,
        tau2: f64,
        dim: usize,
    },
}

impl PotentialSpec {
    pub fn dim(&self) -> usize {
        match *self {
            PotentialSpec::Gaussian { dim, .. }
            | PotentialSpec::GaussianMixture { dim, .. }
            | PotentialSpec::Student { dim, .. }
            | PotentialSpec::Subbotin { dim, .. }
            | PotentialSpec::UniformBall { dim, .. }
            | PotentialSpec::CompactGaussianConvolution { dim, .. } => dim,
        }
    }
}

/// A validated measure with its cached normalizer and (for subbotin) the
/// radially integrated moments.
#[derive(Debug, Clone)]
pub struct Potential {
    spec: PotentialSpec,
    dim: usize,
    /// ln Z so that H(x) = core(x) + ln Z has e^{-H} integrating to 1.
    /// NaN for families without a closed potential.
    log_normalizer: f64,
    /// (mean_abs, second_moment) for subbotin, from radial quadrature.
    subbotin_moments: Option<(f64, f64)>,
}

/// Value, gradient and Hessian of the potential at a point.
#[derive(Debug, Clone)]
pub struct PotentialEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// First and second moments of a family.
///
/// `mean_abs` is `E|X|` and `second_moment` is `E|X|^2`. Families without a
/// closed form for a quantity report a valid upper bound and set the flag;
/// every downstream bound uses these quantities in a direction where an
/// upper bound stays sound.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSummary {
    pub mean_abs: f64,
    pub second_moment: f64,
    pub mean: Vec<f64>,
    pub mean_abs_is_upper_bound: bool,
    pub second_moment_is_upper_bound: bool,
}

/// Batch of points, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBatch {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl PointBatch {
    pub fn zeros(n: usize, dim: usize) -> Self {
        PointBatch {
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Domain(format!(
            "point has dimension {}, potential has {}",
            x.len(),
            dim
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("point has non-finite coordinates".into()));
    }
    Ok(())
}

/// log of the unit-sphere surface area S_{d-1} = 2 pi^{d/2} / Gamma(d/2).
fn log_sphere_surface(d: usize) -> f64 {
    let d = d as f64;
    std::f64::consts::LN_2 + 0.5 * d * std::f64::consts::PI.ln() - ln_gamma(0.5 * d)
}

/// log of vol(B(0, r)) in dimension d.
pub(crate) fn log_ball_volume(d: usize, r: f64) -> f64 {
    let df = d as f64;
    0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df + 1.0) + df * r.ln()
}

/// E|G| for G standard normal in dimension d (chi mean).
fn chi_mean(d: usize) -> f64 {
    let df = d as f64;
    std::f64::consts::SQRT_2 * (ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df)).exp()
}

/// log of int_0^infty r^k e^{L(r)} dr computed in log-space via r = e^t,
/// with the window located by scanning the exponent.
fn log_radial_integral<F>(k: f64, log_radial: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let phi = |t: f64| (k + 1.0) * t + log_radial(t.exp());
    let mut t_best = 0.0;
    let mut phi_best = f64::NEG_INFINITY;
    let mut t = -40.0;
    while t <= 40.0 {
        let p = phi(t);
        if p > phi_best {
            phi_best = p;
            t_best = t;
        }
        t += 0.125;
    }
    if !phi_best.is_finite() {
        return Err(Error::Numerical("radial integrand vanished everywhere".into()));
    }
    let mut lo = t_best;
    while phi(lo) > phi_best - 80.0 && lo > -200.0 {
        lo -= 0.5;
    }
    let mut hi = t_best;
    while phi(hi) > phi_best - 80.0 && hi < 200.0 {
        hi += 0.5;
    }
    let q = crate::oracle::integrate(
        |t| (phi(t) - phi_best).exp(),
        lo,
        hi,
        &[],
        &crate::oracle::QuadConfig {
            abs_tol: 1e-12,
            max_panels: 40_000,
        },
    )?;
    Ok(phi_best + q.value.ln())
}

impl Potential {
    pub fn from_spec(spec: PotentialSpec) -> Result<Self> {
        let dim = spec.dim();
        if dim == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        let mut spec = spec;
        let mut subbotin_moments = None;
        let log_normalizer = match &mut spec {
            PotentialSpec::Gaussian { variance, dim } => {
                if *variance <= 0.0 {
                    return Err(Error::Domain("gaussian variance must be positive".into()));
                }
                0.5 * *dim as f64 * (2.0 * std::f64::consts::PI * *variance).ln()
            }
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                dim,
            } => {
                if *variance <= 0.0 {
                    return Err(Error::Domain("mixture variance must be positive".into()));
                }
                if weights.is_empty() || weights.len() != means.len() {
                    return Err(Error::Domain(
                        "mixture needs matching non-empty weights and means".into(),
                    ));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::Domain("mixture weights must be positive".into()));
                }
                if means.iter().any(|m| m.len() != *dim) {
                    return Err(Error::Domain("mixture mean dimension mismatch".into()));
                }
                let total: f64 = weights.iter().sum();
                for w in weights.iter_mut() {
                    *w /= total;
                }
                // Per-component normalizer; the mixture weights are already a
                // probability vector.
                0.5 * *dim as f64 * (2.0 * std::f64::consts::PI * *variance).ln()
            }
            PotentialSpec::Student { alpha, sigma, dim } => {
                if !(*alpha > 0.0) || !(*sigma > 0.0) {
                    return Err(Error::Domain(
                        "student needs alpha > 0 and sigma > 0".into(),
                    ));
                }
                let d = *dim as f64;
                ln_gamma(0.5 * *alpha) - ln_gamma(0.5 * (*alpha + d))
                    + 0.5 * d * (*alpha * std::f64::consts::PI).ln()
                    + d * sigma.ln()
            }
            PotentialSpec::Subbotin { alpha, dim } => {
                if !(*alpha > 0.0 && *alpha <= 2.0) {
                    return Err(Error::Domain("subbotin needs alpha in (0, 2]".into()));
                }
                let a = *alpha;
                let k = (*dim - 1) as f64;
                let log_i0 = log_radial_integral(k, |r| -(1.0 + r * r).powf(0.5 * a))?;
                let log_i1 = log_radial_integral(k + 1.0, |r| -(1.0 + r * r).powf(0.5 * a))?;
                let log_i2 = log_radial_integral(k + 2.0, |r| -(1.0 + r * r).powf(0.5 * a))?;
                subbotin_moments = Some(((log_i1 - log_i0).exp(), (log_i2 - log_i0).exp()));
                log_sphere_surface(*dim) + log_i0
            }
            PotentialSpec::UniformBall { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Domain("uniform_ball radius must be positive".into()));
                }
                f64::NAN
            }
            PotentialSpec::CompactGaussianConvolution { radius, tau2, .. } => {
                if !(*radius > 0.0) || *tau2 < 0.0 {
                    return Err(Error::Domain(
                        "compact_gaussian_convolution needs radius > 0 and tau2 >= 0".into(),
                    ));
                }
                f64::NAN
            }
        };
        Ok(Potential {
            dim,
            spec,
            log_normalizer,
            subbotin_moments,
        })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether H, grad H, hess H are available in closed form.
    pub fn is_smooth(&self) -> bool {
        !matches!(
            self.spec,
            PotentialSpec::UniformBall { .. } | PotentialSpec::CompactGaussianConvolution { .. }
        )
    }

    fn unsupported(&self, what: &str) -> Error {
        Error::Unsupported(format!("{what} is not available for {:?}", self.family_name()))
    }

    pub fn family_name(&self) -> &'static str {
        match self.spec {
            PotentialSpec::Gaussian { .. } => "gaussian",
            PotentialSpec::GaussianMixture { .. } => "gaussian_mixture",
            PotentialSpec::Student { .. } => "student",
            PotentialSpec::Subbotin { .. } => "subbotin",
            PotentialSpec::UniformBall { .. } => "uniform_ball",
            PotentialSpec::CompactGaussianConvolution { .. } => "compact_gaussian_convolution",
        }
    }

    /// H(x) including the normalizer, so `log_density = -value`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_point(x, self.dim)?;
        match &self.spec {
            PotentialSpec::Gaussian { variance, .. } => {
                Ok(0.5 * norm_sq(x) / variance + self.log_normalizer)
            }
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                ..
            } => {
                let (lse, _, _) = mixture_posterior(x, weights, means, *variance);
                Ok(-lse + self.log_normalizer)
            }
            PotentialSpec::Student { alpha, sigma, .. } => {
                let scale = alpha * sigma * sigma;
                Ok(0.5 * (alpha + self.dim as f64) * (1.0 + norm_sq(x) / scale).ln()
                    + self.log_normalizer)
            }
            PotentialSpec::Subbotin { alpha, .. } => {
                Ok((1.0 + norm_sq(x)).powf(0.5 * alpha) + self.log_normalizer)
            }
            _ => Err(self.unsupported("potential evaluation")),
        }
    }

    /// ln density; for uniform_ball this is the indicator form.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        match &self.spec {
            PotentialSpec::UniformBall { radius, .. } => {
                check_point(x, self.dim)?;
                if norm_sq(x) <= radius * radius {
                    Ok(-log_ball_volume(self.dim, *radius))
                } else {
                    Ok(f64::NEG_INFINITY)
                }
            }
            PotentialSpec::CompactGaussianConvolution { .. } => {
                Err(self.unsupported("log-density"))
            }
            _ => Ok(-self.value(x)?),
        }
    }

    /// grad H(x).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g)?;
        Ok(g)
    }

    /// grad H(x) written into `out`; allocation-free path for the SNIS
    /// inner loops.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_point(x, self.dim)?;
        debug_assert_eq!(out.len(), self.dim);
        match &self.spec {
            PotentialSpec::Gaussian { variance, .. } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v / variance;
                }
                Ok(())
            }
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                ..
            } => {
                let (_, post, _) = mixture_posterior(x, weights, means, *variance);
                out.fill(0.0);
                for (p, mu) in post.iter().zip(means) {
                    for (gi, m) in out.iter_mut().zip(mu) {
                        *gi += p * m;
                    }
                }
                for (gi, xi) in out.iter_mut().zip(x) {
                    *gi = (xi - *gi) / variance;
                }
                Ok(())
            }
            PotentialSpec::Student { alpha, sigma, .. } => {
                let c = (alpha + self.dim as f64) / (alpha * sigma * sigma + norm_sq(x));
                for (o, v) in out.iter_mut().zip(x) {
                    *o = c * v;
                }
                Ok(())
            }
            PotentialSpec::Subbotin { alpha, .. } => {
                let c = alpha * (1.0 + norm_sq(x)).powf(0.5 * alpha - 1.0);
                for (o, v) in out.iter_mut().zip(x) {
                    *o = c * v;
                }
                Ok(())
            }
            _ => Err(self.unsupported("gradient")),
        }
    }

    /// H(x) without the normalizer; the only piece SNIS weights need.
    pub fn core_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value(x)? - self.log_normalizer)
    }

    /// hess H(x), dense symmetric.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_point(x, self.dim)?;
        let d = self.dim;
        match &self.spec {
            PotentialSpec::Gaussian { variance, .. } => {
                let mut h = vec![vec![0.0; d]; d];
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] = 1.0 / variance;
                }
                Ok(h)
            }
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                ..
            } => {
                let (_, post, _) = mixture_posterior(x, weights, means, *variance);
                let s2 = *variance;
                let mut mean = vec![0.0; d];
                for (p, mu) in post.iter().zip(means) {
                    for (mi, m) in mean.iter_mut().zip(mu) {
                        *mi += p * m;
                    }
                }
                // hess H = I/s^2 - Cov_post(mu)/s^4
                let mut h = vec![vec![0.0; d]; d];
                for (p, mu) in post.iter().zip(means) {
                    for i in 0..d {
                        for j in 0..d {
                            h[i][j] -= p * (mu[i] - mean[i]) * (mu[j] - mean[j]) / (s2 * s2);
                        }
                    }
                }
                for (i, row) in h.iter_mut().enumerate() {
                    row[i] += 1.0 / s2;
                }
                Ok(h)
            }
            PotentialSpec::Student { alpha, sigma, .. } => {
                let q = alpha * sigma * sigma + norm_sq(x);
                let c = (alpha + d as f64) / q;
                let mut h = vec![vec![0.0; d]; d];
                for i in 0..d {
                    for j in 0..d {
                        h[i][j] = c * (if i == j { 1.0 } else { 0.0 } - 2.0 * x[i] * x[j] / q);
                    }
                }
                Ok(h)
            }
            PotentialSpec::Subbotin { alpha, .. } => {
                let s = 1.0 + norm_sq(x);
                let c1 = alpha * s.powf(0.5 * alpha - 1.0);
                let c2 = alpha * (alpha - 2.0) * s.powf(0.5 * alpha - 2.0);
                let mut h = vec![vec![0.0; d]; d];
                for i in 0..d {
                    for j in 0..d {
                        h[i][j] = c2 * x[i] * x[j] + if i == j { c1 } else { 0.0 };
                    }
                }
                Ok(h)
            }
            _ => Err(self.unsupported("hessian")),
        }
    }

    /// Value, gradient and Hessian in one call.
    pub fn eval(&self, x: &[f64]) -> Result<PotentialEval> {
        Ok(PotentialEval {
            value: self.value(x)?,
            gradient: self.gradient(x)?,
            hessian: self.hessian(x)?,
        })
    }

    /// Closed-form moments; flags mark quantities reported as upper bounds.
    pub fn moments(&self) -> Result<MomentSummary> {
        let d = self.dim;
        let df = d as f64;
        match &self.spec {
            PotentialSpec::Gaussian { variance, .. } => Ok(MomentSummary {
                mean_abs: variance.sqrt() * chi_mean(d),
                second_moment: variance * df,
                mean: vec![0.0; d],
                mean_abs_is_upper_bound: false,
                second_moment_is_upper_bound: false,
            }),
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                ..
            } => {
                let s2 = *variance;
                let mut mean = vec![0.0; d];
                let mut v = 0.0;
                for (w, mu) in weights.iter().zip(means) {
                    v += w * (norm_sq(mu) + df * s2);
                    for (mi, m) in mean.iter_mut().zip(mu) {
                        *mi += w * m;
                    }
                }
                let centered = means.iter().all(|mu| norm_sq(mu) == 0.0);
                let (mean_abs, flag) = if centered {
                    (s2.sqrt() * chi_mean(d), false)
                } else if d == 1 {
                    let s = s2.sqrt();
                    let m1 = weights
                        .iter()
                        .zip(means)
                        .map(|(w, mu)| {
                            let m = mu[0];
                            w * (s * (2.0 / std::f64::consts::PI).sqrt()
                                * (-m * m / (2.0 * s2)).exp()
                                + m * erf(m / (s * std::f64::consts::SQRT_2)))
                        })
                        .sum();
                    (m1, false)
                } else {
                    // No elementary noncentral-chi mean; sqrt(V) is a valid
                    // upper bound by Cauchy-Schwarz.
                    (v.sqrt(), true)
                };
                Ok(MomentSummary {
                    mean_abs,
                    second_moment: v,
                    mean,
                    mean_abs_is_upper_bound: flag,
                    second_moment_is_upper_bound: false,
                })
            }
            PotentialSpec::Student { alpha, sigma, .. } => {
                if *alpha <= 2.0 {
                    return Err(Error::Precondition(format!(
                        "alpha > 2 required for a finite student second moment, got alpha = {alpha}"
                    )));
                }
                let mean_abs = sigma
                    * alpha.sqrt()
                    * (ln_gamma(0.5 * (df + 1.0)) + ln_gamma(0.5 * (alpha - 1.0))
                        - ln_gamma(0.5 * df)
                        - ln_gamma(0.5 * alpha))
                    .exp();
                Ok(MomentSummary {
                    mean_abs,
                    second_moment: df * alpha * sigma * sigma / (alpha - 2.0),
                    mean: vec![0.0; d],
                    mean_abs_is_upper_bound: false,
                    second_moment_is_upper_bound: false,
                })
            }
            PotentialSpec::Subbotin { .. } => {
                let (m, v) = self.subbotin_moments.expect("cached at construction");
                Ok(MomentSummary {
                    mean_abs: m,
                    second_moment: v,
                    mean: vec![0.0; d],
                    mean_abs_is_upper_bound: false,
                    second_moment_is_upper_bound: false,
                })
            }
            PotentialSpec::UniformBall { radius, .. } => Ok(MomentSummary {
                mean_abs: radius * df / (df + 1.0),
                second_moment: radius * radius * df / (df + 2.0),
                mean: vec![0.0; d],
                mean_abs_is_upper_bound: false,
                second_moment_is_upper_bound: false,
            }),
            PotentialSpec::CompactGaussianConvolution { radius, tau2, .. } => {
                // V <= R^2 + tau^2 d for any compactly supported factor.
                let v = radius * radius + tau2 * df;
                Ok(MomentSummary {
                    mean_abs: v.sqrt(),
                    second_moment: v,
                    mean: vec![0.0; d],
                    mean_abs_is_upper_bound: true,
                    second_moment_is_upper_bound: true,
                })
            }
        }
    }

    /// Exact covariance matrix of the family (dense symmetric).
    ///
    /// Unlike [`Potential::moments`], nothing here is an upper bound: the
    /// compact factor of `compact_gaussian_convolution` is the uniform ball,
    /// whose covariance is `R^2/(d+2) I`.
    pub fn exact_covariance(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.dim;
        let df = d as f64;
        let iso = |v: f64| -> Vec<Vec<f64>> {
            let mut m = vec![vec![0.0; d]; d];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = v;
            }
            m
        };
        match &self.spec {
            PotentialSpec::Gaussian { variance, .. } => Ok(iso(*variance)),
            PotentialSpec::Student { alpha, sigma, .. } => {
                if *alpha <= 2.0 {
                    return Err(Error::Precondition(format!(
                        "alpha > 2 required for a finite student covariance, got alpha = {alpha}"
                    )));
                }
                Ok(iso(alpha * sigma * sigma / (alpha - 2.0)))
            }
            PotentialSpec::Subbotin { .. } => {
                let (_, v) = self.subbotin_moments.expect("cached at construction");
                Ok(iso(v / df))
            }
            PotentialSpec::UniformBall { radius, .. } => Ok(iso(radius * radius / (df + 2.0))),
            PotentialSpec::CompactGaussianConvolution { radius, tau2, .. } => {
                Ok(iso(radius * radius / (df + 2.0) + tau2))
            }
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                ..
            } => {
                let mut mean = vec![0.0; d];
                for (w, mu) in weights.iter().zip(means) {
                    for (mi, m) in mean.iter_mut().zip(mu) {
                        *mi += w * m;
                    }
                }
                let mut cov = iso(*variance);
                for (w, mu) in weights.iter().zip(means) {
                    for i in 0..d {
                        for j in 0..d {
                            cov[i][j] += w * (mu[i] - mean[i]) * (mu[j] - mean[j]);
                        }
                    }
                }
                Ok(cov)
            }
        }
    }

    /// Deterministic grid for profile verification: radial levels along a
    /// fixed direction set, scaled to the family's natural range.
    pub fn canonical_grid(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim;
        let r_max = match &self.spec {
            PotentialSpec::Gaussian { variance, .. } => 8.0 * variance.sqrt(),
            PotentialSpec::GaussianMixture {
                means, variance, ..
            } => {
                let mu_max = means.iter().map(|m| norm_sq(m).sqrt()).fold(0.0, f64::max);
                8.0 * variance.sqrt() + mu_max
            }
            PotentialSpec::Student { alpha, sigma, .. } => 40.0 * sigma * alpha.sqrt(),
            PotentialSpec::Subbotin { .. } => 12.0,
            PotentialSpec::UniformBall { radius, .. }
            | PotentialSpec::CompactGaussianConvolution { radius, .. } => 2.0 * radius,
        };
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            dirs.push(e.clone());
            e[i] = -1.0;
            dirs.push(e);
        }
        if d > 1 {
            let c = 1.0 / (d as f64).sqrt();
            dirs.push(vec![c; d]);
            let mut alt: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { c } else { -c }).collect();
            dirs.push(alt.clone());
            alt.reverse();
            dirs.push(alt);
        }
        let levels = n.div_ceil(dirs.len()).max(2);
        let mut grid = Vec::with_capacity(dirs.len() * levels);
        for dir in &dirs {
            for k in 0..levels {
                let r = r_max * (k as f64 + 0.5) / levels as f64;
                grid.push(dir.iter().map(|v| v * r).collect());
            }
        }
        grid
    }
}

/// Log-sum-exp of component log-densities plus posterior weights; returns
/// `(lse, posterior, component_log_terms)` where `lse` excludes the shared
/// per-component normalizer.
fn mixture_posterior(
    x: &[f64],
    weights: &[f64],
    means: &[Vec<f64>],
    variance: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let mut terms: Vec<f64> = weights
        .iter()
        .zip(means)
        .map(|(w, mu)| {
            let q: f64 = x.iter().zip(mu).map(|(xi, mi)| (xi - mi) * (xi - mi)).sum();
            w.ln() - 0.5 * q / variance
        })
        .collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    let lse = max + sum.ln();
    let post: Vec<f64> = terms.iter().map(|t| (t - lse).exp()).collect();
    for t in terms.iter_mut() {
        *t -= lse;
    }
    (lse, post, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(v: f64, d: usize) -> Potential {
        Potential::from_spec(PotentialSpec::Gaussian { variance: v, dim: d }).unwrap()
    }

    #[test]
    fn gaussian_at_origin() {
        let p = gaussian(1.0, 2);
        let e = p.eval(&[0.0, 0.0]).unwrap();
        assert_eq!(e.gradient, vec![0.0, 0.0]);
        assert_eq!(e.hessian[0][0], 1.0);
        assert_eq!(e.hessian[1][1], 1.0);
        assert_eq!(e.hessian[0][1], 0.0);
        // H(0) = ln Z of the standard 2D normal.
        assert!((e.value - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn student_second_derivative_at_origin() {
        let p = Potential::from_spec(PotentialSpec::Student {
            alpha: 3.0,
            sigma: 1.0,
            dim: 1,
        })
        .unwrap();
        let e = p.eval(&[0.0]).unwrap();
        assert_eq!(e.gradient[0], 0.0);
        assert!((e.hessian[0][0] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn non_smooth_families_reject_eval() {
        let p = Potential::from_spec(PotentialSpec::UniformBall {
            radius: 1.0,
            dim: 2,
        })
        .unwrap();
        assert!(matches!(p.eval(&[0.0, 0.0]), Err(Error::Unsupported(_))));
        let c = Potential::from_spec(PotentialSpec::CompactGaussianConvolution {
            radius: 1.0,
            tau2: 1.0,
            dim: 2,
        })
        .unwrap();
        assert!(c.eval(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn non_finite_point_rejected() {
        let p = gaussian(1.0, 1);
        assert!(matches!(p.eval(&[f64::NAN]), Err(Error::Domain(_))));
    }

    #[test]
    fn densities_normalize_in_1d() {
        // Integrate e^{-H} over a wide interval for each smooth family.
        let families = vec![
            Potential::from_spec(PotentialSpec::Gaussian {
                variance: 2.0,
                dim: 1,
            })
            .unwrap(),
            Potential::from_spec(PotentialSpec::Student {
                alpha: 3.0,
                sigma: 1.0,
                dim: 1,
            })
            .unwrap(),
            Potential::from_spec(PotentialSpec::Subbotin { alpha: 1.0, dim: 1 }).unwrap(),
            Potential::from_spec(PotentialSpec::GaussianMixture {
                weights: vec![0.3, 0.7],
                means: vec![vec![-1.0], vec![2.0]],
                variance: 1.0,
                dim: 1,
            })
            .unwrap(),
        ];
        for p in &families {
            let mass = crate::oracle::integrate(
                |x| p.log_density(&[x]).unwrap().exp(),
                -300.0,
                300.0,
                &[-1.0, 0.0, 1.0],
                &crate::oracle::QuadConfig::default(),
            )
            .unwrap()
            .value;
            assert!(
                (mass - 1.0).abs() < 1e-6,
                "{} mass = {mass}",
                p.family_name()
            );
        }
    }

    #[test]
    fn moments_match_quadrature_for_subbotin() {
        let p = Potential::from_spec(PotentialSpec::Subbotin { alpha: 1.0, dim: 1 }).unwrap();
        let m = p.moments().unwrap();
        // Breakpoints keep initial Simpson probes inside the bulk; without
        // them every probe lands in the tail and the panel is accepted at 0.
        let v = crate::oracle::integrate(
            |x| x * x * p.log_density(&[x]).unwrap().exp(),
            -200.0,
            200.0,
            &[-8.0, -3.0, -1.0, 1.0, 3.0, 8.0],
            &crate::oracle::QuadConfig::default(),
        )
        .unwrap()
        .value;
        assert!((m.second_moment - v).abs() / v < 1e-7, "{} vs {v}", m.second_moment);
        assert!(m.mean_abs * m.mean_abs <= m.second_moment);
    }

    #[test]
    fn student_moment_values() {
        let p = Potential::from_spec(PotentialSpec::Student {
            alpha: 3.0,
            sigma: 1.0,
            dim: 1,
        })
        .unwrap();
        let m = p.moments().unwrap();
        assert!((m.second_moment - 3.0).abs() < 1e-12);
        // E|X| for 1D student t3: 2 sqrt(3)/pi.
        let exact = 2.0 * 3.0f64.sqrt() / std::f64::consts::PI;
        assert!((m.mean_abs - exact).abs() < 1e-12, "{}", m.mean_abs);
    }

    #[test]
    fn student_alpha_two_rejected() {
        let p = Potential::from_spec(PotentialSpec::Student {
            alpha: 2.0,
            sigma: 1.0,
            dim: 1,
        })
        .unwrap();
        let err = p.moments().unwrap_err().to_string();
        assert!(err.contains("alpha > 2"), "{err}");
    }

    #[test]
    fn uniform_ball_moments() {
        let p = Potential::from_spec(PotentialSpec::UniformBall {
            radius: 1.0,
            dim: 2,
        })
        .unwrap();
        let m = p.moments().unwrap();
        assert!((m.second_moment - 0.5).abs() < 1e-14);
        assert!((m.mean_abs - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn mean_abs_cauchy_schwarz_all_families() {
        let specs = vec![
            PotentialSpec::Gaussian {
                variance: 0.5,
                dim: 3,
            },
            PotentialSpec::GaussianMixture {
                weights: vec![1.0, 1.0],
                means: vec![vec![1.0, 0.0], vec![-1.0, 0.5]],
                variance: 2.0,
                dim: 2,
            },
            PotentialSpec::Student {
                alpha: 4.0,
                sigma: 2.0,
                dim: 2,
            },
            PotentialSpec::Subbotin { alpha: 1.5, dim: 2 },
            PotentialSpec::UniformBall {
                radius: 2.0,
                dim: 4,
            },
            PotentialSpec::CompactGaussianConvolution {
                radius: 0.5,
                tau2: 1.0,
                dim: 2,
            },
        ];
        for s in specs {
            let p = Potential::from_spec(s).unwrap();
            let m = p.moments().unwrap();
            assert!(
                m.mean_abs * m.mean_abs <= m.second_moment * (1.0 + 1e-12),
                "{}: m^2 = {} > V = {}",
                p.family_name(),
                m.mean_abs * m.mean_abs,
                m.second_moment
            );
        }
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{"family": "student", "alpha": 3.0, "sigma": 1.0, "dim": 1}"#;
        let spec: PotentialSpec = serde_json::from_str(json).unwrap();
        let p = Potential::from_spec(spec).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.family_name(), "student");
    }
}
