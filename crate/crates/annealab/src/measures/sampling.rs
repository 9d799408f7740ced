//! Exact samplers, deterministic given the seed.
//!
//! - gaussian: direct normal draws,
//! - gaussian_mixture: CDF inversion over components, then the component,
//! - student: gaussian over chi representation `sigma sqrt(alpha) G / sqrt(Q)`,
//!   `Q ~ chi^2_alpha`,
//! - subbotin: radial rejection from a generalized-gamma envelope plus a
//!   uniform direction,
//! - uniform_ball: radial inverse CDF `r = R U^{1/d}`,
//! - compact_gaussian_convolution: uniform ball draw plus gaussian noise.

use super::{norm_sq, PointBatch, Potential, PotentialSpec};
use crate::rng::{stream, Domain};
use crate::{Error, Result};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, Gamma, StandardNormal};

impl Potential {
    /// `n` independent exact draws; bit-reproducible for fixed
    /// `(family, n, seed)`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PointBatch> {
        if n == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        let mut rng = stream(seed, Domain::TargetDraw);
        self.sample_with(&mut rng, n)
    }

    /// Draws using a caller-provided stream (interpolation and SDE paths
    /// derive their own sub-streams).
    pub fn sample_with<R: Rng>(&self, rng: &mut R, n: usize) -> Result<PointBatch> {
        let mut batch = PointBatch::zeros(n, self.dim());
        for i in 0..n {
            self.draw_into(rng, batch.row_mut(i))?;
        }
        Ok(batch)
    }

    /// One draw written into `out`.
    pub fn draw_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(out.len(), self.dim());
        match self.spec() {
            PotentialSpec::Gaussian { variance, .. } => {
                let s = variance.sqrt();
                for v in out.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    *v = s * g;
                }
            }
            PotentialSpec::GaussianMixture {
                weights,
                means,
                variance,
                ..
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = weights.len() - 1;
                for (k, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        idx = k;
                        break;
                    }
                }
                let s = variance.sqrt();
                for (v, m) in out.iter_mut().zip(&means[idx]) {
                    let g: f64 = StandardNormal.sample(rng);
                    *v = m + s * g;
                }
            }
            PotentialSpec::Student { alpha, sigma, .. } => {
                let chi2 = Gamma::new(0.5 * alpha, 2.0)
                    .map_err(|e| Error::Domain(format!("chi-square setup: {e}")))?;
                let q: f64 = chi2.sample(rng);
                let c = sigma * (alpha / q).sqrt();
                for v in out.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    *v = c * g;
                }
            }
            PotentialSpec::Subbotin { alpha, .. } => {
                let r = sample_subbotin_radius(rng, *alpha, self.dim())?;
                uniform_direction(rng, out);
                for v in out.iter_mut() {
                    *v *= r;
                }
            }
            PotentialSpec::UniformBall { radius, .. } => {
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / self.dim() as f64);
                uniform_direction(rng, out);
                for v in out.iter_mut() {
                    *v *= r;
                }
            }
            PotentialSpec::CompactGaussianConvolution { radius, tau2, .. } => {
                let u: f64 = rng.random();
                let r = radius * u.powf(1.0 / self.dim() as f64);
                uniform_direction(rng, out);
                let tau = tau2.sqrt();
                for v in out.iter_mut() {
                    let g: f64 = StandardNormal.sample(rng);
                    *v = *v * r + tau * g;
                }
            }
        }
        Ok(())
    }
}

fn uniform_direction<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let n = norm_sq(out).sqrt();
        if n > 1e-12 {
            for v in out.iter_mut() {
                *v /= n;
            }
            return;
        }
    }
}

/// Radius of the subbotin law, density proportional to
/// `r^{d-1} e^{-(1+r^2)^{alpha/2}}`.
///
/// Envelope: since `(1+r^2)^{alpha/2} >= r^alpha`, the target is dominated by
/// `r^{d-1} e^{-r^alpha}`, which is `u = r^alpha` with `u ~ Gamma(d/alpha, 1)`.
/// Acceptance probability `exp(r^alpha - (1+r^2)^{alpha/2})` is at least
/// `e^{-1}` because `(1+r^2)^{alpha/2} <= 1 + r^alpha` for `alpha <= 2`, so
/// the loop needs fewer than e tries on average.
fn sample_subbotin_radius<R: Rng>(rng: &mut R, alpha: f64, dim: usize) -> Result<f64> {
    let envelope = Gamma::new(dim as f64 / alpha, 1.0)
        .map_err(|e| Error::Domain(format!("subbotin envelope setup: {e}")))?;
    loop {
        let u: f64 = envelope.sample(rng);
        let r = u.powf(1.0 / alpha);
        let log_accept = u - (1.0 + r * r).powf(0.5 * alpha);
        let v: f64 = rng.random();
        if v.ln() <= log_accept {
            return Ok(r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn potential(spec: PotentialSpec) -> Potential {
        Potential::from_spec(spec).unwrap()
    }

    fn empirical_v(batch: &PointBatch) -> f64 {
        batch.rows().map(norm_sq).sum::<f64>() / batch.len() as f64
    }

    #[test]
    fn gaussian_lln() {
        let d = 3;
        let p = potential(PotentialSpec::Gaussian {
            variance: 1.0,
            dim: d,
        });
        let n = 100_000;
        let batch = p.sample(n, 42).unwrap();
        let mut mean = vec![0.0; d];
        for row in batch.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n as f64;
        }
        let tol = 3.0 * 10f64.powf(-2.5) * (d as f64).sqrt();
        assert!(norm_sq(&mean).sqrt() < tol, "mean {mean:?}");
        let v = empirical_v(&batch);
        assert!((v - d as f64).abs() / (d as f64) < 0.02, "V = {v}");
    }

    #[test]
    fn uniform_ball_second_moment() {
        let p = potential(PotentialSpec::UniformBall {
            radius: 1.0,
            dim: 2,
        });
        let batch = p.sample(100_000, 7).unwrap();
        let v = empirical_v(&batch);
        assert!((v - 0.5).abs() / 0.5 < 0.02, "V = {v}");
        assert!(batch.rows().all(|r| norm_sq(r) <= 1.0 + 1e-12));
    }

    #[test]
    fn student_second_moment() {
        let p = potential(PotentialSpec::Student {
            alpha: 3.0,
            sigma: 1.0,
            dim: 1,
        });
        let batch = p.sample(100_000, 2).unwrap();
        let v = empirical_v(&batch);
        assert!((v - 3.0).abs() / 3.0 < 0.05, "V = {v}");
    }

    #[test]
    fn subbotin_matches_quadrature_moment() {
        let p = potential(PotentialSpec::Subbotin { alpha: 1.0, dim: 2 });
        let exact = p.moments().unwrap().second_moment;
        let batch = p.sample(100_000, 11).unwrap();
        let v = empirical_v(&batch);
        assert!((v - exact).abs() / exact < 0.03, "V = {v} vs exact {exact}");
    }

    #[test]
    fn mixture_mean_matches() {
        let p = potential(PotentialSpec::GaussianMixture {
            weights: vec![0.25, 0.75],
            means: vec![vec![-2.0], vec![2.0]],
            variance: 0.5,
            dim: 1,
        });
        let batch = p.sample(100_000, 5).unwrap();
        let mean: f64 = batch.rows().map(|r| r[0]).sum::<f64>() / batch.len() as f64;
        assert!((mean - 1.0).abs() < 0.03, "mean = {mean}");
    }

    #[test]
    fn compact_convolution_second_moment() {
        let p = potential(PotentialSpec::CompactGaussianConvolution {
            radius: 0.5,
            tau2: 1.0,
            dim: 2,
        });
        let batch = p.sample(100_000, 9).unwrap();
        // Exact V for the uniform-ball factor: d R^2/(d+2) + tau^2 d.
        let exact = 2.0 * 0.25 / 4.0 + 2.0;
        let v = empirical_v(&batch);
        assert!((v - exact).abs() / exact < 0.02, "V = {v}");
        // Reported bound dominates the truth.
        assert!(p.moments().unwrap().second_moment >= exact);
    }

    #[test]
    fn bit_reproducible() {
        let p = potential(PotentialSpec::Subbotin { alpha: 1.5, dim: 3 });
        let a = p.sample(500, 123).unwrap();
        let b = p.sample(500, 123).unwrap();
        assert_eq!(a, b);
        let c = p.sample(500, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_draws_rejected() {
        let p = potential(PotentialSpec::Gaussian {
            variance: 1.0,
            dim: 1,
        });
        assert!(p.sample(0, 1).is_err());
    }
}
