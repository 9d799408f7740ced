//! Distances, divergence estimators, and bias-scaling studies.
//!
//! KL between sample clouds is always estimated through gaussian moment
//! fits at desk scale ("gaussianized KL", exact only for gaussian
//! configurations); every report labels the proxy. The 1D exact W2 comes
//! from the quantile coupling of sorted samples.

use crate::bounds;
use crate::interpolation::{InterpolationLaw, SnisConfig};
use crate::linalg::sym_sqrt;
use crate::measures::PointBatch;
use crate::sampler::{run_annealed, SdeRun};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::erf::erf_inv;

/// Closed-form gaussian KL and squared Bures-Wasserstein distance.
///
/// `KL(N(m1, S1) || N(m2, S2))
///   = (tr(S2^{-1} S1) + <m2-m1, S2^{-1}(m2-m1)> - d + ln det S2 - ln det S1)/2`,
/// `W2^2 = |m1-m2|^2 + tr(S1) + tr(S2) - 2 tr((S2^{1/2} S1 S2^{1/2})^{1/2})`.
pub fn gaussian_divergences(
    mean1: &[f64],
    cov1: &[Vec<f64>],
    mean2: &[f64],
    cov2: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let d = mean1.len();
    if mean2.len() != d || cov1.len() != d || cov2.len() != d {
        return Err(Error::Domain("dimension mismatch in gaussian divergence".into()));
    }
    let s1 = DMatrix::from_fn(d, d, |i, j| 0.5 * (cov1[i][j] + cov1[j][i]));
    let s2 = DMatrix::from_fn(d, d, |i, j| 0.5 * (cov2[i][j] + cov2[j][i]));
    let chol1 = s1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("first covariance is not positive definite".into()))?;
    let chol2 = s2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("second covariance is not positive definite".into()))?;
    let ln_det = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| -> f64 {
        2.0 * (0..d).map(|i| c.l_dirty()[(i, i)].ln()).sum::<f64>()
    };
    let diff = DVector::from_iterator(d, mean2.iter().zip(mean1).map(|(a, b)| a - b));
    let solved = chol2.solve(&s1);
    let kl = 0.5
        * (solved.trace() + diff.dot(&chol2.solve(&diff)) - d as f64
            + ln_det(&chol2)
            - ln_det(&chol1));

    let root2 = sym_sqrt(&s2);
    let inner = &root2 * &s1 * &root2;
    let cross = sym_sqrt(&inner).trace();
    let mean_gap: f64 = diff.iter().map(|v| v * v).sum();
    let w2sq = mean_gap + s1.trace() + s2.trace() - 2.0 * cross;
    Ok((kl.max(0.0), w2sq.max(0.0)))
}

/// What a sample batch is compared against.
pub enum Reference<'a> {
    Gaussian {
        mean: Vec<f64>,
        cov: Vec<Vec<f64>>,
    },
    Samples(&'a PointBatch),
}

/// Moment comparison against a reference with gaussianized divergences.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub sample_mean: Vec<f64>,
    pub sample_cov: Vec<Vec<f64>>,
    pub reference_mean: Vec<f64>,
    pub reference_cov: Vec<Vec<f64>>,
    /// `KL(reference || fitted gaussian)`; a proxy outside gaussian cases.
    pub gaussianized_kl: Option<f64>,
    pub gaussianized_kl_se: Option<f64>,
    /// Bures-Wasserstein distance between the fitted gaussians (not squared).
    pub gaussian_w2: Option<f64>,
    /// Quantile-coupling W2 (d = 1 only).
    pub w2_exact_1d: Option<f64>,
    /// Pinsker: `d_TV <= sqrt(2 KL)` from the gaussianized proxy.
    pub tv_pinsker_bound: Option<f64>,
    /// Standard error of each mean coordinate.
    pub mean_se: Vec<f64>,
    pub kl_is_proxy: bool,
    pub flags: Vec<String>,
}

fn fit_moments(batch: &PointBatch) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = batch.len() as f64;
    let d = batch.dim;
    let mut mean = vec![0.0; d];
    for row in batch.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for row in batch.rows() {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]) / n;
            }
        }
    }
    (mean, cov)
}

/// Compares a sample batch against an exact law or a second sample set.
pub fn empirical_report(samples: &PointBatch, reference: &Reference) -> Result<DiagnosticsReport> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::Precondition(format!(
            "empirical report needs at least 100 samples, got {n}"
        )));
    }
    let d = samples.dim;
    let (mean, cov) = fit_moments(samples);
    let (ref_mean, ref_cov, ref_batch): (Vec<f64>, Vec<Vec<f64>>, Option<&PointBatch>) =
        match reference {
            Reference::Gaussian { mean, cov } => (mean.clone(), cov.clone(), None),
            Reference::Samples(batch) => {
                if batch.dim != d {
                    return Err(Error::Domain("reference dimension mismatch".into()));
                }
                let (m, c) = fit_moments(batch);
                (m, c, Some(batch))
            }
        };

    let mut flags = vec!["gaussianized KL is a moment-fit proxy".to_string()];
    let mean_se: Vec<f64> = (0..d).map(|i| (cov[i][i] / n as f64).sqrt()).collect();

    let divergences = gaussian_divergences(&ref_mean, &ref_cov, &mean, &cov);
    let (kl, w2) = match divergences {
        Ok((kl, w2sq)) => (Some(kl), Some(w2sq.sqrt())),
        Err(_) => {
            flags.push("degenerate sample covariance; divergences skipped".to_string());
            (None, None)
        }
    };

    // Jackknife SE of the gaussianized KL over 32 contiguous blocks.
    let kl_se = kl.and_then(|_| {
        let blocks = 32.min(n);
        let mut estimates = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let mut sub = PointBatch::zeros(0, d);
            sub.data.clear();
            for i in 0..n {
                if i * blocks / n != b {
                    sub.data.extend_from_slice(samples.row(i));
                }
            }
            let (m, c) = fit_moments(&sub);
            match gaussian_divergences(&ref_mean, &ref_cov, &m, &c) {
                Ok((v, _)) => estimates.push(v),
                Err(_) => return None,
            }
        }
        let b = estimates.len() as f64;
        let avg = estimates.iter().sum::<f64>() / b;
        let var = estimates.iter().map(|v| (v - avg) * (v - avg)).sum::<f64>() * (b - 1.0) / b;
        Some(var.sqrt())
    });

    // Exact 1D W2 by quantile coupling.
    let w2_exact_1d = if d == 1 {
        let mut xs: Vec<f64> = samples.rows().map(|r| r[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let value = match ref_batch {
            Some(batch) => {
                let mut ys: Vec<f64> = batch.rows().map(|r| r[0]).collect();
                ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if ys.len() == xs.len() {
                    Some(
                        (xs.iter()
                            .zip(&ys)
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>()
                            / xs.len() as f64)
                            .sqrt(),
                    )
                } else {
                    flags.push("1D W2 needs equal sample sizes".to_string());
                    None
                }
            }
            None => {
                // Gaussian reference quantiles at (i - 1/2)/n.
                let (mu, sd) = (ref_mean[0], ref_cov[0][0].sqrt());
                Some(
                    (xs.iter()
                        .enumerate()
                        .map(|(i, x)| {
                            let p = (i as f64 + 0.5) / xs.len() as f64;
                            let q = mu
                                + sd * std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0);
                            (x - q) * (x - q)
                        })
                        .sum::<f64>()
                        / xs.len() as f64)
                        .sqrt(),
                )
            }
        };
        value
    } else {
        None
    };

    Ok(DiagnosticsReport {
        sample_mean: mean,
        sample_cov: cov,
        reference_mean: ref_mean,
        reference_cov: ref_cov,
        gaussianized_kl: kl,
        gaussianized_kl_se: kl_se,
        gaussian_w2: w2,
        w2_exact_1d,
        tv_pinsker_bound: kl.map(|k| (2.0 * k).sqrt()),
        mean_se,
        kl_is_proxy: true,
        flags,
    })
}

/// One row of a bias-scaling study.
#[derive(Debug, Clone, Serialize)]
pub struct BiasStudyRow {
    pub kappa: f64,
    pub steps: usize,
    /// Gaussianized KL of the terminal batch against the exact terminal law.
    pub raw_bias: f64,
    /// Same at halved step size.
    pub refined_bias: f64,
    /// h-refinement floor `|raw - refined|`.
    pub floor: f64,
    /// `max(raw - floor, 0)`.
    pub floor_adjusted: f64,
    /// `(kappa/4) * action bound`.
    pub bound_thm_annealed: f64,
    /// Proposition-level LSI bound when configured.
    pub bound_lsi: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasStudy {
    pub rows: Vec<BiasStudyRow>,
    /// Least-squares slope of `ln(floor-adjusted bias)` against `ln kappa`.
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Per-kappa run shape of a study.
#[derive(Debug, Clone)]
pub struct StudyTemplate {
    pub chains: usize,
    pub seed: u64,
    /// `N(kappa) = ceil(step_budget / kappa^2)`, so `h = T kappa / step_budget`.
    pub step_budget: f64,
    /// Terminal clip; `None` integrates to T exactly.
    pub eps_end: Option<f64>,
    pub score: SnisConfig,
    /// Attach the convolved-target LSI bound to each row.
    pub lsi_bound: Option<bounds::LsiCase>,
}

/// Runs the annealed dynamics per kappa (at h and h/2), measures the
/// gaussianized KL against the exact terminal law, and fits the log-log
/// slope of the floor-adjusted bias.
pub fn bias_scaling_study(
    law: &InterpolationLaw,
    kappa_list: &[f64],
    template: &StudyTemplate,
) -> Result<BiasStudy> {
    if kappa_list.len() < 3 {
        return Err(Error::Study(format!(
            "need at least 3 kappa values, got {}",
            kappa_list.len()
        )));
    }
    for &k in kappa_list {
        if !(k > 0.0 && k < 0.5) {
            return Err(Error::Domain(format!(
                "kappa must lie in (0, 1/2) for study mode, got {k}"
            )));
        }
    }
    let (_, lam_t) = law.schedule().endpoints();
    // Exact terminal reference: moments of the lambda_T-interpolant.
    let cov_pi = law.target().exact_covariance()?;
    let cov_nu = law.base().exact_covariance()?;
    let d = law.dim();
    let mean_pi = law.target().moments()?.mean;
    let mean_nu = law.base().moments()?.mean;
    let ref_mean: Vec<f64> = (0..d)
        .map(|j| lam_t.sqrt() * mean_pi[j] + (1.0 - lam_t).sqrt() * mean_nu[j])
        .collect();
    let ref_cov: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| lam_t * cov_pi[i][j] + (1.0 - lam_t) * cov_nu[i][j])
                .collect()
        })
        .collect();

    let action = law.schedule().action_integrals(
        &law.target().moments()?,
        &law.base().moments()?,
        &crate::oracle::QuadConfig::default(),
    )?;

    let bias_at = |kappa: f64, steps: usize| -> Result<f64> {
        let run = SdeRun {
            law: law.clone(),
            kappa,
            steps,
            chains: template.chains,
            seed: template.seed,
            eps_end: template.eps_end,
            snapshot_times: vec![],
            score: template.score.clone(),
        };
        let out = run_annealed(&run)?;
        let (m, c) = fit_moments(&out.terminal);
        Ok(gaussian_divergences(&ref_mean, &ref_cov, &m, &c)?.0)
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &kappa in kappa_list {
        let steps = (template.step_budget / (kappa * kappa)).ceil() as usize;
        let result = bias_at(kappa, steps).and_then(|raw| {
            let refined = bias_at(kappa, 2 * steps)?;
            Ok((raw, refined))
        });
        match result {
            Ok((raw, refined)) => {
                let floor = (raw - refined).abs();
                let bound_lsi = template.lsi_bound.map(|case| {
                    let scaled = match case {
                        bounds::LsiCase::Plateau {
                            alpha,
                            radius,
                            horizon,
                            dim,
                            ..
                        } => bounds::LsiCase::Plateau {
                            kappa,
                            alpha,
                            radius,
                            horizon,
                            dim,
                        },
                        bounds::LsiCase::Convolved {
                            sigma2,
                            tau2,
                            radius,
                            horizon,
                            dim,
                            ..
                        } => bounds::LsiCase::Convolved {
                            kappa,
                            sigma2,
                            tau2,
                            radius,
                            horizon,
                            dim,
                        },
                    };
                    bounds::lsi_proposition_bounds(scaled)
                        .ok()
                        .and_then(|r| r.bound())
                        .unwrap_or(f64::NAN)
                });
                rows.push(BiasStudyRow {
                    kappa,
                    steps,
                    raw_bias: raw,
                    refined_bias: refined,
                    floor,
                    floor_adjusted: (raw - floor).max(0.0),
                    bound_thm_annealed: 0.25 * kappa * action.action_bound,
                    bound_lsi,
                });
            }
            Err(e) => failures.push(format!("kappa = {kappa}: {e}")),
        }
    }
    if rows.len() < 3 {
        return Err(Error::Study(format!(
            "fewer than 3 successful kappa runs ({} ok); failures: {}",
            rows.len(),
            failures.join("; ")
        )));
    }
    // Least squares on (ln kappa, ln floor-adjusted bias).
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.kappa.ln(), r.floor_adjusted.max(1e-300).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let residuals = pts
        .iter()
        .map(|p| p.1 - (intercept + slope * p.0))
        .collect();

    Ok(BiasStudy {
        rows,
        slope,
        intercept,
        residuals,
    })
}
