//! Self-normalized importance sampling with jackknife standard errors.
//!
//! Every estimator here is a ratio of linear particle sums, so standard
//! errors come from a delete-one-block jackknife over the accumulated sums:
//! leave-one-block-out estimates are recomputed from `total - block` and the
//! spread of those estimates gives the error.

use crate::{Error, Result};

/// Which of the three equivalent Hessian expressions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianForm {
    /// `(1-l)^{-1} (-E[hess W] + Cov[grad W])` on the conditional.
    #[default]
    WForm,
    /// `l^{-1} (-E[hess U] + Cov[grad U])`.
    UForm,
    /// `(l (1-l))^{-1/2} Cov[grad W, grad U]`.
    Mixed,
}

/// Configuration of the SNIS evaluators.
#[derive(Debug, Clone)]
pub struct SnisConfig {
    /// Particle count per evaluation.
    pub particles: usize,
    /// Base seed; batch paths derive sub-streams from it.
    pub seed: u64,
    /// Degenerate-weights threshold as a fraction of the particle count.
    pub ess_threshold: f64,
    /// Jackknife block count.
    pub blocks: usize,
    /// Use the swapped conditional representation (proposal from the base).
    pub swap_proposal: bool,
    pub hessian_form: HessianForm,
    /// Also evaluate a second Hessian form and report the discrepancy.
    pub cross_check: bool,
}

impl Default for SnisConfig {
    fn default() -> Self {
        SnisConfig {
            particles: 4096,
            seed: 0,
            ess_threshold: 0.05,
            blocks: 32,
            swap_proposal: false,
            hessian_form: HessianForm::default(),
            cross_check: false,
        }
    }
}

/// Normalized weights with the effective sample size `1 / sum w_i^2`.
#[derive(Debug)]
pub(crate) struct NormalizedWeights {
    pub weights: Vec<f64>,
    pub ess: f64,
}

/// Exponentiates log-weights against their maximum and normalizes; errors
/// out when the effective sample size falls below `threshold`.
pub(crate) fn normalize_log_weights(
    log_weights: &[f64],
    threshold: f64,
) -> Result<NormalizedWeights> {
    let n = log_weights.len();
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical(
            "all SNIS log-weights are -inf or NaN".into(),
        ));
    }
    let mut weights: Vec<f64> = log_weights.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    if ess < threshold {
        return Err(Error::DegenerateWeights {
            ess,
            n,
            threshold,
        });
    }
    Ok(NormalizedWeights { weights, ess })
}

/// Per-block linear sums of particle statistics. Layout: slot 0 is the
/// weight sum, the rest are caller-defined weighted sums.
pub(crate) struct BlockSums {
    pub blocks: Vec<Vec<f64>>,
    pub total: Vec<f64>,
}

impl BlockSums {
    /// Accumulates `width`-wide statistics over `n` particles split into
    /// `blocks` contiguous blocks. `fill` writes slot values for particle
    /// `i` into the scratch row (slot 0 must be the unnormalized weight).
    pub fn accumulate<F>(n: usize, width: usize, blocks: usize, mut fill: F) -> Self
    where
        F: FnMut(usize, &mut [f64]),
    {
        let b = blocks.clamp(1, n);
        let mut sums = BlockSums {
            blocks: vec![vec![0.0; width]; b],
            total: vec![0.0; width],
        };
        let mut row = vec![0.0; width];
        for i in 0..n {
            row.fill(0.0);
            fill(i, &mut row);
            let blk = i * b / n;
            for (s, v) in sums.blocks[blk].iter_mut().zip(&row) {
                *s += *v;
            }
            for (s, v) in sums.total.iter_mut().zip(&row) {
                *s += *v;
            }
        }
        sums
    }

    /// Full-sample estimate plus delete-one-block jackknife standard errors.
    pub fn jackknife<F>(&self, finish: F) -> (Vec<f64>, Vec<f64>)
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let theta = finish(&self.total);
        let b = self.blocks.len();
        if b < 2 {
            return (theta.clone(), vec![0.0; theta.len()]);
        }
        let mut loo = Vec::with_capacity(b);
        let mut scratch = vec![0.0; self.total.len()];
        for blk in &self.blocks {
            for ((s, t), v) in scratch.iter_mut().zip(&self.total).zip(blk) {
                *s = t - v;
            }
            loo.push(finish(&scratch));
        }
        let m = theta.len();
        let mut mean = vec![0.0; m];
        for est in &loo {
            for (mu, v) in mean.iter_mut().zip(est) {
                *mu += v / b as f64;
            }
        }
        let mut se = vec![0.0; m];
        for est in &loo {
            for ((s, v), mu) in se.iter_mut().zip(est).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let scale = (b as f64 - 1.0) / b as f64;
        for s in se.iter_mut() {
            *s = (*s * scale).sqrt();
        }
        (theta, se)
    }
}
