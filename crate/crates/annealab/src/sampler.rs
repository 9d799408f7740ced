//! Euler-Maruyama integration of the annealed Langevin dynamics
//!
//! ```text
//! Y_{k+1} = Y_k + h grad ln p_hat_{t_k}(Y_k) + sqrt(2h) G_k,
//! Y_0 ~ law of the lambda_0-interpolant,
//! ```
//!
//! on the hat-time range `[0, (T - eps_end)/kappa]` with step `h = T/(kappa N)`.
//! When the schedule reaches `lambda_T = 1` the score may blow up at the
//! terminal time, so integration stops `eps_end` before it (default: one
//! original-time step `h kappa`).
//!
//! Chains are independent; each `(chain, step)` derives its own noise and
//! SNIS sub-streams, so runs are bit-identical for a fixed configuration and
//! seed regardless of thread count.

use crate::interpolation::{InterpolationLaw, ScoreContext, SnisConfig};
use crate::measures::{PointBatch, Potential, PotentialSpec};
use crate::rng::{substream, Domain};
use crate::{Error, Result};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Hard cap on |Y| before a chain is declared divergent.
const DIVERGENCE_RADIUS: f64 = 1e6;

/// One SDE configuration.
#[derive(Debug, Clone)]
pub struct SdeRun {
    pub law: InterpolationLaw,
    /// Time-change parameter in (0, 1).
    pub kappa: f64,
    /// Nominal step count N; the step size is `T/(kappa N)`.
    pub steps: usize,
    /// Number of independent chains.
    pub chains: usize,
    pub seed: u64,
    /// Terminal clip in original time; `None` uses `h kappa = T/N`.
    pub eps_end: Option<f64>,
    /// Hat-times at which to record full-state snapshots.
    pub snapshot_times: Vec<f64>,
    /// Configuration of SNIS score evaluations along the trajectory.
    pub score: SnisConfig,
}

/// Aggregate SNIS diagnostics across all score evaluations of a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct EssStats {
    pub min: f64,
    pub mean: f64,
    pub evaluations: usize,
}

/// Output of one SDE run.
#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    /// Terminal states, chains x dim.
    pub terminal: PointBatch,
    /// `(hat_time, step_index, states)` at the requested snapshot times.
    pub snapshots: Vec<(f64, usize, PointBatch)>,
    /// SNIS effective-sample-size statistics; `None` for closed-form runs.
    pub ess: Option<EssStats>,
    /// Worst ESS seen by each chain across its score evaluations.
    pub chain_min_ess: Option<Vec<f64>>,
    pub steps_taken: usize,
    pub step_size: f64,
}

impl SdeRun {
    fn validate(&self) -> Result<(f64, usize)> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Domain(format!(
                "kappa must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        if self.steps == 0 || self.chains == 0 {
            return Err(Error::Domain("steps and chains must be positive".into()));
        }
        let horizon = self.law.schedule().horizon();
        let h = horizon / (self.kappa * self.steps as f64);
        let eps = self.eps_end.unwrap_or(h * self.kappa);
        if !(eps >= 0.0 && eps < horizon) {
            return Err(Error::Domain(format!(
                "eps_end = {eps} outside [0, T = {horizon})"
            )));
        }
        let steps_taken = ((horizon - eps) / (self.kappa * h) + 1e-9).floor() as usize;
        if steps_taken == 0 {
            return Err(Error::Domain(
                "terminal clip leaves no integration steps".into(),
            ));
        }
        Ok((h, steps_taken))
    }
}

/// Runs the annealed dynamics; deterministic per `(configuration, seed)`.
pub fn run_annealed(run: &SdeRun) -> Result<TrajectoryBatch> {
    let (h, steps_taken) = run.validate()?;
    let d = run.law.dim();
    let chains = run.chains;
    let (lam0, _) = run.law.schedule().lambda(0.0)?;
    let (a0, b0) = (lam0.sqrt(), (1.0 - lam0).sqrt());

    // Initial draw from the lambda_0-interpolant, per-chain sub-streams.
    let mut states = PointBatch::zeros(chains, d);
    states
        .data
        .par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(chain, row)| -> Result<()> {
            let mut rng_x = substream(run.seed, Domain::TargetDraw, chain as u64, 0);
            let mut rng_z = substream(run.seed, Domain::BaseDraw, chain as u64, 0);
            let mut x = vec![0.0; d];
            let mut z = vec![0.0; d];
            run.law.target().draw_into(&mut rng_x, &mut x)?;
            run.law.base().draw_into(&mut rng_z, &mut z)?;
            for j in 0..d {
                row[j] = a0 * x[j] + b0 * z[j];
            }
            Ok(())
        })?;

    // Map requested snapshot hat-times to step indices (state after step k).
    let mut snap_at: Vec<(usize, f64)> = run
        .snapshot_times
        .iter()
        .map(|&t_hat| {
            let k = ((t_hat / h).round() as usize).min(steps_taken);
            (k, t_hat)
        })
        .collect();
    snap_at.sort_by(|a, b| a.0.cmp(&b.0));
    let mut snapshots = Vec::new();
    for &(k, _) in &snap_at {
        if k == 0 {
            snapshots.push((0.0, 0, states.clone()));
        }
    }

    let sqrt_2h = (2.0 * h).sqrt();
    let mut ess_acc: Option<(f64, f64, usize)> = None;
    let mut chain_min: Vec<f64> = vec![f64::INFINITY; chains];
    let mut any_snis = false;
    for k in 0..steps_taken {
        let t_orig = run.kappa * (k as f64) * h;
        // Guard against roundoff pushing past the schedule horizon.
        let t_orig = t_orig.min(run.law.schedule().horizon());
        let ctx = run.law.score_context(t_orig)?;
        let step_stats: Vec<(f64, f64, usize)> = states
            .data
            .par_chunks_mut(d)
            .enumerate()
            .map(|(chain, row)| -> Result<(f64, f64, usize)> {
                let mut noise = substream(run.seed, Domain::SdeNoise, chain as u64, k as u64);
                let mut snis = substream(run.seed, Domain::SnisProposal, chain as u64, k as u64);
                let mut drift = vec![0.0; d];
                let ess = drift_into(&ctx, &run.law, row, &run.score, &mut snis, &mut drift)
                    .map_err(|e| annotate_chain(e, chain, k))?;
                let mut norm_sq = 0.0;
                for j in 0..d {
                    let g: f64 = StandardNormal.sample(&mut noise);
                    row[j] += h * drift[j] + sqrt_2h * g;
                    norm_sq += row[j] * row[j];
                }
                if !norm_sq.is_finite() || norm_sq > DIVERGENCE_RADIUS * DIVERGENCE_RADIUS {
                    return Err(Error::Divergence {
                        chain,
                        step: k,
                        magnitude: norm_sq.sqrt(),
                    });
                }
                Ok(match ess {
                    Some(e) => (e, e, 1),
                    None => (f64::INFINITY, 0.0, 0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for (chain, (mn, sum, count)) in step_stats.into_iter().enumerate() {
            if count > 0 {
                any_snis = true;
                chain_min[chain] = chain_min[chain].min(mn);
                let acc = ess_acc.get_or_insert((f64::INFINITY, 0.0, 0));
                acc.0 = acc.0.min(mn);
                acc.1 += sum;
                acc.2 += count;
            }
        }
        for &(at, t_hat) in &snap_at {
            if at == k + 1 {
                snapshots.push((t_hat, k + 1, states.clone()));
            }
        }
    }

    Ok(TrajectoryBatch {
        terminal: states,
        snapshots,
        ess: ess_acc.map(|(mn, sum, count)| EssStats {
            min: mn,
            mean: sum / count as f64,
            evaluations: count,
        }),
        chain_min_ess: any_snis.then_some(chain_min),
        steps_taken,
        step_size: h,
    })
}

fn annotate_chain(e: Error, chain: usize, step: usize) -> Error {
    match e {
        Error::DegenerateWeights { ess, n, threshold } => Error::Study(format!(
            "score estimator degenerated at chain {chain}, step {step}: ESS {ess:.1} of {n} below {threshold:.1}"
        )),
        other => other,
    }
}

/// Allocation-light drift evaluation; returns the SNIS effective sample
/// size when an estimator ran.
fn drift_into<R: rand::Rng>(
    ctx: &ScoreContext,
    law: &InterpolationLaw,
    x: &[f64],
    cfg: &SnisConfig,
    rng: &mut R,
    out: &mut [f64],
) -> Result<Option<f64>> {
    if let Some(p) = ctx.closed_marginal() {
        p.gradient_into(x, out)?;
        for v in out.iter_mut() {
            *v = -*v;
        }
        return Ok(None);
    }
    let est = ctx.score(law, x, cfg, rng)?;
    out.copy_from_slice(&est.value);
    Ok(est.ess)
}

/// Exact forward Ornstein-Uhlenbeck marginal `e^{-t} X_0 + sqrt(1-e^{-2t}) G`
/// for gaussian or gaussian-mixture targets (base N(0, I)).
#[derive(Debug, Clone)]
pub struct OuMarginal {
    pub marginal: Potential,
    pub time: f64,
}

pub fn ou_forward(target: &Potential, t: f64) -> Result<OuMarginal> {
    if t < 0.0 {
        return Err(Error::Domain(format!("OU time must be nonnegative, got {t}")));
    }
    let decay = (-t).exp();
    let noise = 1.0 - (-2.0 * t).exp();
    let spec = match target.spec() {
        PotentialSpec::Gaussian { variance, dim } => PotentialSpec::Gaussian {
            variance: variance * decay * decay + noise,
            dim: *dim,
        },
        PotentialSpec::GaussianMixture {
            weights,
            means,
            variance,
            dim,
        } => PotentialSpec::GaussianMixture {
            weights: weights.clone(),
            means: means
                .iter()
                .map(|m| m.iter().map(|v| v * decay).collect())
                .collect(),
            variance: variance * decay * decay + noise,
            dim: *dim,
        },
        other => {
            return Err(Error::Unsupported(format!(
                "OU forward marginals are closed-form for gaussian families only, got {other:?}"
            )))
        }
    };
    Ok(OuMarginal {
        marginal: Potential::from_spec(spec)?,
        time: t,
    })
}

impl OuMarginal {
    /// KL divergence of the marginal against the standard normal base;
    /// closed form for (non-mixture) gaussian targets.
    pub fn kl_vs_standard_base(&self) -> Result<f64> {
        match self.marginal.spec() {
            PotentialSpec::Gaussian { variance, dim } => {
                let v = *variance;
                Ok(0.5 * *dim as f64 * (v - 1.0 - v.ln()))
            }
            _ => Err(Error::Unsupported(
                "closed-form KL available for pure gaussian marginals only".into(),
            )),
        }
    }
}
