//! Score and Hessian bands plus the assembled well-posedness report.

use super::{BoundReport, HessianBand};
use crate::interpolation::InterpolationLaw;
use crate::measures::{PotentialSpec, QuasiConvexity, SmoothnessProfile};
use crate::oracle::QuadConfig;
use crate::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// Which refinement of the Poincare-based Hessian upper bound to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandStructure {
    /// `(C_W/(1-l)) (1 + d C_W C_P / (1-l))`.
    Generic,
    /// `-D_W/(1-l) + d C_W^2 C_P / (1-l)^2` (needs `hess_lower > 0`).
    StrictlyConvex,
    /// `(1/(s^2 (1-l))) (-1 + C_P / (s^2 (1-l)))` with `s^2 = 1/C_W`
    /// (needs `C_W = D_W`); dimension-free.
    Gaussian,
    /// Product-measure refinement: the strictly convex form without the
    /// dimension factor.
    Product,
}

/// Sup bound on `|grad ln p_t|` from the gradient bounds of the two sides.
///
/// `b = min((1-l)^{-1/2} M_W, l^{-1/2} M_U)` with infinity-aware branches.
/// When both `M` are finite the report also carries the uniform two-sided
/// constant `max(l^{-1/2}, (1-l)^{-1/2}) max(M_W, M_U)`; pass the schedule's
/// midpoint value `lambda_{T/2}` as `lambda` to reproduce it.
pub fn score_sup_bound(
    prof_w: &SmoothnessProfile,
    prof_u: &SmoothnessProfile,
    lambda: f64,
) -> Result<BoundReport> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda = {lambda} outside [0, 1]")));
    }
    if prof_w.grad_sup.is_infinite() && prof_u.grad_sup.is_infinite() {
        return Err(Error::Unsupported(
            "no applicable score bound: both gradient sup bounds are infinite".into(),
        ));
    }
    let mut report = BoundReport::new("score_sup");
    let w_branch = prof_w.grad_sup / (1.0 - lambda).sqrt();
    let u_branch = prof_u.grad_sup / lambda.sqrt();
    let b = w_branch.min(u_branch);
    report.trace_value("w_branch", w_branch);
    report.trace_value("u_branch", u_branch);
    report.set("bound", b);
    report.assume("some_branch_finite", b.is_finite(), b);
    if prof_w.grad_sup.is_finite() && prof_u.grad_sup.is_finite() {
        let uniform = (1.0 / lambda.sqrt()).max(1.0 / (1.0 - lambda).sqrt())
            * prof_w.grad_sup.max(prof_u.grad_sup);
        report.set("uniform_bound", uniform);
    }
    report.validity = if b.is_finite() {
        Some((lambda, lambda))
    } else {
        None
    };
    Ok(report)
}

/// Two-sided band for `hess ln p_t` at a fixed `lambda`.
///
/// Collects every branch the supplied constants admit (bounded-gradient
/// branches from either side, plus the Poincare branch with the requested
/// structure refinement when `cond_poincare` is given) and intersects them.
pub fn hessian_band(
    prof_w: &SmoothnessProfile,
    prof_u: Option<&SmoothnessProfile>,
    lambda: f64,
    cond_poincare: Option<f64>,
    structure: BandStructure,
    dim: usize,
) -> Result<HessianBand> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda = {lambda} outside [0, 1]")));
    }
    let c_w = prof_w.hess_upper.ok_or_else(|| {
        Error::Precondition("hessian_band needs hess_upper (C_W) of the base profile".into())
    })?;

    let mut lowers: Vec<f64> = Vec::new();
    let mut uppers: Vec<f64> = Vec::new();
    let rem = 1.0 - lambda;

    if rem > 0.0 {
        lowers.push(-c_w / rem);
        if prof_w.grad_sup.is_finite() {
            uppers.push((c_w + prof_w.grad_sup * prof_w.grad_sup) / rem);
        }
        if let Some(cp) = cond_poincare {
            if cp < 0.0 {
                return Err(Error::Domain("conditional Poincare constant must be nonnegative".into()));
            }
            let d = dim as f64;
            let upper = match structure {
                BandStructure::Generic => c_w / rem * (1.0 + d * c_w * cp / rem),
                BandStructure::StrictlyConvex => {
                    let d_w = prof_w.hess_lower.ok_or_else(|| {
                        Error::Precondition(
                            "strictly convex band needs hess_lower (D_W) of the base profile".into(),
                        )
                    })?;
                    -d_w / rem + d * c_w * c_w * cp / (rem * rem)
                }
                BandStructure::Gaussian => {
                    let d_w = prof_w.hess_lower.unwrap_or(f64::NAN);
                    if !((d_w - c_w).abs() <= 1e-12 * (1.0 + c_w.abs())) {
                        return Err(Error::Precondition(
                            "gaussian band structure needs C_W = D_W".into(),
                        ));
                    }
                    let s2 = 1.0 / c_w;
                    1.0 / (s2 * rem) * (-1.0 + cp / (s2 * rem))
                }
                BandStructure::Product => {
                    let d_w = prof_w.hess_lower.ok_or_else(|| {
                        Error::Precondition(
                            "product band structure needs hess_lower (D_W) of the base profile".into(),
                        )
                    })?;
                    -d_w / rem + c_w * c_w * cp / (rem * rem)
                }
            };
            uppers.push(upper);
        }
    }

    if let Some(pu) = prof_u {
        if lambda > 0.0 {
            if let Some(c_u) = pu.hess_upper {
                lowers.push(-c_u / lambda);
                if pu.grad_sup.is_finite() {
                    uppers.push((c_u + pu.grad_sup * pu.grad_sup) / lambda);
                }
            }
        }
    }

    let lower = lowers.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let upper = uppers.iter().cloned().fold(f64::INFINITY, f64::min);
    if lowers.is_empty() || uppers.is_empty() || !(lower.is_finite() && upper.is_finite()) {
        return Err(Error::Precondition(
            "hessian_band has no finite branch; need a finite grad_sup (M) or a conditional Poincare constant"
                .into(),
        ));
    }
    if lower > upper {
        return Err(Error::Precondition(format!(
            "inconsistent band constants produced lower {lower} > upper {upper}"
        )));
    }
    Ok(HessianBand::assemble(lower, upper, dim))
}

/// Exact-order band for a gaussian base against a compactly supported
/// target (optionally convolved with gaussian noise):
/// with `alpha^2 = sigma^2 (1-l) + tau^2 l`, the band is
/// `[-1/alpha^2, -(alpha^2 - l R^2)/alpha^4]`.
pub fn gaussian_compact_band(
    sigma2: f64,
    tau2: f64,
    radius: f64,
    lambda: f64,
    dim: usize,
) -> Result<HessianBand> {
    if !(sigma2 > 0.0) || tau2 < 0.0 || radius < 0.0 {
        return Err(Error::Domain(
            "gaussian_compact_band needs sigma2 > 0, tau2 >= 0, radius >= 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda = {lambda} outside [0, 1]")));
    }
    let alpha2 = sigma2 * (1.0 - lambda) + tau2 * lambda;
    let lower = -1.0 / alpha2;
    let upper = -(alpha2 - lambda * radius * radius) / (alpha2 * alpha2);
    Ok(HessianBand::assemble(lower, upper.max(lower), dim))
}

/// Quantitative linear-growth constant for a convex potential:
/// `R_W = d Gamma((d+1)/2) e^{|W(0)| + M} / pi^{(d-1)/2}` with
/// `M = sup_{|y| <= 1} |grad W|` certifies
/// `<x, grad W(x)> >= alpha |x|` for `|x| >= R_W + 1`, `alpha = M/(1+R_W)`.
pub fn quantitative_convex_linear_growth(
    grad_sup_unit_ball: f64,
    w0_abs: f64,
    dim: usize,
) -> Result<QuasiConvexity> {
    if !(grad_sup_unit_ball > 0.0) || w0_abs < 0.0 || dim == 0 {
        return Err(Error::Domain(
            "needs M > 0, |W(0)| >= 0 and a positive dimension".into(),
        ));
    }
    let d = dim as f64;
    let log_r = d.ln() + ln_gamma(0.5 * (d + 1.0)) + w0_abs + grad_sup_unit_ball
        - 0.5 * (d - 1.0) * std::f64::consts::PI.ln();
    let r_w = log_r.exp();
    Ok(QuasiConvexity {
        alpha: grad_sup_unit_ball / (1.0 + r_w),
        beta: 1.0,
        radius: r_w + 1.0,
    })
}

/// Assembles the well-posedness constants of the annealed dynamics for one
/// configuration: `a(eps)` / `b(eps)` sups over `t <= T - eps`, the action
/// integrals, the KL bias bound `kappa/4 * action`, the bounded-Lipschitz
/// distance bound, the endpoint Wasserstein bounds, and Pinsker's
/// `d_TV <= sqrt(2 d_KL)`.
///
/// Both KL conventions are reported: `kl_bias_quarter` comes from the
/// optimally balanced Girsanov control and is the headline `bound`;
/// `kl_bias_half` is the unit-balance Gronwall constant that the
/// log-Sobolev route reduces to when no LSI is available.
pub fn wellposedness_report(
    law: &InterpolationLaw,
    kappa: f64,
    eps_grid: &[f64],
) -> Result<BoundReport> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!("kappa = {kappa} outside (0, 1)")));
    }
    let mut report = BoundReport::new("wellposedness");
    let dim = law.dim();
    let horizon = law.schedule().horizon();
    let m_pi = law.target().moments()?;
    let m_nu = law.base().moments()?;

    // Band machinery per configuration: exact gaussian-compact band when the
    // arrangement admits it, profile bands otherwise.
    let band_at = |lambda: f64| -> Option<HessianBand> {
        match (law.target().spec(), law.base().spec()) {
            (
                PotentialSpec::Gaussian { variance: tau2, .. },
                PotentialSpec::Gaussian { variance: sigma2, .. },
            ) => gaussian_compact_band(*sigma2, *tau2, 0.0, lambda, dim).ok(),
            (
                PotentialSpec::CompactGaussianConvolution { radius, tau2, .. },
                PotentialSpec::Gaussian { variance: sigma2, .. },
            ) => gaussian_compact_band(*sigma2, *tau2, *radius, lambda, dim).ok(),
            (
                PotentialSpec::UniformBall { radius, .. },
                PotentialSpec::Gaussian { variance: sigma2, .. },
            ) => gaussian_compact_band(*sigma2, 0.0, *radius, lambda, dim).ok(),
            _ => {
                let pw = law.base().closed_form_profile().ok()?;
                let pu = law.target().closed_form_profile().ok();
                hessian_band(&pw, pu.as_ref(), lambda, None, BandStructure::Generic, dim).ok()
            }
        }
    };
    let score_bound_at = |lambda: f64| -> Option<f64> {
        let pw = law.base().closed_form_profile().ok()?;
        let pu = law.target().closed_form_profile().ok()?;
        score_sup_bound(&pw, &pu, lambda).ok().and_then(|r| r.bound())
    };

    let mut worst_a: f64 = 0.0;
    let mut worst_b: f64 = 0.0;
    for &eps in eps_grid {
        if !(eps >= 0.0 && eps < horizon) {
            return Err(Error::Domain(format!(
                "epsilon = {eps} outside [0, T = {horizon})"
            )));
        }
        let mut a_eps: f64 = 0.0;
        let mut b_eps: f64 = 0.0;
        let steps = 200;
        for k in 0..=steps {
            let t = (horizon - eps) * k as f64 / steps as f64;
            let (lam, _) = law.schedule().lambda(t)?;
            a_eps = match band_at(lam) {
                Some(band) => a_eps.max((dim as f64).sqrt() * band.lower.abs().max(band.upper.abs())),
                None => f64::INFINITY,
            };
            b_eps = match score_bound_at(lam) {
                Some(b) => b_eps.max(b),
                None => f64::INFINITY,
            };
        }
        report.trace_value(&format!("a(eps={eps})"), a_eps);
        report.trace_value(&format!("b(eps={eps})"), b_eps);
        worst_a = worst_a.max(a_eps);
        worst_b = worst_b.max(b_eps);
    }
    let hessian_ok = worst_a.is_finite();
    let score_ok = worst_b.is_finite();
    report.assume("hessian_bound_1i", hessian_ok, worst_a);
    report.assume("score_bound_1ii", score_ok, worst_b);
    report.assume(
        "either_1i_or_1ii",
        hessian_ok || score_ok,
        worst_a.min(worst_b),
    );

    let action = law
        .schedule()
        .action_integrals(&m_pi, &m_nu, &QuadConfig::default())?;
    report.assume("finite_action_2", action.action_bound.is_finite(), action.action_bound);
    report.set("a0", action.a0);
    report.set("a1", action.a1);
    report.set("action_bound", action.action_bound);

    // KL bias of the score-only dynamics; both constant conventions exposed.
    let kl_quarter = 0.25 * kappa * action.action_bound;
    let kl_half = 0.5 * kappa * action.action_bound;
    report.set("kl_bias_quarter", kl_quarter);
    report.set("kl_bias_half", kl_half);
    report.set("bound", kl_quarter);
    report.set("tv_bound", (2.0 * kl_quarter).sqrt());

    let (lam0, lam_t) = law.schedule().endpoints();
    let bl = (1.0 - lam_t.sqrt()) * m_pi.mean_abs
        + (1.0 - lam_t).sqrt() * m_nu.mean_abs
        + (0.5 * kappa * action.action_bound).sqrt();
    report.set("bl_bound", bl);

    // Endpoint Wasserstein bounds; the factor 2 drops when a measure is
    // centered.
    let centered = m_pi.mean.iter().all(|&m| m == 0.0) || m_nu.mean.iter().all(|&m| m == 0.0);
    let c2 = if centered { 1.0 } else { 2.0 };
    report.set(
        "w1_target_endpoint",
        (1.0 - lam_t.sqrt()) * m_pi.mean_abs + (1.0 - lam_t).sqrt() * m_nu.mean_abs,
    );
    report.set(
        "w2sq_target_endpoint",
        c2 * ((1.0 - lam_t.sqrt()) * (1.0 - lam_t.sqrt()) * m_pi.second_moment
            + (1.0 - lam_t) * m_nu.second_moment),
    );
    report.set(
        "w1_base_endpoint",
        lam0.sqrt() * m_pi.mean_abs + (1.0 - (1.0 - lam0).sqrt()) * m_nu.mean_abs,
    );
    report.set(
        "w2sq_base_endpoint",
        c2 * (lam0 * m_pi.second_moment
            + (1.0 - (1.0 - lam0).sqrt()) * (1.0 - (1.0 - lam0).sqrt()) * m_nu.second_moment),
    );

    report.validity = Some((lam0, lam_t));
    Ok(report)
}
