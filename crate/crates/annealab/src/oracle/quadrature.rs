//! Adaptive Simpson quadrature with error estimates.
//!
//! Standard bisection scheme: a panel is accepted when the two-half Simpson
//! value agrees with the single-panel value to the panel's share of the
//! absolute tolerance, and the accepted value gets the usual `eps / 15`
//! Richardson correction.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuadConfig {
    /// Absolute tolerance on the integral.
    pub abs_tol: f64,
    /// Hard cap on the number of accepted panels.
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            max_panels: 40_000,
        }
    }
}

/// Integral value with the accumulated error estimate from the final
/// bisection level of each panel.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson on `[a, b]`.
///
/// `breakpoints` are forced panel boundaries (schedule kinks, support edges);
/// they must lie inside `(a, b)`.
pub fn integrate<F>(f: F, a: f64, b: f64, breakpoints: &[f64], cfg: &QuadConfig) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "quadrature endpoints must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            panels: 0,
        });
    }

    let mut edges: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    edges.push(a);
    let mut sorted: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&t| t > a && t < b)
        .collect();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.extend(sorted);
    edges.push(b);

    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_nan() {
            return Err(Error::Domain(format!("integrand returned NaN at x = {x}")));
        }
        Ok(v)
    };

    let seg_tol = cfg.abs_tol / (edges.len() - 1) as f64;
    let mut stack: Vec<Panel> = Vec::new();
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let m = 0.5 * (lo + hi);
        let (fa, fm, fb) = (eval(lo)?, eval(m)?, eval(hi)?);
        stack.push(Panel {
            a: lo,
            fa,
            b: hi,
            fb,
            m,
            fm,
            whole: simpson(fa, fm, fb, hi - lo),
            tol: seg_tol,
        });
    }

    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = 0usize;
    while let Some(p) = stack.pop() {
        let ml = 0.5 * (p.a + p.m);
        let mr = 0.5 * (p.m + p.b);
        let (fml, fmr) = (eval(ml)?, eval(mr)?);
        let left = simpson(p.fa, fml, p.fm, p.m - p.a);
        let right = simpson(p.fm, fmr, p.fb, p.b - p.m);
        let eps = left + right - p.whole;
        // The width floor stops runaway refinement of integrable endpoint
        // singularities once the panel no longer matters.
        let width_floor = (p.b - p.a).abs() < 1e-14 * (p.b.abs() + p.a.abs() + 1.0);
        if eps.abs() <= 15.0 * p.tol || width_floor {
            value += left + right + eps / 15.0;
            error += eps.abs() / 15.0;
            panels += 1;
        } else {
            if panels + stack.len() >= cfg.max_panels {
                return Err(Error::Numerical(format!(
                    "adaptive Simpson exceeded {} panels; worst panel [{:.6e}, {:.6e}] with local error {:.3e}",
                    cfg.max_panels,
                    p.a,
                    p.b,
                    eps.abs()
                )));
            }
            let half = p.tol / 2.0;
            stack.push(Panel {
                a: p.a,
                fa: p.fa,
                b: p.m,
                fb: p.fm,
                m: ml,
                fm: fml,
                whole: left,
                tol: half,
            });
            stack.push(Panel {
                a: p.m,
                fa: p.fm,
                b: p.b,
                fb: p.fb,
                m: mr,
                fm: fmr,
                whole: right,
                tol: half,
            });
        }
    }

    Ok(Quadrature {
        value,
        error_estimate: error,
        panels,
    })
}

/// Integral of `f` over `[a, +infinity)` via the map `x = a + u / (1 - u)`,
/// `u` in `[0, 1)`. The integrand must decay fast enough for the mapped
/// integrand to vanish as `u -> 1`.
pub fn integrate_mapped_upper<F>(f: F, a: f64, cfg: &QuadConfig) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let mapped = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let denom = 1.0 - u;
        let x = a + u / denom;
        let jac = 1.0 / (denom * denom);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(mapped, 0.0, 1.0, &[], cfg)
}
