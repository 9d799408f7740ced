//! Central finite differences with Richardson extrapolation.
//!
//! Each estimate is computed at steps `h` and `h/2`; the extrapolated value
//! `(4 D_{h/2} - D_h) / 3` carries the disagreement `|D_{h/2} - D_h| / 3` as
//! its error estimate.

use crate::{Error, Result};

/// Vector estimate with a per-component error estimate.
#[derive(Debug, Clone)]
pub struct FdEstimate {
    pub value: Vec<f64>,
    pub error_estimate: Vec<f64>,
}

/// Symmetric-matrix estimate (row-major, dense) with a scalar error estimate.
#[derive(Debug, Clone)]
pub struct FdMatrixEstimate {
    pub value: Vec<Vec<f64>>,
    pub error_estimate: f64,
}

fn check_finite(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!(
            "finite-difference target returned {v} near {x:?}"
        )))
    }
}

fn grad_step<F>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = x.len();
    let mut g = vec![0.0; d];
    let mut xp = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + h;
        let fp = check_finite(f(&xp), x)?;
        xp[i] = x[i] - h;
        let fm = check_finite(f(&xp), x)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Richardson-extrapolated central gradient of a scalar field.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Result<FdEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    let coarse = grad_step(&f, x, h)?;
    let fine = grad_step(&f, x, h / 2.0)?;
    let d = x.len();
    let mut value = vec![0.0; d];
    let mut err = vec![0.0; d];
    for i in 0..d {
        value[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
        err[i] = (fine[i] - coarse[i]).abs() / 3.0;
    }
    Ok(FdEstimate {
        value,
        error_estimate: err,
    })
}

fn hess_step<F>(f: &F, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64,
{
    let d = x.len();
    let f0 = check_finite(f(x), x)?;
    let mut m = vec![vec![0.0; d]; d];
    let mut xp = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + h;
        let fp = check_finite(f(&xp), x)?;
        xp[i] = x[i] - h;
        let fm = check_finite(f(&xp), x)?;
        xp[i] = x[i];
        m[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            xp[i] = x[i] + h;
            xp[j] = x[j] + h;
            let fpp = check_finite(f(&xp), x)?;
            xp[j] = x[j] - h;
            let fpm = check_finite(f(&xp), x)?;
            xp[i] = x[i] - h;
            let fmm = check_finite(f(&xp), x)?;
            xp[j] = x[j] + h;
            let fmp = check_finite(f(&xp), x)?;
            xp[i] = x[i];
            xp[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// Richardson-extrapolated central Hessian of a scalar field.
pub fn fd_hessian<F>(f: F, x: &[f64], h: f64) -> Result<FdMatrixEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    let coarse = hess_step(&f, x, h)?;
    let fine = hess_step(&f, x, h / 2.0)?;
    let d = x.len();
    let mut value = vec![vec![0.0; d]; d];
    let mut err = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            value[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
            err = err.max((fine[i][j] - coarse[i][j]).abs() / 3.0);
        }
    }
    Ok(FdMatrixEstimate {
        value,
        error_estimate: err,
    })
}
