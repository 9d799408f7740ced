//! Schedule families `t -> lambda_t` and their action integrals.
//!
//! A schedule is a nondecreasing map from `[0, T]` into `[0, 1]` with a
//! right derivative everywhere (kinks use the right derivative). The action
//! integrals
//!
//! ```text
//! A0 = int_0^T |lambda'|^2 / lambda dt,   A1 = int_0^T |lambda'|^2 / (1 - lambda) dt
//! ```
//!
//! control the squared metric derivative of the interpolated marginal:
//! `int |p'_t|^2 dt <= (1/2) (V_pi A0 + V_nu A1)`, with `1/2` improving to
//! `1/4` when one of the measures is centered. Endpoint divergence (for
//! example an affine schedule starting at `lambda_0 = 0`) is detected by
//! closed-form exponent analysis per family, not by runtime blow-up.

use crate::measures::MomentSummary;
use crate::oracle::{integrate, QuadConfig, Quadrature};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// JSON-facing schedule description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `2 (t/T)^2` then `1 - 2 (1 - t/T)^2`; endpoints 0 and 1.
    QuadraticPiecewise {
        #[serde(rename = "T")]
        horizon: f64,
    },
    /// `(1 + cos(pi (1 - (t/T)^alpha))) / 2` with `alpha > 1/2`.
    Cosine {
        #[serde(rename = "T")]
        horizon: f64,
        #[serde(default = "default_cosine_exponent")]
        alpha: f64,
    },
    /// Quadratic rise to 1/2, then a plateau-shaped approach to `1 - kappa^alpha`.
    LsiPlateau {
        #[serde(rename = "T")]
        horizon: f64,
        kappa: f64,
        alpha: f64,
    },
    /// Straight line from `lambda0` to `lambda1`.
    AffineClamped {
        #[serde(rename = "T")]
        horizon: f64,
        lambda0: f64,
        lambda1: f64,
    },
}

fn default_cosine_exponent() -> f64 {
    1.0
}

/// Validated schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    spec: ScheduleSpec,
}

/// Action integrals and the assembled bound on `int |p'_t|^2 dt`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ActionSummary {
    pub a0: f64,
    pub a1: f64,
    /// `c (V_pi A0 + V_nu A1)` with `c = 1/4` when a measure is centered,
    /// `1/2` otherwise.
    pub action_bound: f64,
    pub centered: bool,
}

impl Schedule {
    pub fn from_spec(spec: ScheduleSpec) -> Result<Self> {
        match &spec {
            ScheduleSpec::QuadraticPiecewise { horizon } => {
                if !(*horizon > 0.0) {
                    return Err(Error::Domain("schedule horizon must be positive".into()));
                }
            }
            ScheduleSpec::Cosine { horizon, alpha } => {
                if !(*horizon > 0.0) {
                    return Err(Error::Domain("schedule horizon must be positive".into()));
                }
                if !(*alpha > 0.5) {
                    return Err(Error::Domain(format!(
                        "cosine schedule needs alpha > 1/2 for a finite A0, got {alpha}"
                    )));
                }
            }
            ScheduleSpec::LsiPlateau {
                horizon,
                kappa,
                alpha,
            } => {
                if !(*horizon > 0.0) {
                    return Err(Error::Domain("schedule horizon must be positive".into()));
                }
                if !(*kappa > 0.0 && *kappa < 1.0 && *alpha > 0.0) {
                    return Err(Error::Domain(format!(
                        "lsi_plateau needs kappa in (0,1) and alpha > 0, got kappa = {kappa}, alpha = {alpha}"
                    )));
                }
                if kappa.powf(*alpha) > 0.5 {
                    return Err(Error::Domain(format!(
                        "lsi_plateau needs kappa^alpha <= 1/2 for monotonicity, got {}",
                        kappa.powf(*alpha)
                    )));
                }
            }
            ScheduleSpec::AffineClamped {
                horizon,
                lambda0,
                lambda1,
            } => {
                if !(*horizon > 0.0) {
                    return Err(Error::Domain("schedule horizon must be positive".into()));
                }
                if !(*lambda0 >= 0.0 && *lambda0 < *lambda1 && *lambda1 <= 1.0) {
                    return Err(Error::Domain(format!(
                        "affine schedule needs 0 <= lambda0 < lambda1 <= 1, got [{lambda0}, {lambda1}]"
                    )));
                }
            }
        }
        Ok(Schedule { spec })
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn horizon(&self) -> f64 {
        match self.spec {
            ScheduleSpec::QuadraticPiecewise { horizon }
            | ScheduleSpec::Cosine { horizon, .. }
            | ScheduleSpec::LsiPlateau { horizon, .. }
            | ScheduleSpec::AffineClamped { horizon, .. } => horizon,
        }
    }

    /// `(lambda_0, lambda_T)`.
    pub fn endpoints(&self) -> (f64, f64) {
        match self.spec {
            ScheduleSpec::QuadraticPiecewise { .. } | ScheduleSpec::Cosine { .. } => (0.0, 1.0),
            ScheduleSpec::LsiPlateau { kappa, alpha, .. } => (0.0, 1.0 - kappa.powf(alpha)),
            ScheduleSpec::AffineClamped {
                lambda0, lambda1, ..
            } => (lambda0, lambda1),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let horizon = self.horizon();
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::Domain(format!(
                "time {t} outside the schedule range [0, {horizon}]"
            )));
        }
        Ok(())
    }

    /// `(lambda_t, lambda'_t)` with the right derivative at kinks.
    pub fn lambda(&self, t: f64) -> Result<(f64, f64)> {
        self.check_time(t)?;
        let horizon = self.horizon();
        let u = t / horizon;
        Ok(match self.spec {
            ScheduleSpec::QuadraticPiecewise { .. } => {
                if u <= 0.5 {
                    (2.0 * u * u, 4.0 * u / horizon)
                } else {
                    let w = 1.0 - u;
                    (1.0 - 2.0 * w * w, 4.0 * w / horizon)
                }
            }
            ScheduleSpec::Cosine { alpha, .. } => {
                let ua = u.powf(alpha);
                let lam = 0.5 * (1.0 - (PI * ua).cos());
                let deriv = if u == 0.0 {
                    // alpha > 1 gives slope 0, alpha = 1 gives 0 too since
                    // sin(pi u^a) vanishes; alpha < 1 diverges.
                    if alpha < 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    0.5 * PI * alpha * u.powf(alpha - 1.0) * (PI * ua).sin() / horizon
                };
                (lam.clamp(0.0, 1.0), deriv)
            }
            ScheduleSpec::LsiPlateau { kappa, alpha, .. } => {
                let ka = kappa.powf(alpha);
                if u < 0.5 {
                    (2.0 * u * u, 4.0 * u / horizon)
                } else {
                    let w = 1.0 - u;
                    (
                        1.0 - ka - 2.0 * (1.0 - 2.0 * ka) * w * w,
                        4.0 * (1.0 - 2.0 * ka) * w / horizon,
                    )
                }
            }
            ScheduleSpec::AffineClamped {
                lambda0, lambda1, ..
            } => (
                lambda0 + (lambda1 - lambda0) * u,
                (lambda1 - lambda0) / horizon,
            ),
        })
    }

    /// `lambda'^2 / lambda` with its algebraic limit at endpoints;
    /// `+inf` where the family genuinely diverges.
    pub fn ratio0(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let horizon = self.horizon();
        let u = t / horizon;
        Ok(match self.spec {
            ScheduleSpec::QuadraticPiecewise { .. } | ScheduleSpec::LsiPlateau { .. }
                if u <= 0.5 =>
            {
                8.0 / (horizon * horizon)
            }
            ScheduleSpec::Cosine { alpha, .. } => {
                // (pi a / T)^2 s^{2a-2} cos^2(pi s^a / 2)
                if u == 0.0 {
                    match alpha.partial_cmp(&1.0).unwrap() {
                        std::cmp::Ordering::Less => f64::INFINITY,
                        std::cmp::Ordering::Equal => (PI / horizon).powi(2),
                        std::cmp::Ordering::Greater => 0.0,
                    }
                } else {
                    let c = (0.5 * PI * u.powf(alpha)).cos();
                    (PI * alpha / horizon).powi(2) * u.powf(2.0 * alpha - 2.0) * c * c
                }
            }
            _ => {
                let (lam, deriv) = self.lambda(t)?;
                if lam == 0.0 {
                    if deriv == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    deriv * deriv / lam
                }
            }
        })
    }

    /// `lambda'^2 / (1 - lambda)` with its algebraic limit at endpoints.
    pub fn ratio1(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let horizon = self.horizon();
        let u = t / horizon;
        Ok(match self.spec {
            ScheduleSpec::QuadraticPiecewise { .. } if u > 0.5 => 8.0 / (horizon * horizon),
            ScheduleSpec::Cosine { alpha, .. } => {
                // (pi a / T)^2 s^{2a-2} sin^2(pi s^a / 2)
                if u == 0.0 {
                    0.0
                } else {
                    let s = (0.5 * PI * u.powf(alpha)).sin();
                    (PI * alpha / horizon).powi(2) * u.powf(2.0 * alpha - 2.0) * s * s
                }
            }
            _ => {
                let (lam, deriv) = self.lambda(t)?;
                let rem = 1.0 - lam;
                if rem == 0.0 {
                    if deriv == 0.0 {
                        // Quadratic-family terminal point: the algebraic limit
                        // is 8/T^2.
                        8.0 / (horizon * horizon)
                    } else {
                        f64::INFINITY
                    }
                } else {
                    deriv * deriv / rem
                }
            }
        })
    }

    /// Pointwise bound `|p'_t|^2 <= (lambda'^2 / 2)(V_pi / lambda + V_nu / (1 - lambda))`.
    pub fn pointwise_speed_sq_bound(
        &self,
        pi_moments: &MomentSummary,
        nu_moments: &MomentSummary,
        t: f64,
    ) -> Result<f64> {
        Ok(0.5
            * (pi_moments.second_moment * self.ratio0(t)?
                + nu_moments.second_moment * self.ratio1(t)?))
    }

    /// Closed-form A0 when the family admits one.
    pub fn analytic_a0(&self) -> Option<f64> {
        let horizon = self.horizon();
        match self.spec {
            ScheduleSpec::QuadraticPiecewise { .. } => {
                let sqrt2 = std::f64::consts::SQRT_2;
                Some(4.0 / horizon
                    + (16.0 / horizon) * ((1.0 + sqrt2).ln() / (2.0 * sqrt2) - 0.25))
            }
            ScheduleSpec::Cosine { alpha, .. } if alpha == 1.0 => {
                Some(PI * PI / (2.0 * horizon))
            }
            ScheduleSpec::AffineClamped {
                lambda0, lambda1, ..
            } if lambda0 > 0.0 => {
                Some((lambda1 - lambda0) / horizon * (lambda1 / lambda0).ln())
            }
            _ => None,
        }
    }

    /// Closed-form A1 when the family admits one.
    pub fn analytic_a1(&self) -> Option<f64> {
        let horizon = self.horizon();
        match self.spec {
            // The schedule is symmetric under t -> T - t, lambda -> 1 - lambda.
            ScheduleSpec::QuadraticPiecewise { .. } => self.analytic_a0(),
            ScheduleSpec::Cosine { alpha, .. } if alpha == 1.0 => {
                Some(PI * PI / (2.0 * horizon))
            }
            ScheduleSpec::AffineClamped {
                lambda0, lambda1, ..
            } if lambda1 < 1.0 => Some(
                (lambda1 - lambda0) / horizon * ((1.0 - lambda0) / (1.0 - lambda1)).ln(),
            ),
            _ => None,
        }
    }

    /// Checks endpoint integrability by exponent analysis; errors name the
    /// divergent endpoint.
    fn check_integrable(&self) -> Result<()> {
        if let ScheduleSpec::AffineClamped {
            lambda0, lambda1, ..
        } = self.spec
        {
            if lambda0 == 0.0 {
                return Err(Error::Precondition(
                    "A0 diverges at t = 0: affine schedule has lambda_0 = 0 with first-order vanishing"
                        .into(),
                ));
            }
            if lambda1 == 1.0 {
                return Err(Error::Precondition(
                    "A1 diverges at t = T: affine schedule has lambda_T = 1 with first-order approach"
                        .into(),
                ));
            }
        }
        Ok(())
    }

    fn quadrature_a0(&self, quad: &QuadConfig) -> Result<Quadrature> {
        let horizon = self.horizon();
        match self.spec {
            ScheduleSpec::Cosine { alpha, .. } => {
                // Substituted regular form:
                // A0 = (pi^2 a p / T) int_0^1 cos^2((pi/2) w^p) dw, p = a/(2a-1).
                let p = alpha / (2.0 * alpha - 1.0);
                let q = integrate(
                    |w| (0.5 * PI * w.powf(p)).cos().powi(2),
                    0.0,
                    1.0,
                    &[],
                    quad,
                )?;
                Ok(Quadrature {
                    value: PI * PI * alpha * p / horizon * q.value,
                    error_estimate: PI * PI * alpha * p / horizon * q.error_estimate,
                    panels: q.panels,
                })
            }
            _ => integrate(
                |t| self.ratio0(t).unwrap_or(f64::NAN),
                0.0,
                horizon,
                &[0.5 * horizon],
                quad,
            ),
        }
    }

    fn quadrature_a1(&self, quad: &QuadConfig) -> Result<Quadrature> {
        let horizon = self.horizon();
        match self.spec {
            ScheduleSpec::Cosine { alpha, .. } => {
                // A1 = (pi^2 a / T) int_0^1 v^{(a-1)/a} sin^2(pi v / 2) dv;
                // the sin^2 factor kills the endpoint singularity.
                let e = (alpha - 1.0) / alpha;
                let q = integrate(
                    |v| {
                        if v == 0.0 {
                            0.0
                        } else {
                            v.powf(e) * (0.5 * PI * v).sin().powi(2)
                        }
                    },
                    0.0,
                    1.0,
                    &[],
                    quad,
                )?;
                Ok(Quadrature {
                    value: PI * PI * alpha / horizon * q.value,
                    error_estimate: PI * PI * alpha / horizon * q.error_estimate,
                    panels: q.panels,
                })
            }
            _ => integrate(
                |t| self.ratio1(t).unwrap_or(f64::NAN),
                0.0,
                horizon,
                &[0.5 * horizon],
                quad,
            ),
        }
    }

    /// A0, A1 and the action bound, substituting analytic values where the
    /// family admits them.
    pub fn action_integrals(
        &self,
        pi_moments: &MomentSummary,
        nu_moments: &MomentSummary,
        quad: &QuadConfig,
    ) -> Result<ActionSummary> {
        self.check_integrable()?;
        let a0 = match self.analytic_a0() {
            Some(v) => v,
            None => self.quadrature_a0(quad)?.value,
        };
        let a1 = match self.analytic_a1() {
            Some(v) => v,
            None => self.quadrature_a1(quad)?.value,
        };
        let centered = pi_moments.mean.iter().all(|&m| m == 0.0)
            || nu_moments.mean.iter().all(|&m| m == 0.0);
        let c = if centered { 0.25 } else { 0.5 };
        Ok(ActionSummary {
            a0,
            a1,
            action_bound: c
                * (pi_moments.second_moment * a0 + nu_moments.second_moment * a1),
            centered,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    fn schedule(spec: ScheduleSpec) -> Schedule {
        Schedule::from_spec(spec).unwrap()
    }

    fn point_moments(v: f64, d: usize) -> MomentSummary {
        MomentSummary {
            mean_abs: 0.0,
            second_moment: v,
            mean: vec![0.0; d],
            mean_abs_is_upper_bound: false,
            second_moment_is_upper_bound: false,
        }
    }

    #[test]
    fn quadratic_midpoint() {
        let s = schedule(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 });
        let (lam, deriv) = s.lambda(0.5).unwrap();
        assert_eq!(lam, 0.5);
        assert_eq!(deriv, 2.0);
        assert_eq!(s.lambda(0.0).unwrap().0, 0.0);
        assert_eq!(s.lambda(1.0).unwrap().0, 1.0);
    }

    #[test]
    fn plateau_terminal_value() {
        let s = schedule(ScheduleSpec::LsiPlateau {
            horizon: 1.0,
            kappa: 0.01,
            alpha: 0.5,
        });
        let (lam, deriv) = s.lambda(1.0).unwrap();
        assert!((lam - 0.9).abs() < 1e-15);
        assert_eq!(deriv, 0.0);
        // Continuity at the junction.
        let (l_mid, _) = s.lambda(0.5).unwrap();
        assert!((l_mid - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cosine_endpoints() {
        let s = schedule(ScheduleSpec::Cosine {
            horizon: 1.0,
            alpha: 1.0,
        });
        assert_eq!(s.lambda(0.0).unwrap().0, 0.0);
        assert!((s.lambda(1.0).unwrap().0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_time_rejected() {
        let s = schedule(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 });
        assert!(s.lambda(-0.1).is_err());
        assert!(s.lambda(1.1).is_err());
    }

    #[test]
    fn monotone_on_random_pairs() {
        let specs = vec![
            ScheduleSpec::QuadraticPiecewise { horizon: 2.0 },
            ScheduleSpec::Cosine {
                horizon: 2.0,
                alpha: 0.8,
            },
            ScheduleSpec::Cosine {
                horizon: 1.0,
                alpha: 2.0,
            },
            ScheduleSpec::LsiPlateau {
                horizon: 1.0,
                kappa: 0.05,
                alpha: 0.5,
            },
            ScheduleSpec::AffineClamped {
                horizon: 1.0,
                lambda0: 0.1,
                lambda1: 0.9,
            },
        ];
        let mut rng = crate::rng::stream(99, crate::rng::Domain::TargetDraw);
        for spec in specs {
            let s = schedule(spec);
            let horizon = s.horizon();
            for _ in 0..1000 {
                let mut t1: f64 = rng.random::<f64>() * horizon;
                let mut t2: f64 = rng.random::<f64>() * horizon;
                if t1 > t2 {
                    std::mem::swap(&mut t1, &mut t2);
                }
                let l1 = s.lambda(t1).unwrap().0;
                let l2 = s.lambda(t2).unwrap().0;
                assert!(l2 >= l1 - 1e-15, "{:?}: {t1} -> {l1}, {t2} -> {l2}", s.spec);
                assert!((0.0..=1.0).contains(&l1));
            }
        }
    }

    #[test]
    fn quadratic_first_half_a0_contribution() {
        // Constant integrand 8/T^2 on [0, T/2] integrates to 4/T.
        let s = schedule(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 });
        let q = integrate(
            |t| s.ratio0(t).unwrap(),
            0.0,
            0.5,
            &[],
            &QuadConfig::default(),
        )
        .unwrap();
        assert!((q.value - 4.0).abs() < 1e-10, "{}", q.value);
    }

    #[test]
    fn quadrature_matches_analytic() {
        let quad = QuadConfig::default();
        let specs = vec![
            ScheduleSpec::QuadraticPiecewise { horizon: 1.0 },
            ScheduleSpec::QuadraticPiecewise { horizon: 3.0 },
            ScheduleSpec::Cosine {
                horizon: 2.0,
                alpha: 1.0,
            },
            ScheduleSpec::AffineClamped {
                horizon: 1.5,
                lambda0: 0.2,
                lambda1: 0.8,
            },
        ];
        for spec in specs {
            let s = schedule(spec);
            let qa0 = s.quadrature_a0(&quad).unwrap().value;
            let qa1 = s.quadrature_a1(&quad).unwrap().value;
            let a0 = s.analytic_a0().unwrap();
            let a1 = s.analytic_a1().unwrap();
            assert!((qa0 - a0).abs() / a0 < 1e-8, "{:?}: {qa0} vs {a0}", s.spec);
            assert!((qa1 - a1).abs() / a1 < 1e-8, "{:?}: {qa1} vs {a1}", s.spec);
        }
    }

    #[test]
    fn plateau_a1_finite() {
        let s = schedule(ScheduleSpec::LsiPlateau {
            horizon: 1.0,
            kappa: 0.25,
            alpha: 0.5,
        });
        let m = point_moments(1.0, 1);
        let action = s.action_integrals(&m, &m, &QuadConfig::default()).unwrap();
        assert!(action.a1.is_finite() && action.a1 > 0.0);
        // 1 - lambda_T = 0.5, so the terminal integrand is bounded by
        // lambda'^2 / 0.5 and A1 stays well under the quadratic value.
        let quadratic = schedule(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 });
        let qa = quadratic.action_integrals(&m, &m, &QuadConfig::default()).unwrap();
        assert!(action.a1 < qa.a1);
    }

    #[test]
    fn degenerate_moments_zero_bound() {
        let s = schedule(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 });
        let m = point_moments(0.0, 1);
        let action = s.action_integrals(&m, &m, &QuadConfig::default()).unwrap();
        assert_eq!(action.action_bound, 0.0);
    }

    #[test]
    fn affine_divergence_names_endpoint() {
        let s0 = schedule(ScheduleSpec::AffineClamped {
            horizon: 1.0,
            lambda0: 0.0,
            lambda1: 0.5,
        });
        let m = point_moments(1.0, 1);
        let err = s0
            .action_integrals(&m, &m, &QuadConfig::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("t = 0"), "{err}");

        let s1 = schedule(ScheduleSpec::AffineClamped {
            horizon: 1.0,
            lambda0: 0.5,
            lambda1: 1.0,
        });
        let err = s1
            .action_integrals(&m, &m, &QuadConfig::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("t = T"), "{err}");
    }

    #[test]
    fn centered_flag_quarters_the_constant() {
        let s = schedule(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 });
        let centered = point_moments(2.0, 1);
        let mut shifted = point_moments(2.0, 1);
        shifted.mean = vec![1.0];
        let a = s
            .action_integrals(&centered, &centered, &QuadConfig::default())
            .unwrap();
        let b = s
            .action_integrals(&shifted, &shifted, &QuadConfig::default())
            .unwrap();
        assert!(a.centered && !b.centered);
        assert!((b.action_bound - 2.0 * a.action_bound).abs() < 1e-12);
    }

    #[test]
    fn gaussian_metric_derivative_never_exceeds_pointwise_bound() {
        // pi = N(0, tau^2 I_d), nu = N(0, sigma^2 I_d): the interpolated
        // marginal is N(0, alpha_t^2 I_d) with alpha_t^2 = lambda tau^2 +
        // (1 - lambda) sigma^2, and |p'_t| = |d alpha_t / dt| sqrt(d).
        let (tau2, sigma2, d) = (4.0, 1.0, 3usize);
        let pi_m = point_moments(tau2 * d as f64, d);
        let nu_m = point_moments(sigma2 * d as f64, d);
        let specs = vec![
            ScheduleSpec::QuadraticPiecewise { horizon: 1.0 },
            ScheduleSpec::Cosine {
                horizon: 1.0,
                alpha: 1.0,
            },
            ScheduleSpec::LsiPlateau {
                horizon: 1.0,
                kappa: 0.05,
                alpha: 0.5,
            },
        ];
        for spec in specs {
            let s = schedule(spec);
            for k in 0..1000 {
                let t = s.horizon() * (k as f64 + 0.5) / 1000.0;
                let (lam, deriv) = s.lambda(t).unwrap();
                let alpha = (lam * tau2 + (1.0 - lam) * sigma2).sqrt();
                let speed = (deriv * (tau2 - sigma2) / (2.0 * alpha)).abs() * (d as f64).sqrt();
                let bound = s.pointwise_speed_sq_bound(&pi_m, &nu_m, t).unwrap().sqrt();
                assert!(
                    speed <= bound * (1.0 + 1e-12),
                    "{:?} at t = {t}: speed {speed} > bound {bound}",
                    s.spec
                );
            }
        }
    }

    #[test]
    fn json_construction() {
        let spec: ScheduleSpec =
            serde_json::from_str(r#"{"family":"lsi_plateau","T":1.0,"kappa":0.01,"alpha":0.5}"#)
                .unwrap();
        let s = Schedule::from_spec(spec).unwrap();
        assert!((s.endpoints().1 - 0.9).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Schedule::from_spec(ScheduleSpec::Cosine {
            horizon: 1.0,
            alpha: 0.5,
        })
        .is_err());
        assert!(Schedule::from_spec(ScheduleSpec::LsiPlateau {
            horizon: 1.0,
            kappa: 0.9,
            alpha: 1.0,
        })
        .is_err());
        assert!(Schedule::from_spec(ScheduleSpec::AffineClamped {
            horizon: 1.0,
            lambda0: 0.8,
            lambda1: 0.3,
        })
        .is_err());
    }
}
