//! Cross-module invariants: finite-difference consistency of every smooth
//! family, exact-case dominance of the conditional Poincare bounds, and the
//! three-expression agreement of the Hessian estimators.

use annealab::bounds::{
    conditional_poincare, conditional_rescale, lsi_kl_bias, LyapunovVariant,
    PerturbedLyapunovInputs, PoincareMethod,
};
use annealab::interpolation::{HessianForm, InterpolationLaw, SnisConfig};
use annealab::measures::{DriftGrowth, Potential, PotentialSpec, QuasiConvexity};
use annealab::oracle::{fd_gradient, fd_hessian, integrate, QuadConfig};
use annealab::schedule::{Schedule, ScheduleSpec};
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;

fn gaussian(v: f64, d: usize) -> Potential {
    Potential::from_spec(PotentialSpec::Gaussian { variance: v, dim: d }).unwrap()
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let families = vec![
        PotentialSpec::Gaussian {
            variance: 2.0,
            dim: 2,
        },
        PotentialSpec::GaussianMixture {
            weights: vec![0.3, 0.7],
            means: vec![vec![-1.0, 0.5], vec![1.5, -0.2]],
            variance: 0.8,
            dim: 2,
        },
        PotentialSpec::Student {
            alpha: 3.0,
            sigma: 1.0,
            dim: 2,
        },
        PotentialSpec::Subbotin { alpha: 0.7, dim: 2 },
        PotentialSpec::Subbotin { alpha: 1.0, dim: 1 },
        PotentialSpec::Subbotin { alpha: 1.6, dim: 3 },
    ];
    for spec in families {
        let p = Potential::from_spec(spec).unwrap();
        for x in p.canonical_grid(60) {
            let h = 1e-4 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
            let grad = p.gradient(&x).unwrap();
            let fd_g = fd_gradient(|y| p.value(y).unwrap(), &x, h).unwrap();
            let scale_g = grad.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (a, b) in grad.iter().zip(&fd_g.value) {
                assert!(
                    (a - b).abs() / scale_g < 1e-5,
                    "{}: gradient {a} vs fd {b} at {x:?}",
                    p.family_name()
                );
            }
            let hess = p.hessian(&x).unwrap();
            let fd_h = fd_hessian(|y| p.value(y).unwrap(), &x, h).unwrap();
            let scale_h = hess
                .iter()
                .flat_map(|r| r.iter().map(|v| v.abs()))
                .fold(1.0, f64::max);
            for (row_a, row_b) in hess.iter().zip(&fd_h.value) {
                for (a, b) in row_a.iter().zip(row_b) {
                    assert!(
                        (a - b).abs() / scale_h < 1e-5,
                        "{}: hessian {a} vs fd {b} at {x:?}",
                        p.family_name()
                    );
                }
            }
        }
    }
}

#[test]
fn subbotin_gradient_tight_fd_check() {
    // alpha = 1, d = 1: the per-op example uses a 1e-6 relative tolerance.
    let p = Potential::from_spec(PotentialSpec::Subbotin { alpha: 1.0, dim: 1 }).unwrap();
    for k in 0..40 {
        let x = -4.0 + 8.0 * k as f64 / 39.0;
        let grad = p.gradient(&[x]).unwrap()[0];
        let fd = fd_gradient(|y| p.value(y).unwrap(), &[x], 1e-4 * (1.0 + x.abs())).unwrap();
        let scale = grad.abs().max(1e-3);
        assert!(
            (grad - fd.value[0]).abs() / scale < 1e-6,
            "x = {x}: {grad} vs {}",
            fd.value[0]
        );
    }
}

#[test]
fn gaussian_grid_dominance_of_conditional_bounds() {
    // Over a (lambda, sigma^2, tau^2) grid of more than 200 points, every
    // applicable bound dominates the exact conditional variance
    // 1/(1/(lambda tau^2) + 1/((1-lambda) sigma^2)).
    let lambdas: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let sigmas = [0.5, 1.0, 2.0, 4.0];
    let taus = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
    let mut checked = 0;
    for &s2 in &sigmas {
        let prof_w = gaussian(s2, 1).closed_form_profile().unwrap();
        for &t2 in &taus {
            let prof_u = gaussian(t2, 1).closed_form_profile().unwrap();
            for &lambda in &lambdas {
                let exact = 1.0 / (1.0 / (lambda * t2) + 1.0 / ((1.0 - lambda) * s2));
                let mutual = conditional_poincare(
                    PoincareMethod::MutualConvexity,
                    &prof_w,
                    &prof_u,
                    lambda,
                    1,
                )
                .unwrap();
                assert!(mutual.is_applicable());
                assert!(
                    mutual.bound().unwrap() >= exact * (1.0 - 1e-12),
                    "mutual {} below exact {exact}",
                    mutual.bound().unwrap()
                );
                let strict = conditional_rescale(
                    &PerturbedLyapunovInputs {
                        quasiconvex: QuasiConvexity {
                            alpha: 1.0 / s2,
                            beta: 2.0,
                            radius: 0.0,
                        },
                        drift: DriftGrowth {
                            kappa: 0.0,
                            beta: 1.0,
                        },
                        dim: 1,
                        gamma_grid: None,
                        radius_grid: None,
                        variant: LyapunovVariant::Strict { hess_lower: 1.0 / s2 },
                    },
                    lambda,
                )
                .unwrap();
                assert!(strict.bound().unwrap() >= exact);
                checked += 1;
            }
        }
    }
    assert!(checked >= 200, "only {checked} grid points");
}

#[test]
fn hessian_three_expression_agreement() {
    // W-form and U-form agree within 3 combined standard errors at 200
    // random (t, x) across a gaussian pair and a mixture-gaussian pair.
    let mixture = Potential::from_spec(PotentialSpec::GaussianMixture {
        weights: vec![0.5, 0.5],
        means: vec![vec![-1.0], vec![1.0]],
        variance: 1.0,
        dim: 1,
    })
    .unwrap();
    let schedule = Schedule::from_spec(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 }).unwrap();
    let laws = vec![
        InterpolationLaw::new(gaussian(2.0, 1), gaussian(1.0, 1), schedule.clone()).unwrap(),
        InterpolationLaw::new(mixture, gaussian(1.0, 1), schedule).unwrap(),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for law in &laws {
        for i in 0..100 {
            let t = 0.15 + 0.7 * rng.random::<f64>();
            let x = 2.5 * (rng.random::<f64>() * 2.0 - 1.0);
            let run = |form: HessianForm| {
                let cfg = SnisConfig {
                    particles: 30_000,
                    seed: 1000 + i,
                    hessian_form: form,
                    swap_proposal: false,
                    ..SnisConfig::default()
                };
                // The closed form would short-circuit; go through the
                // conditional particles by evaluating on the SNIS context.
                law.hessian_log_density_snis(t, &[x], &cfg).unwrap()
            };
            let w = run(HessianForm::WForm);
            let u = run(HessianForm::UForm);
            let tol = 3.0 * (w.standard_error + u.standard_error) + 1e-4;
            assert!(
                (w.value[0][0] - u.value[0][0]).abs() <= tol,
                "t = {t}, x = {x}: W {} vs U {} (tol {tol})",
                w.value[0][0],
                u.value[0][0]
            );
        }
    }
}

#[test]
fn lsi_bias_with_no_lsi_equals_twice_the_quarter_bound() {
    // With an infinite log-Sobolev constant the Gronwall bound reduces to
    // (kappa/2) int mdot_sq, exactly twice the kappa/4 convention.
    let schedule = Schedule::from_spec(ScheduleSpec::QuadraticPiecewise { horizon: 1.0 }).unwrap();
    let kappa = 0.1;
    let mdot = |s: f64| 1.0 + s * s;
    let no_lsi = lsi_kl_bias(
        &schedule,
        kappa,
        &|_| f64::INFINITY,
        &mdot,
        &QuadConfig::default(),
    )
    .unwrap();
    let integral = integrate(mdot, 0.0, 1.0, &[], &QuadConfig::default())
        .unwrap()
        .value;
    let quarter = 0.25 * kappa * integral;
    assert!(
        (no_lsi - 2.0 * quarter).abs() < 1e-10,
        "{no_lsi} vs {}",
        2.0 * quarter
    );
    // Any finite flow can only shrink it.
    let with_lsi = lsi_kl_bias(&schedule, kappa, &|_| 3.0, &mdot, &QuadConfig::default()).unwrap();
    assert!(with_lsi <= no_lsi);
}
