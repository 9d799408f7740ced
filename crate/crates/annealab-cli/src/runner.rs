//! Mode execution and artifact writing.
//!
//! Every CSV uses a header row and 17-significant-digit floats so reruns
//! with the same configuration and seed are byte-identical. The manifest
//! lists each emitted file with its SHA-256 content hash.

use crate::config::{
    BandStructureSpec, ExperimentConfig, MethodSpec, OracleSection, SchemaError,
};
use annealab::bounds::{self, BandStructure, BoundReport, PoincareMethod};
use annealab::diagnostics::{bias_scaling_study, StudyTemplate};
use annealab::interpolation::InterpolationLaw;
use annealab::measures::{PointBatch, SmoothnessProfile};
use annealab::oracle::PoincareEstimate;
use annealab::sampler::{run_annealed, SdeRun};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub enum RunError {
    Schema(SchemaError),
    Runtime(String),
}

impl From<SchemaError> for RunError {
    fn from(e: SchemaError) -> Self {
        RunError::Schema(e)
    }
}

fn runtime(module: &str, e: impl std::fmt::Display) -> RunError {
    RunError::Runtime(format!("{module}: {e}"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Round-trip-safe float formatting (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bounds,
    Sample,
    Verify,
    Study,
    Oracle,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode, SchemaError> {
        match s {
            "bounds" => Ok(Mode::Bounds),
            "sample" => Ok(Mode::Sample),
            "verify" => Ok(Mode::Verify),
            "study" => Ok(Mode::Study),
            "oracle" => Ok(Mode::Oracle),
            other => Err(SchemaError(format!(
                "--mode: expected one of bounds|sample|verify|study|oracle, got {other}"
            ))),
        }
    }
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String, usize)>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, RunError> {
        std::fs::create_dir_all(dir).map_err(|e| runtime("io", e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| runtime("io", e))?;
        let hash = hex(&Sha256::digest(contents.as_bytes()));
        self.files.push((name.to_string(), hash, contents.len()));
        Ok(())
    }

    fn manifest(&self, config_raw: &str, seed: u64) -> String {
        let config_hash = hex(&Sha256::digest(config_raw.as_bytes()));
        let mut files = String::new();
        for (i, (name, hash, bytes)) in self.files.iter().enumerate() {
            if i > 0 {
                files.push(',');
            }
            let _ = write!(
                files,
                "\n    {{\"name\": \"{name}\", \"sha256\": \"{hash}\", \"bytes\": {bytes}}}"
            );
        }
        format!(
            "{{\n  \"config_sha256\": \"{config_hash}\",\n  \"seed\": {seed},\n  \"files\": [{files}\n  ]\n}}\n"
        )
    }
}

/// Executes the requested modes and writes artifacts plus a manifest.
pub fn run_config(
    config_raw: &str,
    modes: &[Mode],
    out_override: Option<&str>,
    seed_override: Option<u64>,
) -> Result<(), RunError> {
    let mut config = ExperimentConfig::parse(config_raw)?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let out_dir = out_override.unwrap_or(&config.output_dir).to_string();
    let mut artifacts = Artifacts::new(Path::new(&out_dir))?;
    let law = config.build_law().map_err(|e| runtime("measures", e))?;

    for &mode in modes {
        match mode {
            Mode::Bounds => run_bounds(&config, &law, &mut artifacts)?,
            Mode::Sample => run_sample(&config, &law, &mut artifacts)?,
            Mode::Verify => run_verify(&config, &law, &mut artifacts)?,
            Mode::Study => run_study(&config, &law, &mut artifacts)?,
            Mode::Oracle => run_oracle(&config, &law, &mut artifacts)?,
        }
    }

    let manifest = artifacts.manifest(config_raw, config.seed);
    let path = artifacts.dir.join("manifest.json");
    std::fs::write(path, manifest).map_err(|e| runtime("io", e))?;
    Ok(())
}

/// Modes implied by the sections present in the config.
pub fn modes_from_sections(config_raw: &str) -> Result<Vec<Mode>, RunError> {
    let config = ExperimentConfig::parse(config_raw)?;
    let mut modes = Vec::new();
    if config.bounds.is_some() {
        modes.push(Mode::Bounds);
    }
    if config.sampler.is_some() {
        modes.push(Mode::Sample);
    }
    if config.verify.is_some() {
        modes.push(Mode::Verify);
    }
    if config.study.is_some() {
        modes.push(Mode::Study);
    }
    if config.oracle.is_some() {
        modes.push(Mode::Oracle);
    }
    if modes.is_empty() {
        return Err(RunError::Schema(SchemaError(
            "config: no executable sections (sampler/bounds/study/verify/oracle)".to_string(),
        )));
    }
    Ok(modes)
}

fn profiles_of(law: &InterpolationLaw) -> (Option<SmoothnessProfile>, Option<SmoothnessProfile>) {
    (
        law.base().closed_form_profile().ok(),
        law.target().closed_form_profile().ok(),
    )
}

fn gaussian_compact_params(law: &InterpolationLaw) -> Option<(f64, f64, f64)> {
    use annealab::measures::PotentialSpec as P;
    match (law.target().spec(), law.base().spec()) {
        (P::Gaussian { variance: tau2, .. }, P::Gaussian { variance: sigma2, .. }) => {
            Some((*sigma2, *tau2, 0.0))
        }
        (P::UniformBall { radius, .. }, P::Gaussian { variance: sigma2, .. }) => {
            Some((*sigma2, 0.0, *radius))
        }
        (
            P::CompactGaussianConvolution { radius, tau2, .. },
            P::Gaussian { variance: sigma2, .. },
        ) => Some((*sigma2, *tau2, *radius)),
        _ => None,
    }
}

fn run_bounds(
    config: &ExperimentConfig,
    law: &InterpolationLaw,
    artifacts: &mut Artifacts,
) -> Result<(), RunError> {
    let Some(section) = &config.bounds else {
        return Err(RunError::Schema(SchemaError(
            "bounds: section missing for bounds mode".to_string(),
        )));
    };
    let horizon = law.schedule().horizon();
    let dim = law.dim();
    let (prof_w, prof_u) = profiles_of(law);

    let mut csv = String::from("t,lambda,method,bound,applicable,window_lo,window_hi\n");
    let mut reports_json: Vec<String> = Vec::new();

    let mut emit = |csv: &mut String, t: f64, lambda: f64, name: &str, report: Option<BoundReport>| {
        match report {
            Some(r) => {
                let bound = r.bound().unwrap_or(f64::NAN);
                let (lo, hi) = r.validity.unwrap_or((f64::NAN, f64::NAN));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    fmt_f64(t),
                    fmt_f64(lambda),
                    name,
                    fmt_f64(bound),
                    r.is_applicable(),
                    fmt_f64(lo),
                    fmt_f64(hi)
                );
                reports_json.push(format!(
                    "{{\"t\": {}, \"lambda\": {}, \"report\": {}}}",
                    fmt_f64(t),
                    fmt_f64(lambda),
                    serde_json::to_string(&r).unwrap()
                ));
            }
            None => {
                let _ = writeln!(
                    csv,
                    "{},{},{},nan,false,nan,nan",
                    fmt_f64(t),
                    fmt_f64(lambda),
                    name
                );
            }
        }
    };

    for k in 0..section.t_grid {
        // Interior grid: the conditional bounds live on lambda in (0, 1).
        let t = horizon * (k as f64 + 0.5) / section.t_grid as f64;
        let (lambda, _) = law
            .schedule()
            .lambda(t)
            .map_err(|e| runtime("schedule", e))?;
        for method in &section.methods {
            match method {
                MethodSpec::ScoreSup => {
                    let r = match (&prof_w, &prof_u) {
                        (Some(w), Some(u)) => bounds::score_sup_bound(w, u, lambda).ok(),
                        _ => None,
                    };
                    emit(&mut csv, t, lambda, "score_sup", r);
                }
                MethodSpec::HessianBand { structure } => {
                    let r = prof_w.as_ref().and_then(|w| {
                        let s = match structure {
                            BandStructureSpec::Generic => BandStructure::Generic,
                            BandStructureSpec::StrictlyConvex => BandStructure::StrictlyConvex,
                            BandStructureSpec::Gaussian => BandStructure::Gaussian,
                            BandStructureSpec::Product => BandStructure::Product,
                        };
                        bounds::hessian_band(w, prof_u.as_ref(), lambda, None, s, dim)
                            .ok()
                            .map(|band| {
                                let mut rep = band_report("hessian_band", band);
                                rep.validity = Some((lambda, lambda));
                                rep
                            })
                    });
                    emit(&mut csv, t, lambda, "hessian_band", r);
                }
                MethodSpec::GaussianCompactBand => {
                    let r = gaussian_compact_params(law).and_then(|(s2, t2, radius)| {
                        bounds::gaussian_compact_band(s2, t2, radius, lambda, dim)
                            .ok()
                            .map(|band| {
                                let mut rep = band_report("gaussian_compact_band", band);
                                rep.validity = Some((lambda, lambda));
                                rep
                            })
                    });
                    emit(&mut csv, t, lambda, "gaussian_compact_band", r);
                }
                MethodSpec::MutualConvexity
                | MethodSpec::Miclo
                | MethodSpec::Reflection
                | MethodSpec::ConvexInfinity
                | MethodSpec::Direct { .. } => {
                    let (name, pm) = match method {
                        MethodSpec::MutualConvexity => {
                            ("mutual_convexity", PoincareMethod::MutualConvexity)
                        }
                        MethodSpec::Miclo => ("miclo", PoincareMethod::Miclo),
                        MethodSpec::Reflection => ("reflection", PoincareMethod::Reflection),
                        MethodSpec::ConvexInfinity => {
                            ("convex_infinity", PoincareMethod::ConvexInfinity)
                        }
                        MethodSpec::Direct { epsilon } => {
                            ("direct", PoincareMethod::Direct { epsilon: *epsilon })
                        }
                        _ => unreachable!(),
                    };
                    let r = match (&prof_w, &prof_u) {
                        (Some(w), Some(u)) => {
                            bounds::conditional_poincare(pm, w, u, lambda, dim).ok()
                        }
                        _ => None,
                    };
                    emit(&mut csv, t, lambda, name, r);
                }
                MethodSpec::LyapunovStrict => {
                    let r = match (&prof_w, &prof_u) {
                        (Some(w), Some(u)) => w.hess_lower.and_then(|dw| {
                            if dw > 0.0 && u.grad_sup.is_finite() {
                                let inputs = bounds::PerturbedLyapunovInputs {
                                    quasiconvex: annealab::measures::QuasiConvexity {
                                        alpha: dw,
                                        beta: 2.0,
                                        radius: 0.0,
                                    },
                                    drift: annealab::measures::DriftGrowth {
                                        kappa: u.grad_sup,
                                        beta: 1.0,
                                    },
                                    dim,
                                    gamma_grid: None,
                                    radius_grid: None,
                                    variant: bounds::LyapunovVariant::Strict { hess_lower: dw },
                                };
                                bounds::conditional_rescale(&inputs, lambda).ok()
                            } else {
                                None
                            }
                        }),
                        _ => None,
                    };
                    emit(&mut csv, t, lambda, "lyapunov_strict", r);
                }
            }
        }
    }

    // Configuration-level report alongside the per-t rows.
    let wp = bounds::wellposedness_report(law, config.kappa, &[0.1 * horizon, 0.01 * horizon])
        .map_err(|e| runtime("bounds", e))?;
    reports_json.push(format!(
        "{{\"t\": null, \"lambda\": null, \"report\": {}}}",
        serde_json::to_string(&wp).unwrap()
    ));

    artifacts.write("bounds.csv", &csv)?;
    artifacts.write(
        "bounds.json",
        &format!("[\n{}\n]\n", reports_json.join(",\n")),
    )?;
    Ok(())
}

fn band_report(name: &str, band: annealab::bounds::HessianBand) -> BoundReport {
    let mut r = BoundReport::new(name);
    r.set("lower", band.lower);
    r.set("upper", band.upper);
    r.set("lipschitz", band.lipschitz);
    r.set("bound", band.upper);
    r
}

fn write_batch_csv(header: &str, batch: &PointBatch, with_step: Option<(usize, f64)>) -> String {
    let mut csv = String::from(header);
    for (chain, row) in batch.rows().enumerate() {
        for (j, v) in row.iter().enumerate() {
            match with_step {
                Some((step, time)) => {
                    let _ = writeln!(
                        csv,
                        "{chain},{step},{},{j},{}",
                        fmt_f64(time),
                        fmt_f64(*v)
                    );
                }
                None => {
                    let _ = writeln!(csv, "{chain},{j},{}", fmt_f64(*v));
                }
            }
        }
    }
    csv
}

fn run_sample(
    config: &ExperimentConfig,
    law: &InterpolationLaw,
    artifacts: &mut Artifacts,
) -> Result<(), RunError> {
    let Some(section) = &config.sampler else {
        return Err(RunError::Schema(SchemaError(
            "sampler: section missing for sample mode".to_string(),
        )));
    };
    let run = SdeRun {
        law: law.clone(),
        kappa: config.kappa,
        steps: section.steps,
        chains: section.chains,
        seed: config.seed,
        eps_end: section.eps_end,
        snapshot_times: section.snapshot_times.clone(),
        score: config.snis_config(),
    };
    let out = run_annealed(&run).map_err(|e| runtime("sampler", e))?;
    artifacts.write(
        "terminal.csv",
        &write_batch_csv("chain,coordinate,value\n", &out.terminal, None),
    )?;
    if !out.snapshots.is_empty() {
        let mut csv = String::from("chain,step,time,coordinate,value\n");
        for (t_hat, step, batch) in &out.snapshots {
            csv.push_str(&write_batch_csv("", batch, Some((*step, *t_hat))));
        }
        artifacts.write("snapshots.csv", &csv)?;
    }
    Ok(())
}

fn run_verify(
    config: &ExperimentConfig,
    law: &InterpolationLaw,
    artifacts: &mut Artifacts,
) -> Result<(), RunError> {
    let Some(section) = &config.verify else {
        return Err(RunError::Schema(SchemaError(
            "verify: section missing for verify mode".to_string(),
        )));
    };
    let mut entries: Vec<String> = Vec::new();
    let mut all_passed = true;
    for (name, potential) in [("target", law.target()), ("base", law.base())] {
        if !potential.is_smooth() {
            entries.push(format!(
                "{{\"side\": \"{name}\", \"skipped\": \"non-smooth family\"}}"
            ));
            continue;
        }
        let profile = potential
            .closed_form_profile()
            .map_err(|e| runtime("measures", e))?;
        let grid = potential.canonical_grid(section.grid_points);
        let report = potential
            .verify_profile(&profile, &grid)
            .map_err(|e| runtime("measures", e))?;
        all_passed &= report.all_passed();
        entries.push(format!(
            "{{\"side\": \"{name}\", \"passed\": {}, \"checks\": {}}}",
            report.all_passed(),
            serde_json::to_string(&report.checks).unwrap()
        ));
    }

    // Band dominance for 1D laws: finite-difference Hessians of the
    // reference log-density against the exact-arrangement band.
    if law.dim() == 1 {
        if let Some((s2, t2, radius)) = gaussian_compact_params(law) {
            let horizon = law.schedule().horizon();
            let mut violations = 0usize;
            let mut checked = 0usize;
            for i in 0..10 {
                let t = horizon * (i as f64 + 0.5) / 10.0;
                let (lambda, _) = law.schedule().lambda(t).map_err(|e| runtime("schedule", e))?;
                let band = bounds::gaussian_compact_band(s2, t2, radius, lambda, 1)
                    .map_err(|e| runtime("bounds", e))?;
                for j in 0..5 {
                    let x = -2.0 + 4.0 * j as f64 / 4.0;
                    let fd = annealab::oracle::fd_hessian(
                        |p| law.reference_log_density_1d(t, p[0]).unwrap_or(f64::NAN),
                        &[x],
                        1e-3 * (1.0 + x.abs()),
                    );
                    if let Ok(est) = fd {
                        checked += 1;
                        let slack = (est.error_estimate * 10.0).max(1e-7);
                        if !band.contains(est.value[0][0], slack) {
                            violations += 1;
                        }
                    }
                }
            }
            all_passed &= violations == 0;
            entries.push(format!(
                "{{\"check\": \"band_dominance\", \"points\": {checked}, \"violations\": {violations}}}"
            ));
        }
    }

    artifacts.write(
        "verify.json",
        &format!(
            "{{\n  \"passed\": {all_passed},\n  \"entries\": [\n{}\n  ]\n}}\n",
            entries.join(",\n")
        ),
    )?;
    if !all_passed {
        return Err(runtime("verify", "verification checks failed (see verify.json)"));
    }
    Ok(())
}

fn run_study(
    config: &ExperimentConfig,
    law: &InterpolationLaw,
    artifacts: &mut Artifacts,
) -> Result<(), RunError> {
    let Some(section) = &config.study else {
        return Err(RunError::Schema(SchemaError(
            "study: section missing for study mode".to_string(),
        )));
    };
    let template = StudyTemplate {
        chains: section.chains,
        seed: config.seed,
        step_budget: section.step_budget,
        eps_end: section.eps_end,
        score: config.snis_config(),
        lsi_bound: section.lsi_convolved.map(|c| bounds::LsiCase::Convolved {
            kappa: config.kappa,
            sigma2: c.sigma2,
            tau2: c.tau2,
            radius: c.radius,
            horizon: law.schedule().horizon(),
            dim: law.dim(),
        }),
    };
    let study =
        bias_scaling_study(law, &section.kappas, &template).map_err(|e| runtime("diagnostics", e))?;
    let mut csv = String::from(
        "kappa,raw_bias,floor_adjusted_bias,bound_thm_annealed,bound_lsi,slope_fit_flag\n",
    );
    for row in &study.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f64(row.kappa),
            fmt_f64(row.raw_bias),
            fmt_f64(row.floor_adjusted),
            fmt_f64(row.bound_thm_annealed),
            row.bound_lsi.map(fmt_f64).unwrap_or_else(|| "".to_string()),
            study.slope.is_finite()
        );
    }
    artifacts.write("study.csv", &csv)?;
    artifacts.write(
        "study.json",
        &format!("{}\n", serde_json::to_string_pretty(&study).unwrap()),
    )?;
    Ok(())
}

fn run_oracle(
    config: &ExperimentConfig,
    law: &InterpolationLaw,
    artifacts: &mut Artifacts,
) -> Result<(), RunError> {
    let Some(section) = &config.oracle else {
        return Err(RunError::Schema(SchemaError(
            "oracle: section missing for oracle mode".to_string(),
        )));
    };
    if law.dim() != 1 {
        return Err(runtime("oracle", "1D spectral-gap oracles need dim = 1"));
    }
    let mut csv = String::from("t,lambda,x,cp_oracle,refinement_rel_diff,truncation_warning\n");
    for &t in &section.t_values {
        let (lambda, _) = law.schedule().lambda(t).map_err(|e| runtime("schedule", e))?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(runtime(
                "oracle",
                format!("conditional oracle needs lambda in (0,1); t = {t} gives {lambda}"),
            ));
        }
        let sl = lambda.sqrt();
        let sr = (1.0 - lambda).sqrt();
        for &x in &section.x_values {
            let target = law.target().clone();
            let base = law.base().clone();
            let log_q = move |y: f64| {
                let u = target.value(&[y / sl]).unwrap_or(f64::INFINITY);
                let w = base.value(&[(x - y) / sr]).unwrap_or(f64::INFINITY);
                -(u + w)
            };
            let est = compute_conditional_oracle(log_q, section)?;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_f64(t),
                fmt_f64(lambda),
                fmt_f64(x),
                fmt_f64(est.value),
                fmt_f64(est.refinement_rel_diff),
                est.truncation_warning
            );
        }
    }
    artifacts.write("oracle.csv", &csv)?;
    Ok(())
}

fn compute_conditional_oracle(
    log_q: impl Fn(f64) -> f64,
    section: &OracleSection,
) -> Result<PoincareEstimate, RunError> {
    PoincareEstimate::compute(log_q, section.interval.0, section.interval.1, section.grid_points)
        .map_err(|e| runtime("oracle", e))
}
