//! Experiment configuration: one JSON file, per-mode sections sharing the
//! same law so a study can reference the configuration the bounds were
//! computed for.

use annealab::interpolation::{InterpolationLaw, SnisConfig};
use annealab::measures::{Potential, PotentialSpec};
use annealab::schedule::{Schedule, ScheduleSpec};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: PotentialSpec,
    pub base: PotentialSpec,
    pub schedule: ScheduleSpec,
    pub kappa: f64,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub sampler: Option<SamplerSection>,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub study: Option<StudySection>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub oracle: Option<OracleSection>,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub steps: usize,
    pub chains: usize,
    #[serde(default)]
    pub eps_end: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_particles")]
    pub score_particles: usize,
    #[serde(default = "default_ess_threshold")]
    pub ess_threshold: f64,
}

fn default_particles() -> usize {
    4096
}

fn default_ess_threshold() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default = "default_t_grid")]
    pub t_grid: usize,
    pub methods: Vec<MethodSpec>,
}

fn default_t_grid() -> usize {
    41
}

/// One requested bound, tagged by method name.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    ScoreSup,
    HessianBand {
        #[serde(default)]
        structure: BandStructureSpec,
    },
    GaussianCompactBand,
    MutualConvexity,
    Miclo,
    Reflection,
    ConvexInfinity,
    Direct {
        #[serde(default)]
        epsilon: Option<f64>,
    },
    LyapunovStrict,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandStructureSpec {
    #[default]
    Generic,
    StrictlyConvex,
    Gaussian,
    Product,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub kappas: Vec<f64>,
    pub chains: usize,
    /// N(kappa) = ceil(step_budget / kappa^2).
    pub step_budget: f64,
    #[serde(default)]
    pub eps_end: Option<f64>,
    /// Attach the convolved-target LSI rate to each study row.
    #[serde(default)]
    pub lsi_convolved: Option<LsiConvolvedSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsiConvolvedSpec {
    pub sigma2: f64,
    pub tau2: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Truncation interval of the 1D grid measure.
    pub interval: (f64, f64),
    #[serde(default = "default_oracle_points")]
    pub grid_points: usize,
    /// Original times at which to evaluate the conditional law.
    pub t_values: Vec<f64>,
    /// Conditioning points.
    pub x_values: Vec<f64>,
}

fn default_oracle_points() -> usize {
    2000
}

/// A schema violation with the JSON field path, reported with exit code 2.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl ExperimentConfig {
    pub fn parse(raw: &str) -> Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(raw);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| SchemaError(format!("{}: {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), SchemaError> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(SchemaError(format!(
                "kappa: must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        if let Some(study) = &self.study {
            if !(self.kappa > 0.0 && self.kappa < 0.5) {
                return Err(SchemaError(format!(
                    "kappa: kappa must lie in (0, 1/2) for study mode, got {}",
                    self.kappa
                )));
            }
            for (i, k) in study.kappas.iter().enumerate() {
                if !(*k > 0.0 && *k < 0.5) {
                    return Err(SchemaError(format!(
                        "study.kappas[{i}]: kappa must lie in (0, 1/2) for study mode, got {k}"
                    )));
                }
            }
            if study.kappas.len() < 3 {
                return Err(SchemaError(
                    "study.kappas: need at least 3 values".to_string(),
                ));
            }
        }
        if self.target.dim() != self.base.dim() {
            return Err(SchemaError(format!(
                "base.dim: dimension {} does not match target dimension {}",
                self.base.dim(),
                self.target.dim()
            )));
        }
        Ok(())
    }

    pub fn build_law(&self) -> annealab::Result<InterpolationLaw> {
        InterpolationLaw::new(
            Potential::from_spec(self.target.clone())?,
            Potential::from_spec(self.base.clone())?,
            Schedule::from_spec(self.schedule.clone())?,
        )
    }

    pub fn snis_config(&self) -> SnisConfig {
        let (particles, ess_threshold) = self
            .sampler
            .as_ref()
            .map(|s| (s.score_particles, s.ess_threshold))
            .unwrap_or((default_particles(), default_ess_threshold()));
        SnisConfig {
            particles,
            seed: self.seed,
            ess_threshold,
            ..SnisConfig::default()
        }
    }
}
