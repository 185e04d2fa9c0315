//! Strict JSON run configuration: unknown keys are rejected, matrices are
//! flat row-major arrays, and every run embeds its resolved config plus a
//! content hash in the manifest so it can be replayed bit-for-bit.

use mucogarch_core::levy::{CompoundPoissonSpec, JumpLaw};
use mucogarch_core::matcore::{PsdMatrix, SymMatrix};
use mucogarch_core::process::ModelParams;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelCfg,
    pub noise: NoiseCfg,
    pub task: TaskCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCfg {
    pub dim: usize,
    /// Row-major `dim * dim` entries.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCfg {
    pub rate: f64,
    pub law: LawCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawCfg {
    IsotropicGaussian { sigma: f64 },
    BallUniform { radius: f64 },
    PointMasses { weights: Vec<f64>, points: Vec<Vec<f64>> },
    TruncatedGaussian { sigma: f64, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Y0Cfg {
    Zero,
    ScaledIdentity { scale: f64 },
    /// Row-major symmetric entries.
    Matrix { entries: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridCfg {
    Points { points: Vec<f64> },
    Uniform { n: usize, stop: f64 },
}

impl GridCfg {
    pub fn times(&self) -> Vec<f64> {
        match self {
            GridCfg::Points { points } => points.clone(),
            GridCfg::Uniform { n, stop } => (0..=*n)
                .map(|i| stop * i as f64 / (*n).max(1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionSel {
    All,
    LogStationarity,
    StationaryMoment,
    GeometricErgodicity,
    FirstOrder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskCfg {
    Simulate {
        horizon: f64,
        grid: GridCfg,
        y0: Y0Cfg,
        seed: u64,
        #[serde(default)]
        with_price: bool,
    },
    Check {
        condition: ConditionSel,
        #[serde(default)]
        p: Option<f64>,
        #[serde(default)]
        k: Option<u32>,
        n_mc: usize,
        seed: u64,
    },
    GeneratorEvaluate {
        y0: Y0Cfg,
        p: f64,
        n_mc: usize,
        seed: u64,
    },
    GeneratorDynkin {
        y0: Y0Cfg,
        p: f64,
        h: f64,
        n_paths: usize,
        seed: u64,
    },
    GeneratorFosterScan {
        p: f64,
        r_max: f64,
        n_states: usize,
        n_mc: usize,
        seed: u64,
    },
    GeneratorGronwall {
        y0: Y0Cfg,
        p: f64,
        t_grid: GridCfg,
        n_paths: usize,
        seed: u64,
    },
    Coupling {
        initial_states: Vec<Y0Cfg>,
        p: f64,
        horizon: f64,
        #[serde(default)]
        burn_in: Option<f64>,
        grid: GridCfg,
        n_paths: usize,
        seed: u64,
    },
    Moments {
        initial_states: Vec<Y0Cfg>,
        p: f64,
        horizon: f64,
        #[serde(default)]
        burn_in: Option<f64>,
        grid: GridCfg,
        n_paths: usize,
        seed: u64,
    },
    Multistart {
        initial_states: Vec<Y0Cfg>,
        p: f64,
        horizon: f64,
        n_paths: usize,
        seed: u64,
    },
    RankProbe {
        y0: Y0Cfg,
        l: usize,
        n_trials: usize,
        seed: u64,
        #[serde(default = "default_true")]
        enforce_invertible: bool,
    },
    Aperiodicity {
        k_bound: f64,
        t_grid: GridCfg,
    },
}

fn default_true() -> bool {
    true
}

impl TaskCfg {
    pub fn type_name(&self) -> &'static str {
        match self {
            TaskCfg::Simulate { .. } => "simulate",
            TaskCfg::Check { .. } => "check",
            TaskCfg::GeneratorEvaluate { .. } => "generator_evaluate",
            TaskCfg::GeneratorDynkin { .. } => "generator_dynkin",
            TaskCfg::GeneratorFosterScan { .. } => "generator_foster_scan",
            TaskCfg::GeneratorGronwall { .. } => "generator_gronwall",
            TaskCfg::Coupling { .. } => "coupling",
            TaskCfg::Moments { .. } => "moments",
            TaskCfg::Multistart { .. } => "multistart",
            TaskCfg::RankProbe { .. } => "rank_probe",
            TaskCfg::Aperiodicity { .. } => "aperiodicity",
        }
    }

    /// Replaces the task seed (the `--seed` override).
    pub fn set_seed(&mut self, new_seed: u64) {
        match self {
            TaskCfg::Simulate { seed, .. }
            | TaskCfg::Check { seed, .. }
            | TaskCfg::GeneratorEvaluate { seed, .. }
            | TaskCfg::GeneratorDynkin { seed, .. }
            | TaskCfg::GeneratorFosterScan { seed, .. }
            | TaskCfg::GeneratorGronwall { seed, .. }
            | TaskCfg::Coupling { seed, .. }
            | TaskCfg::Moments { seed, .. }
            | TaskCfg::Multistart { seed, .. }
            | TaskCfg::RankProbe { seed, .. } => *seed = new_seed,
            TaskCfg::Aperiodicity { .. } => {}
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            TaskCfg::Simulate { seed, .. }
            | TaskCfg::Check { seed, .. }
            | TaskCfg::GeneratorEvaluate { seed, .. }
            | TaskCfg::GeneratorDynkin { seed, .. }
            | TaskCfg::GeneratorFosterScan { seed, .. }
            | TaskCfg::GeneratorGronwall { seed, .. }
            | TaskCfg::Coupling { seed, .. }
            | TaskCfg::Moments { seed, .. }
            | TaskCfg::Multistart { seed, .. }
            | TaskCfg::RankProbe { seed, .. } => Some(*seed),
            TaskCfg::Aperiodicity { .. } => None,
        }
    }
}

impl RunConfig {
    pub fn to_model_params(&self) -> Result<ModelParams, CliError> {
        let d = self.model.dim;
        if d == 0 {
            return Err(CliError::Validation("model.dim must be positive".into()));
        }
        for (name, m) in [("a", &self.model.a), ("b", &self.model.b), ("c", &self.model.c)] {
            if m.len() != d * d {
                return Err(CliError::Validation(format!(
                    "model.{name} must have {} entries (row-major {d}x{d}), got {}",
                    d * d,
                    m.len()
                )));
            }
        }
        let a = DMatrix::from_row_slice(d, d, &self.model.a);
        let b = DMatrix::from_row_slice(d, d, &self.model.b);
        let c = SymMatrix::from_row_major(d, &self.model.c)
            .map_err(|e| CliError::Validation(format!("model.c: {e}")))?;
        ModelParams::new(a, b, c).map_err(|e| CliError::Validation(format!("model: {e}")))
    }

    pub fn to_noise_spec(&self) -> Result<CompoundPoissonSpec, CliError> {
        let law = match &self.noise.law {
            LawCfg::IsotropicGaussian { sigma } => JumpLaw::IsotropicGaussian { sigma: *sigma },
            LawCfg::BallUniform { radius } => JumpLaw::BallUniform { radius: *radius },
            LawCfg::PointMasses { weights, points } => JumpLaw::PointMasses {
                weights: weights.clone(),
                points: points.clone(),
            },
            LawCfg::TruncatedGaussian { sigma, radius } => JumpLaw::TruncatedGaussian {
                sigma: *sigma,
                radius: *radius,
            },
        };
        CompoundPoissonSpec::new(self.noise.rate, self.model.dim, law)
            .map_err(|e| CliError::Validation(format!("noise: {e}")))
    }

    pub fn build_y0(&self, y0: &Y0Cfg) -> Result<PsdMatrix, CliError> {
        let d = self.model.dim;
        let res = match y0 {
            Y0Cfg::Zero => Ok(PsdMatrix::zeros(d)),
            Y0Cfg::ScaledIdentity { scale } => PsdMatrix::scaled_identity(d, *scale),
            Y0Cfg::Matrix { entries } => SymMatrix::from_row_major(d, entries)
                .and_then(PsdMatrix::try_new),
        };
        res.map_err(|e| CliError::Validation(format!("initial state: {e}")))
    }

    /// Canonical JSON serialization (struct field order) used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A manifest is the resolved config plus its content hash; it parses
/// back into a config, so any manifest can be re-run directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_sha256: String,
}

impl Manifest {
    pub fn for_config(config: RunConfig) -> Self {
        let config_sha256 = config.content_hash();
        Self {
            config,
            config_sha256,
        }
    }
}

/// Loads either a bare config or a manifest (`{"config": ...}`) and
/// applies dotted-path overrides before the strict parse.
pub fn load_config(raw: &str, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let mut value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| CliError::Validation(format!("config parse: {e}")))?;
    if let Some(inner) = value.get("config") {
        value = inner.clone();
    }
    for (path, raw_val) in overrides {
        apply_override(&mut value, path, raw_val)?;
    }
    serde_json::from_value(value)
        .map_err(|e| CliError::Validation(format!("config parse: {e}")))
}

/// Sets `value` at a dotted path like `noise.rate` or `task.p`. The raw
/// string is parsed as JSON when possible, else kept as a string.
fn apply_override(
    value: &mut serde_json::Value,
    path: &str,
    raw_val: &str,
) -> Result<(), CliError> {
    let parsed: serde_json::Value = serde_json::from_str(raw_val)
        .unwrap_or_else(|_| serde_json::Value::String(raw_val.to_string()));
    let mut cursor = value;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() {
        return Err(CliError::Validation("empty override path".into()));
    }
    for seg in &segments[..segments.len() - 1] {
        cursor = cursor
            .get_mut(*seg)
            .ok_or_else(|| CliError::Validation(format!("override path not found: {path}")))?;
    }
    let last = segments[segments.len() - 1];
    match cursor {
        serde_json::Value::Object(map) => {
            map.insert(last.to_string(), parsed);
            Ok(())
        }
        _ => Err(CliError::Validation(format!(
            "override path {path} does not land in an object"
        ))),
    }
}
