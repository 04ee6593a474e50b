//! Run configuration and calibration-constants files. Both are strict JSON:
//! unknown keys are rejected so typos fail loudly instead of silently using
//! defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use curie_weiss::regimes::{self, ErrorConstants};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    pub intervals: Option<IntervalConfig>,
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub confidence_level: Option<f64>,
    pub exact_mle: Option<bool>,
    pub spins: Option<bool>,
    pub calibration: Option<CalibrationGridConfig>,
    pub verify: Option<VerifyConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub group_sizes: Vec<u64>,
    pub couplings: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub d_high: Option<f64>,
    pub d_low: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationGridConfig {
    pub betas_high: Option<Vec<f64>>,
    pub betas_low: Option<Vec<f64>>,
    pub sizes: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub replications: Option<usize>,
    pub sample_sizes: Option<Vec<usize>>,
    pub group_size: Option<u64>,
    pub seed: Option<u64>,
}

/// Schema of the file written by `cw calibrate` and read via CW_CONSTANTS.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsFile {
    pub schema_version: u32,
    pub b1: f64,
    pub b2: f64,
    pub d_high: f64,
    pub d_low: f64,
    pub grid: ConstantsGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsGrid {
    pub betas_high: Vec<f64>,
    pub betas_low: Vec<f64>,
    pub sizes: Vec<u64>,
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::input(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("config {}: {e}", p.display())))
        }
    }
}

fn load_constants_file(path: &Path) -> Result<ConstantsFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read constants {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("constants {}: {e}", path.display())))
}

/// Fully resolved interval settings and where each number came from.
#[derive(Debug, Clone)]
pub struct ResolvedIntervals {
    pub b1: f64,
    pub b2: f64,
    pub constants: ErrorConstants,
    pub source: String,
}

/// Resolution order: explicit flags, then the config file, then the file
/// named by CW_CONSTANTS, then built-in defaults.
pub fn resolve_intervals(
    flag_b1: Option<f64>,
    flag_b2: Option<f64>,
    config: &RunConfig,
) -> Result<ResolvedIntervals, CliError> {
    let env_file = match std::env::var_os("CW_CONSTANTS") {
        Some(path) => Some(load_constants_file(Path::new(&path))?),
        None => None,
    };
    let iv = config.intervals.clone().unwrap_or_default();

    let pick = |flag: Option<f64>, cfg: Option<f64>, env: Option<f64>, default: f64| {
        flag.or(cfg).or(env).unwrap_or(default)
    };
    let b1 = pick(
        flag_b1,
        iv.b1,
        env_file.as_ref().map(|f| f.b1),
        regimes::DEFAULT_B1,
    );
    let b2 = pick(
        flag_b2,
        iv.b2,
        env_file.as_ref().map(|f| f.b2),
        regimes::DEFAULT_B2,
    );

    let defaults = ErrorConstants::default_calibrated();
    let (d_high, dh_src) = match (iv.d_high, &env_file) {
        (Some(v), _) => (v, "config"),
        (None, Some(f)) => (f.d_high, "env"),
        (None, None) => (defaults.d_high, "default"),
    };
    let (d_low, dl_src) = match (iv.d_low, &env_file) {
        (Some(v), _) => (v, "config"),
        (None, Some(f)) => (f.d_low, "env"),
        (None, None) => (defaults.d_low, "default"),
    };
    let source = if dh_src == dl_src {
        match dh_src {
            "env" => format!(
                "CW_CONSTANTS={}",
                std::env::var("CW_CONSTANTS").unwrap_or_default()
            ),
            s => s.to_string(),
        }
    } else {
        format!("mixed ({dh_src}/{dl_src})")
    };
    let constants = ErrorConstants::new(d_high, d_low).map_err(CliError::Lib)?;
    Ok(ResolvedIntervals {
        b1,
        b2,
        constants,
        source,
    })
}
