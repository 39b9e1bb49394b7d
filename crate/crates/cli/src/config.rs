//! TOML run manifests. Every key is optional and command-line flags win.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use threshlasso::montecarlo::DgpConfig;
use threshlasso::{InterceptMode, ThresholdRule};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub run: RunSection,
    pub estimation: EstimationSection,
    pub simulate: SimulateSection,
    pub fit: FitSection,
    pub growth: GrowthSection,
    pub theory: TheorySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSection {
    pub lambda: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub theoretical_lambda: Option<f64>,
    /// `lo:hi:step`
    pub grid: Option<String>,
    pub exhaustive_tau: Option<bool>,
    pub rule: Option<ThresholdRule>,
    pub sequential: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub table: Option<String>,
    /// Custom designs, run instead of a named table.
    pub dgp: Vec<DgpConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub data: Option<PathBuf>,
    pub y_col: Option<String>,
    pub q_col: Option<String>,
    pub intercept: Option<InterceptMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthSection {
    pub data: Option<PathBuf>,
    pub fe: Option<bool>,
    pub horizon: Option<usize>,
    pub controls: Option<Vec<String>>,
    pub debt_col: Option<String>,
    pub country_col: Option<String>,
    pub year_col: Option<String>,
    pub gdp_col: Option<String>,
    pub from: Option<i32>,
    pub to: Option<i32>,
    pub years: Option<Vec<i32>>,
    pub growth_scale: Option<f64>,
    pub penalize_intercepts: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub m: Option<Vec<usize>>,
    pub rho: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
}
