//! Run configuration, read from a TOML file and overridden on the command line.

use std::path::{Path, PathBuf};

use cojump::{AssumptionIndices, Contrast, Method, TuningParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::weeks::WeekGrouping;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "COJUMP_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tuning: TuningParams,
    pub assume: AssumptionIndices,
    pub tests: Vec<Method>,
    /// Jump-size filters `a`, as log-return fractions (0.002 means 0.2%).
    pub sweep: Vec<f64>,
    /// Nominal levels for per-week reports.
    pub alphas: Vec<f64>,
    pub grouping: WeekGrouping,
    pub contrast: Contrast,
    pub per_day_thresholds: bool,
    pub n_sim: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tuning: TuningParams::default(),
            assume: AssumptionIndices::default(),
            tests: Method::ALL.to_vec(),
            sweep: vec![0.0, 0.002, 0.003, 0.004],
            alphas: vec![0.05, 0.10],
            grouping: WeekGrouping::default(),
            contrast: Contrast::LogLikelihoodRatio,
            per_day_thresholds: true,
            n_sim: 1000,
            out_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display()))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.tuning.validate()?;
        if self.sweep.is_empty() {
            return Err(CliError::config("sweep must contain at least one value"));
        }
        if self.sweep.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(CliError::config("sweep values must be nonnegative"));
        }
        if self.sweep.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("sweep values must be strictly ascending"));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(CliError::config("alphas must lie in (0, 1)"));
        }
        if self.tests.is_empty() {
            return Err(CliError::config("select at least one test"));
        }
        if self.n_sim < 100 {
            return Err(CliError::config("n_sim must be at least 100"));
        }
        Ok(())
    }

    /// Applies the output-directory precedence: explicit flag, then the
    /// environment variable, then the config file.
    pub fn resolve_out_dir(&mut self, flag: Option<PathBuf>) {
        if let Some(dir) = flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)) {
            self.out_dir = dir;
        }
    }
}
