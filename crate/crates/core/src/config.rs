//! Run configuration shared by the command-line subcommands.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::certify::{CertifyOptions, UdaMode};
use crate::error::{Error, Result};
use crate::probes::{default_t_grid, validate_t_grid};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "MC_CONFIG";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rank_tolerance: f64,
    pub solver_tolerance: f64,
    #[serde(rename = "coeff_bound_R")]
    pub coeff_bound_r: f64,
    pub t_grid: Vec<f64>,
    /// `None` lets each subcommand pick its natural format.
    pub output_format: Option<OutputFormat>,
    pub skip_uda_check: bool,
    pub jobs: Option<usize>,
    pub run_log_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rank_tolerance: 1e-9,
            solver_tolerance: 1e-7,
            coeff_bound_r: 1e3,
            t_grid: default_t_grid(),
            output_format: None,
            skip_uda_check: false,
            jobs: None,
            run_log_dir: None,
        }
    }
}

impl RunConfig {
    /// Reads TOML or JSON, chosen by extension (`.toml`, otherwise JSON).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?
        } else {
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de)
                .map_err(|e| Error::InvalidInput(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `explicit`, else the file named by `MC_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_tolerance", self.rank_tolerance),
            ("solver_tolerance", self.solver_tolerance),
            ("coeff_bound_R", self.coeff_bound_r),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidInput("jobs must be at least 1".into()));
        }
        validate_t_grid(&self.t_grid).map_err(|e| Error::InvalidInput(format!("t_grid: {e}")))
    }

    pub fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            rank_tol: self.rank_tolerance,
            solver_tol: self.solver_tolerance,
            coeff_bound: self.coeff_bound_r,
            uda: if self.skip_uda_check {
                UdaMode::Skip
            } else {
                UdaMode::Auto
            },
            ..CertifyOptions::default()
        }
    }
}
