//! Flat TOML config. Every key is optional and falls back to
//! [`ExperimentConfig::default`]; unknown keys are rejected.
//!
//! ```toml
//! algo = "cctl"
//! n_agents = 10
//! horizon = 1000
//! d = 100
//! k = 10
//! s0 = 5
//! rho2 = 0.3
//! lambda0 = 0.1
//! xi = 2.0
//! replicas = 10
//! seed_base = 0
//! out_dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Algo, ExperimentConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub algo: Option<Algo>,
    pub n_agents: Option<usize>,
    pub horizon: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub s0: Option<usize>,
    pub rho2: Option<f64>,
    pub s_a: Option<f64>,
    pub noise_sd: Option<f64>,
    pub lambda0: Option<f64>,
    pub xi: Option<f64>,
    pub lasso_tol: Option<f64>,
    pub lasso_max_iters: Option<usize>,
    pub replicas: Option<usize>,
    pub seed_base: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub data_file: Option<PathBuf>,
    pub lambda0_grid: Option<Vec<f64>>,
    pub tune_replicas: Option<usize>,
}

impl ConfigFile {
    pub fn resolve(self) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { c.$($dst).+ = v; })*
            };
        }
        set!(
            algo => algo,
            n_agents => n_agents,
            horizon => horizon,
            d => env.d,
            k => env.k,
            s0 => env.s0,
            rho2 => env.rho2,
            s_a => env.s_a,
            noise_sd => env.noise_sd,
            lambda0 => lambda0,
            xi => xi,
            lasso_tol => lasso.tol,
            lasso_max_iters => lasso.max_iters,
            replicas => replicas,
            seed_base => seed_base,
            out_dir => out_dir,
            lambda0_grid => lambda0_grid,
            tune_replicas => tune_replicas,
        );
        c.data_file = self.data_file;
        c
    }

    /// Every field populated from a resolved config.
    pub fn from_config(c: &ExperimentConfig) -> Self {
        ConfigFile {
            algo: Some(c.algo),
            n_agents: Some(c.n_agents),
            horizon: Some(c.horizon),
            d: Some(c.env.d),
            k: Some(c.env.k),
            s0: Some(c.env.s0),
            rho2: Some(c.env.rho2),
            s_a: Some(c.env.s_a),
            noise_sd: Some(c.env.noise_sd),
            lambda0: Some(c.lambda0),
            xi: Some(c.xi),
            lasso_tol: Some(c.lasso.tol),
            lasso_max_iters: Some(c.lasso.max_iters),
            replicas: Some(c.replicas),
            seed_base: Some(c.seed_base),
            out_dir: Some(c.out_dir.clone()),
            data_file: c.data_file.clone(),
            lambda0_grid: Some(c.lambda0_grid.clone()),
            tune_replicas: Some(c.tune_replicas),
        }
    }
}

impl ExperimentConfig {
    /// The fully resolved config as flat TOML, as written to `config.echo`.
    pub fn echo(&self) -> String {
        toml::to_string(&ConfigFile::from_config(self)).expect("flat config always serializes")
    }
}

/// Parses and validates config text. Relative `data_file` paths are resolved
/// against `base_dir` when given.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<ExperimentConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut cfg = file.resolve();
    if let (Some(base), Some(data)) = (base_dir, cfg.data_file.as_mut()) {
        if data.is_relative() {
            *data = base.join(&*data);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.parent()).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
