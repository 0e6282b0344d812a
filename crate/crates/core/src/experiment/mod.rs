//! Replica orchestration: CCTL/DCTL runs, single-agent baselines, regret
//! traces, summaries, CSV output, and the flat config file.

mod batch;
mod config;
mod output;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Mode, SyncParams};
use crate::comm::CommLog;
use crate::env::{load_feature_file, EnvConfig, Environment, FeatureDataset};
use crate::error::{Error, Result};
use crate::solver::LassoConfig;
use crate::support::SupportSet;

pub use batch::{
    compare, run_batch, tune_lambda0, write_batch, write_comparison, BatchResult, TuningResult,
    TUNE_SEED_OFFSET,
};
pub use config::{load_config, parse_config, ConfigFile};
pub use output::{
    aggregate_replicas, emit_csv, read_trace_csv, write_comparison_csv, Summary, SummaryRow, TraceRow,
};
pub use run::{run_ctl, run_sa_lasso, run_th_lasso_single};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Cctl,
    Dctl,
    SaLasso,
    ThLassoSingle,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Cctl, Algo::Dctl, Algo::SaLasso, Algo::ThLassoSingle];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Cctl => "cctl",
            Algo::Dctl => "dctl",
            Algo::SaLasso => "sa_lasso",
            Algo::ThLassoSingle => "th_lasso_single",
        }
    }

    pub fn is_single_agent(self) -> bool {
        matches!(self, Algo::SaLasso | Algo::ThLassoSingle)
    }

    pub fn mode(self) -> Option<Mode> {
        match self {
            Algo::Cctl => Some(Mode::Centralized),
            Algo::Dctl => Some(Mode::Decentralized),
            _ => None,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown algorithm `{s}` (expected cctl, dctl, sa_lasso or th_lasso_single)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Synthetic environment parameters. With `data_file` set only `k` and
    /// `noise_sd` are used.
    pub env: EnvConfig,
    pub data_file: Option<PathBuf>,
    pub algo: Algo,
    pub n_agents: usize,
    pub horizon: usize,
    pub lambda0: f64,
    pub xi: f64,
    /// Solver tolerance and sweep cap; `lambda` is ignored.
    pub lasso: LassoConfig,
    pub replicas: usize,
    pub seed_base: u64,
    pub out_dir: PathBuf,
    /// When non-empty, `lambda0` is chosen from this grid on tuning seeds.
    pub lambda0_grid: Vec<f64>,
    pub tune_replicas: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig::default(),
            data_file: None,
            algo: Algo::Cctl,
            n_agents: 10,
            horizon: 1000,
            lambda0: 0.1,
            xi: 2.0,
            lasso: LassoConfig::default(),
            replicas: 10,
            seed_base: 0,
            out_dir: PathBuf::from("out"),
            lambda0_grid: Vec::new(),
            tune_replicas: 3,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.data_file.is_none() {
            self.env.validate().map_err(|e| Error::Config(e.to_string()))?;
        } else if self.env.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.env.k));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1".into());
        }
        if self.n_agents == 0 {
            return bad("n_agents must be >= 1".into());
        }
        if !(self.lambda0.is_finite() && self.lambda0 > 0.0) {
            return bad(format!("lambda0 must be > 0, got {}", self.lambda0));
        }
        if !(self.xi.is_finite() && self.xi > 1.0) {
            return bad(format!("xi must be > 1, got {}", self.xi));
        }
        if let Some(g) = self.lambda0_grid.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return bad(format!("lambda0_grid entries must be > 0, got {g}"));
        }
        if !self.lambda0_grid.is_empty() && self.tune_replicas == 0 {
            return bad("tune_replicas must be >= 1 when lambda0_grid is set".into());
        }
        LassoConfig {
            lambda: 0.0,
            ..self.lasso
        }
        .validate()
        .map_err(|e| Error::Config(e.to_string()))
    }

    /// Agents actually simulated: baselines always run a single agent.
    pub fn effective_agents(&self) -> usize {
        if self.algo.is_single_agent() {
            1
        } else {
            self.n_agents
        }
    }

    pub fn sync_params(&self) -> Option<SyncParams> {
        self.algo.mode().map(|mode| SyncParams {
            lambda0: self.lambda0,
            xi: self.xi,
            mode,
            n_agents: self.n_agents,
        })
    }

    /// Seed of evaluation replica `r`.
    pub fn replica_seed(&self, r: usize) -> u64 {
        self.seed_base.wrapping_add(r as u64)
    }
}

/// Snapshot of one sync round.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncRecord {
    pub t: usize,
    pub lambda: f64,
    pub threshold: f64,
    /// Each agent's thresholded Lasso support before any exchange.
    pub local: Vec<SupportSet>,
    /// The aggregated set handed to each agent.
    pub aggregated: Vec<SupportSet>,
}

/// Regret and communication record of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub algo: Algo,
    pub seed: u64,
    /// `N × T` instantaneous regret.
    pub instant: Vec<Vec<f64>>,
    /// `N × T` running sums of `instant`.
    pub cumulative: Vec<Vec<f64>>,
    pub comm: CommLog,
    pub syncs: Vec<SyncRecord>,
    /// Support each agent plays in at the end of the run.
    pub final_supports: Vec<SupportSet>,
    pub true_support: Option<SupportSet>,
    /// Empty-support fallbacks across all agents.
    pub fallbacks: usize,
}

impl RegretTrace {
    pub(crate) fn new(algo: Algo, seed: u64, instant: Vec<Vec<f64>>) -> Self {
        let cumulative = instant.iter().map(|row| prefix_sums(row)).collect();
        RegretTrace {
            algo,
            seed,
            instant,
            cumulative,
            comm: CommLog::new(),
            syncs: Vec::new(),
            final_supports: Vec::new(),
            true_support: None,
            fallbacks: 0,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.instant.len()
    }

    pub fn horizon(&self) -> usize {
        self.instant.first().map_or(0, Vec::len)
    }

    /// Cumulative regret at round `t` (1-based) averaged over agents.
    pub fn mean_cumulative(&self, t: usize) -> f64 {
        self.cumulative.iter().map(|c| c[t - 1]).sum::<f64>() / self.n_agents() as f64
    }

    pub fn final_mean_cumulative(&self) -> f64 {
        self.mean_cumulative(self.horizon())
    }

    /// Mean instantaneous regret over rounds `from..to` (0-based, half-open)
    /// and all agents.
    pub fn mean_instant(&self, from: usize, to: usize) -> f64 {
        let total: f64 = self.instant.iter().map(|r| r[from..to].iter().sum::<f64>()).sum();
        total / ((to - from) * self.n_agents()) as f64
    }
}

pub fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

/// A validated configuration with any feature file already loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    cfg: ExperimentConfig,
    dataset: Option<FeatureDataset>,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let dataset = match &cfg.data_file {
            Some(path) => Some(load_feature_file(path)?),
            None => None,
        };
        let exp = Experiment { cfg, dataset };
        // Surface K > items and similar problems before any simulation.
        exp.environment(exp.cfg.seed_base)?;
        Ok(exp)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn with_algo(&self, algo: Algo, lambda0: f64) -> Experiment {
        let mut e = self.clone();
        e.cfg.algo = algo;
        e.cfg.lambda0 = lambda0;
        e
    }

    pub fn environment(&self, seed: u64) -> Result<Environment> {
        match &self.dataset {
            Some(data) => Environment::features(data.clone(), self.cfg.env.k, self.cfg.env.noise_sd),
            None => Environment::synthetic(EnvConfig {
                seed,
                ..self.cfg.env.clone()
            }),
        }
    }

    pub fn run_replica(&self, seed: u64) -> Result<RegretTrace> {
        let env = self.environment(seed)?;
        run::run_with_env(&self.cfg, &env, seed)
    }

    /// All evaluation replicas, in parallel, in replica order.
    pub fn run(&self) -> Result<Vec<RegretTrace>> {
        self.run_seeds(
            &(0..self.cfg.replicas)
                .map(|r| self.cfg.replica_seed(r))
                .collect::<Vec<_>>(),
        )
    }

    pub fn run_seeds(&self, seeds: &[u64]) -> Result<Vec<RegretTrace>> {
        seeds.par_iter().map(|&s| self.run_replica(s)).collect()
    }
}
