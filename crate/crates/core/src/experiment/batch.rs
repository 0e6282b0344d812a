//! Multi-replica batches: optional λ₀ tuning, matched-seed comparisons, and
//! writing results to disk.

use std::path::Path;

use super::{aggregate_replicas, emit_csv, write_comparison_csv, Algo, Experiment, RegretTrace, Summary};
use crate::error::Result;

/// Tuning replicas use seeds offset by this much from `seed_base`, so they
/// never coincide with evaluation replicas.
pub const TUNE_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub algo: Algo,
    pub best: f64,
    /// `(λ₀, mean final cumulative regret per agent)` for every grid value.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the grid value with the lowest mean final cumulative regret over
/// `replicas` tuning seeds. Ties go to the earlier grid entry.
pub fn tune_lambda0(exp: &Experiment, algo: Algo, grid: &[f64], replicas: usize) -> Result<TuningResult> {
    let base = exp.config().seed_base.wrapping_add(TUNE_SEED_OFFSET);
    let seeds: Vec<u64> = (0..replicas as u64).map(|r| base.wrapping_add(r)).collect();
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda0 in grid {
        let traces = exp.with_algo(algo, lambda0).run_seeds(&seeds)?;
        let mean = traces.iter().map(RegretTrace::final_mean_cumulative).sum::<f64>() / traces.len() as f64;
        log::info!("tuning {algo}: lambda0 = {lambda0} -> final regret {mean:.3}");
        scores.push((lambda0, mean));
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(l, s)| match acc {
            Some((_, bs)) if bs <= s => acc,
            _ => Some((l, s)),
        })
        .map_or(exp.config().lambda0, |(l, _)| l);
    Ok(TuningResult { algo, best, scores })
}

/// Outcome of one algorithm's evaluation replicas.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub algo: Algo,
    pub lambda0: f64,
    pub tuning: Option<TuningResult>,
    pub traces: Vec<RegretTrace>,
    pub summary: Summary,
}

/// Runs `algo` on the evaluation seeds, tuning λ₀ first when the config
/// carries a grid.
pub fn run_batch(exp: &Experiment, algo: Algo) -> Result<BatchResult> {
    let cfg = exp.config();
    let tuning = if cfg.lambda0_grid.is_empty() {
        None
    } else {
        Some(tune_lambda0(exp, algo, &cfg.lambda0_grid, cfg.tune_replicas)?)
    };
    let lambda0 = tuning.as_ref().map_or(cfg.lambda0, |t| t.best);
    let traces = exp.with_algo(algo, lambda0).run()?;
    let summary = aggregate_replicas(&traces)?;
    Ok(BatchResult {
        algo,
        lambda0,
        tuning,
        traces,
        summary,
    })
}

/// Matched-seed comparison: every algorithm sees the same replica seeds and
/// therefore the same parameter, context, and noise streams.
pub fn compare(exp: &Experiment, algos: &[Algo]) -> Result<Vec<BatchResult>> {
    algos.iter().map(|&a| run_batch(exp, a)).collect()
}

/// Writes one batch into `dir`, echoing the config with the λ₀ actually used.
pub fn write_batch(exp: &Experiment, batch: &BatchResult, dir: &Path) -> Result<()> {
    let mut echo = exp.with_algo(batch.algo, batch.lambda0).config().echo();
    if let Some(t) = &batch.tuning {
        echo.push_str("\n# lambda0 tuning (lambda0, mean final cumulative regret)\n");
        for (l, s) in &t.scores {
            echo.push_str(&format!("# {l} {s}\n"));
        }
    }
    emit_csv(&batch.summary, &batch.traces, dir, &echo)
}

/// Writes each batch under `out_dir/<algo>/` plus `out_dir/comparison.csv`.
pub fn write_comparison(exp: &Experiment, batches: &[BatchResult], out_dir: &Path) -> Result<()> {
    for b in batches {
        write_batch(exp, b, &out_dir.join(b.algo.as_str()))?;
    }
    let rows: Vec<_> = batches
        .iter()
        .map(|b| (b.algo, b.lambda0, b.summary.clone()))
        .collect();
    write_comparison_csv(&out_dir.join("comparison.csv"), &rows)
}
