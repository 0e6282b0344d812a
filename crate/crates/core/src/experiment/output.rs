use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Algo, RegretTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub mean_cum_regret: f64,
    pub sd_cum_regret: f64,
}

/// Replica statistics of agent-averaged cumulative regret.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Total transmitted indices, one entry per replica.
    pub comm_totals: Vec<usize>,
    /// Agent-averaged cumulative regret at the horizon, one entry per replica.
    pub finals: Vec<f64>,
}

impl Summary {
    pub fn replicas(&self) -> usize {
        self.finals.len()
    }

    pub fn final_mean(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.mean_cum_regret)
    }

    /// Population standard deviation across replicas at the horizon.
    pub fn final_sd(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.sd_cum_regret)
    }

    /// Standard error of the final mean (sample standard deviation / √n).
    pub fn final_se(&self) -> f64 {
        let n = self.finals.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.final_mean();
        let var = self.finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }
}

/// Per-round mean and population standard deviation over replicas of the
/// agent-averaged cumulative regret.
pub fn aggregate_replicas(traces: &[RegretTrace]) -> Result<Summary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Shape("no traces to aggregate".into()))?;
    let (n, horizon) = (first.n_agents(), first.horizon());
    if let Some(bad) = traces
        .iter()
        .find(|t| t.n_agents() != n || t.horizon() != horizon)
    {
        return Err(Error::Shape(format!(
            "trace for seed {} is {}x{}, expected {n}x{horizon}",
            bad.seed,
            bad.n_agents(),
            bad.horizon()
        )));
    }
    let r = traces.len() as f64;
    let rows = (1..=horizon)
        .map(|t| {
            let vals: Vec<f64> = traces.iter().map(|tr| tr.mean_cumulative(t)).collect();
            let mean = vals.iter().sum::<f64>() / r;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r;
            SummaryRow {
                t,
                mean_cum_regret: mean,
                sd_cum_regret: var.sqrt(),
            }
        })
        .collect();
    Ok(Summary {
        rows,
        comm_totals: traces.iter().map(|t| t.comm.total_indices()).collect(),
        finals: traces.iter().map(RegretTrace::final_mean_cumulative).collect(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes `summary.csv`, `trace_<r>.csv`, `comm_<r>.csv` for each replica
/// index `r`, and `config.echo`.
pub fn emit_csv(summary: &Summary, traces: &[RegretTrace], out_dir: &Path, config_echo: &str) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    write_file(&out_dir.join("summary.csv"), |w| {
        writeln!(w, "t,mean_cum_regret,sd_cum_regret")?;
        for row in &summary.rows {
            writeln!(w, "{},{},{}", row.t, row.mean_cum_regret, row.sd_cum_regret)?;
        }
        Ok(())
    })?;

    for (r, trace) in traces.iter().enumerate() {
        write_file(&out_dir.join(format!("trace_{r}.csv")), |w| {
            writeln!(w, "t,agent,inst_regret,cum_regret")?;
            for t in 0..trace.horizon() {
                for agent in 0..trace.n_agents() {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        t + 1,
                        agent,
                        trace.instant[agent][t],
                        trace.cumulative[agent][t]
                    )?;
                }
            }
            Ok(())
        })?;
        write_file(&out_dir.join(format!("comm_{r}.csv")), |w| {
            trace.comm.write_csv(w)
        })?;
    }

    write_file(&out_dir.join("config.echo"), |w| {
        w.write_all(config_echo.as_bytes())
    })
}

/// One parsed `trace_<r>.csv` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub agent: usize,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err(i + 1, "expected 4 fields"));
        }
        rows.push(TraceRow {
            t: f[0].parse().map_err(|_| err(i + 1, "bad t"))?,
            agent: f[1].parse().map_err(|_| err(i + 1, "bad agent"))?,
            inst_regret: f[2].parse().map_err(|_| err(i + 1, "bad inst_regret"))?,
            cum_regret: f[3].parse().map_err(|_| err(i + 1, "bad cum_regret"))?,
        });
    }
    Ok(rows)
}

/// `comparison.csv`: one row per algorithm with its final regret statistics.
pub fn write_comparison_csv(path: &Path, rows: &[(Algo, f64, Summary)]) -> Result<()> {
    write_file(path, |w| {
        writeln!(
            w,
            "algo,lambda0,mean_final_cum_regret,sd_final_cum_regret,se_final_cum_regret,mean_indices_transmitted"
        )?;
        for (algo, lambda0, s) in rows {
            let comm = s.comm_totals.iter().sum::<usize>() as f64 / s.comm_totals.len().max(1) as f64;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                algo,
                lambda0,
                s.final_mean(),
                s.final_sd(),
                s.final_se(),
                comm
            )?;
        }
        Ok(())
    })
}
