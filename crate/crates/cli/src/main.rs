use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ctl_core::experiment::{
    compare, load_config, run_batch, write_batch, write_comparison, Algo, BatchResult, Experiment,
    ExperimentConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "ctl",
    version,
    about = "Cooperative thresholded Lasso bandit experiments"
)]
struct Cli {
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// Log per-sync detail.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one algorithm over the configured replicas.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algo: Option<Algo>,
        /// Seed of the first replica.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several algorithms on matched environment streams.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated list, e.g. `cctl,dctl,sa_lasso,th_lasso_single`.
        #[arg(long, value_delimiter = ',', required = true)]
        algos: Vec<Algo>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
}

fn build_experiment(common: &Common, algo: Option<Algo>, seed: Option<u64>) -> anyhow::Result<Experiment> {
    let mut cfg: ExperimentConfig = load_config(&common.config)?;
    if let Some(a) = algo {
        cfg.algo = a;
    }
    if let Some(s) = seed {
        cfg.seed_base = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(r) = common.replicas {
        cfg.replicas = r;
    }
    Ok(Experiment::new(cfg)?)
}

fn report(b: &BatchResult) {
    let comm = b.summary.comm_totals.iter().sum::<usize>() as f64 / b.summary.comm_totals.len() as f64;
    println!(
        "{:<16} lambda0={:<6} final_cum_regret={:.3} (sd {:.3}, se {:.3}) indices={:.1}",
        b.algo.as_str(),
        b.lambda0,
        b.summary.final_mean(),
        b.summary.final_sd(),
        b.summary.final_se(),
        comm
    );
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { common, algo, seed } => {
            let exp = build_experiment(&common, algo, seed)?;
            let cfg = exp.config();
            log::info!(
                "running {} with N={} T={} over {} replicas",
                cfg.algo,
                cfg.effective_agents(),
                cfg.horizon,
                cfg.replicas
            );
            let batch = run_batch(&exp, cfg.algo)?;
            write_batch(&exp, &batch, &cfg.out_dir)
                .with_context(|| format!("writing results to {}", cfg.out_dir.display()))?;
            report(&batch);
            log::info!("results written to {}", cfg.out_dir.display());
        }
        Command::Compare { common, algos, seed } => {
            let exp = build_experiment(&common, None, seed)?;
            let out: &Path = &exp.config().out_dir;
            let batches = compare(&exp, &algos)?;
            write_comparison(&exp, &batches, out)
                .with_context(|| format!("writing results to {}", out.display()))?;
            batches.iter().for_each(report);
            log::info!("results written to {}", out.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let config = err
        .chain()
        .find_map(|e| e.downcast_ref::<ctl_core::Error>())
        .is_some_and(ctl_core::Error::is_config_error);
    if config {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (_, true) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
