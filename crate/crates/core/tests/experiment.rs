use std::fs;
use std::path::Path;

use ctl_core::env::EnvConfig;
use ctl_core::experiment::{
    aggregate_replicas, emit_csv, read_trace_csv, run_ctl, run_sa_lasso, run_th_lasso_single, Algo,
    Experiment, ExperimentConfig,
};
use ctl_core::SupportSet;

fn cfg(algo: Algo) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig {
            d: 30,
            k: 5,
            s0: 3,
            ..Default::default()
        },
        algo,
        n_agents: 4,
        horizon: 128,
        lambda0: 0.05,
        replicas: 2,
        ..Default::default()
    }
}

#[test]
fn same_seed_same_trace_other_seed_differs() {
    for algo in Algo::ALL {
        let exp = Experiment::new(cfg(algo)).unwrap();
        let a = exp.run_replica(11).unwrap();
        let b = exp.run_replica(11).unwrap();
        let c = exp.run_replica(12).unwrap();
        assert_eq!(a, b, "{algo}");
        assert_ne!(a.instant, c.instant, "{algo}");
    }
}

#[test]
fn traces_are_nonnegative_and_cumulative_is_monotone() {
    for algo in Algo::ALL {
        let tr = Experiment::new(cfg(algo)).unwrap().run_replica(3).unwrap();
        assert_eq!(tr.n_agents(), cfg(algo).effective_agents());
        for (inst, cum) in tr.instant.iter().zip(&tr.cumulative) {
            assert!(inst.iter().all(|r| *r >= 0.0));
            assert!(cum.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn algorithms_share_environment_streams() {
    let traces: Vec<_> = Algo::ALL
        .iter()
        .map(|&a| Experiment::new(cfg(a)).unwrap().run_replica(21).unwrap())
        .collect();
    // Every algorithm starts from a zero estimate, so agent 0 plays arm 0 in
    // the first round of the same context draw.
    let first = traces[0].instant[0][0];
    for tr in &traces {
        assert_eq!(tr.instant[0][0], first, "{}", tr.algo);
        assert_eq!(tr.true_support, traces[0].true_support);
    }
}

#[test]
fn comm_entries_match_schedule_and_baselines_send_nothing() {
    for algo in Algo::ALL {
        let tr = Experiment::new(cfg(algo)).unwrap().run_replica(5).unwrap();
        let expected = if algo.is_single_agent() { 0 } else { 7 };
        assert_eq!(tr.comm.len(), expected, "{algo}");
        let ts: Vec<usize> = tr.comm.rounds().iter().map(|r| r.t).collect();
        if !algo.is_single_agent() {
            assert_eq!(ts, vec![2, 4, 8, 16, 32, 64, 128]);
        }
    }
}

#[test]
fn lone_agent_cctl_and_dctl_differ() {
    let mut c = cfg(Algo::Cctl);
    c.n_agents = 1;
    c.horizon = 256;
    let mut d = c.clone();
    d.algo = Algo::Dctl;
    let a = run_ctl(&c, 8).unwrap();
    let b = run_ctl(&d, 8).unwrap();
    for (sa, sb) in a.syncs.iter().zip(&b.syncs) {
        assert_eq!(2.0 * sa.threshold, sb.threshold);
    }
    assert!(a.syncs.iter().zip(&b.syncs).any(|(x, y)| x.local != y.local));
    assert!(b.comm.rounds().iter().all(|r| r.messages == 0));
    assert!(a.comm.rounds().iter().all(|r| r.messages == 2));
}

#[test]
fn sa_lasso_tail_regret_drops() {
    let c = ExperimentConfig {
        env: EnvConfig {
            d: 20,
            k: 5,
            s0: 3,
            rho2: 0.0,
            noise_sd: 0.0,
            ..Default::default()
        },
        algo: Algo::SaLasso,
        horizon: 400,
        ..cfg(Algo::SaLasso)
    };
    let tr = run_sa_lasso(&c, 4).unwrap();
    assert!(tr.comm.is_empty());
    assert!(tr.mean_instant(360, 400) < tr.mean_instant(0, 40));
}

#[test]
fn th_lasso_recovers_support_on_noiseless_instance() {
    let c = ExperimentConfig {
        env: EnvConfig {
            d: 30,
            k: 6,
            s0: 3,
            rho2: 0.0,
            noise_sd: 0.0,
            ..Default::default()
        },
        algo: Algo::ThLassoSingle,
        horizon: 300,
        ..cfg(Algo::ThLassoSingle)
    };
    for seed in 0..3 {
        let tr = run_th_lasso_single(&c, seed).unwrap();
        let truth = tr.true_support.as_ref().unwrap();
        assert!(tr.final_supports[0].is_superset_of(truth), "seed {seed}");
    }
}

#[test]
fn th_lasso_falls_back_when_threshold_kills_everything() {
    let c = ExperimentConfig {
        lambda0: 1e3,
        horizon: 20,
        ..cfg(Algo::ThLassoSingle)
    };
    let tr = run_th_lasso_single(&c, 1).unwrap();
    assert_eq!(tr.horizon(), 20);
    assert_eq!(tr.fallbacks, 19);
    assert_eq!(tr.final_supports[0], SupportSet::singleton(0));
}

fn parse_summary(path: &Path) -> Vec<(usize, f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn summary_matches_recomputation_from_trace_files() {
    let c = ExperimentConfig {
        replicas: 10,
        horizon: 60,
        ..cfg(Algo::Dctl)
    };
    let exp = Experiment::new(c.clone()).unwrap();
    let traces = exp.run().unwrap();
    let summary = aggregate_replicas(&traces).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_csv(&summary, &traces, dir.path(), &c.echo()).unwrap();

    // Agent average per round, per replica, straight from the CSV rows.
    let mut per_replica = vec![vec![0.0; c.horizon]; c.replicas];
    for (r, rows) in per_replica.iter_mut().enumerate() {
        for row in read_trace_csv(&dir.path().join(format!("trace_{r}.csv"))).unwrap() {
            rows[row.t - 1] += row.cum_regret / c.n_agents as f64;
        }
    }
    let written = parse_summary(&dir.path().join("summary.csv"));
    assert_eq!(written.len(), c.horizon);
    for (t, mean, sd) in written {
        let vals: Vec<f64> = per_replica.iter().map(|r| r[t - 1]).collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!((mean - m).abs() <= 1e-9 * m.abs().max(1.0), "t={t}");
        assert!((sd - v.sqrt()).abs() <= 1e-9 * m.abs().max(1.0), "t={t}");
    }
    let comm_files = (0..c.replicas)
        .filter(|r| dir.path().join(format!("comm_{r}.csv")).exists())
        .count();
    assert_eq!(comm_files, 10);
    let echo = fs::read_to_string(dir.path().join("config.echo")).unwrap();
    assert!(echo.contains("algo = \"dctl\""));
}

#[test]
fn feature_file_environment_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("items.csv");
    let mut text = String::from("d=4,reward=col\n");
    for i in 0..40 {
        let x = i as f64 / 10.0;
        text.push_str(&format!(
            "{x},{},{},{},{}\n",
            1.0 - x,
            x * x,
            (i % 3) as f64,
            x - 0.5
        ));
    }
    fs::write(&path, text).unwrap();
    let c = ExperimentConfig {
        data_file: Some(path),
        env: EnvConfig {
            k: 8,
            ..Default::default()
        },
        n_agents: 3,
        horizon: 40,
        replicas: 1,
        ..Default::default()
    };
    for algo in Algo::ALL {
        let tr = Experiment::new(ExperimentConfig { algo, ..c.clone() })
            .unwrap()
            .run_replica(0)
            .unwrap();
        assert_eq!(tr.horizon(), 40);
        assert!(tr.true_support.is_none());
    }

    let too_many_arms = ExperimentConfig {
        env: EnvConfig {
            k: 41,
            ..Default::default()
        },
        ..c
    };
    assert!(Experiment::new(too_many_arms).is_err());
}
