use super::{Algo, Experiment, ExperimentConfig, RegretTrace, SyncRecord};
use crate::agent::{lambda_schedule, threshold_value, Agent, AgentHistory, Mode};
use crate::comm::{
    gen_random_connected_graph, peer_exchange, peer_messages, record_comm, server_aggregate, star_messages,
    CommLog, SyncSchedule, Topology,
};
use crate::env::{dot, stream_rng, AgentStreams, ContextSet, Environment, Stream};
use crate::error::{Error, Result};
use crate::solver::{lasso_fit_gram, LassoConfig};
use crate::support::SupportSet;

pub(super) fn run_with_env(cfg: &ExperimentConfig, env: &Environment, seed: u64) -> Result<RegretTrace> {
    match cfg.algo {
        Algo::Cctl | Algo::Dctl => simulate_ctl(cfg, env, seed),
        Algo::SaLasso => simulate_sa_lasso(cfg, env, seed),
        Algo::ThLassoSingle => simulate_th_lasso(cfg, env, seed),
    }
}

fn check_algo(cfg: &ExperimentConfig, allowed: &[Algo]) -> Result<()> {
    if allowed.contains(&cfg.algo) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "algorithm {} not valid for this runner",
            cfg.algo
        )))
    }
}

/// One CCTL or DCTL replica.
pub fn run_ctl(cfg: &ExperimentConfig, replica_seed: u64) -> Result<RegretTrace> {
    check_algo(cfg, &[Algo::Cctl, Algo::Dctl])?;
    Experiment::new(cfg.clone())?.run_replica(replica_seed)
}

/// One replica of the single-agent Lasso bandit that plays greedily on a
/// full-dimensional Lasso estimate refitted every round.
pub fn run_sa_lasso(cfg: &ExperimentConfig, replica_seed: u64) -> Result<RegretTrace> {
    check_algo(cfg, &[Algo::SaLasso])?;
    Experiment::new(cfg.clone())?.run_replica(replica_seed)
}

/// One replica of the single-agent thresholded Lasso bandit: every round a
/// full Lasso, a threshold at `λ_t`, and a Lasso refit on the survivors.
pub fn run_th_lasso_single(cfg: &ExperimentConfig, replica_seed: u64) -> Result<RegretTrace> {
    check_algo(cfg, &[Algo::ThLassoSingle])?;
    Experiment::new(cfg.clone())?.run_replica(replica_seed)
}

fn simulate_ctl(cfg: &ExperimentConfig, env: &Environment, seed: u64) -> Result<RegretTrace> {
    let params = cfg
        .sync_params()
        .ok_or_else(|| Error::Config(format!("{} is not a cooperative algorithm", cfg.algo)))?;
    params.validate()?;
    let n = params.n_agents;
    let d = env.dim();
    let schedule = SyncSchedule::new(params.xi, cfg.horizon)?;
    let topology = match params.mode {
        Mode::Centralized => Topology::star(n),
        Mode::Decentralized => gen_random_connected_graph(n, &mut stream_rng(seed, Stream::Graph)),
    };
    let mut exchange_rng = stream_rng(seed, Stream::Exchange);

    let mut agents: Vec<Agent> = (0..n).map(|i| Agent::new(i, d, cfg.lasso)).collect();
    let mut streams: Vec<AgentStreams> = (0..n).map(|i| AgentStreams::new(seed, i)).collect();
    let mut instant = vec![Vec::with_capacity(cfg.horizon); n];
    let mut comm = CommLog::new();
    let mut syncs = Vec::with_capacity(schedule.len());

    for t in 1..=cfg.horizon {
        for ((agent, stream), regrets) in agents.iter_mut().zip(&mut streams).zip(&mut instant) {
            let round = stream.next_round(env);
            let k = agent.select_arm(&round.contexts);
            let y = stream.observe(env, &round, k);
            agent.observe(round.contexts.arm(k), y)?;
            regrets.push(round.regret(k));
        }
        if !schedule.is_sync(t) {
            continue;
        }

        let lambda = lambda_schedule(t, params.lambda0, d);
        let threshold = threshold_value(&params, lambda);
        let local = agents
            .iter_mut()
            .map(|a| a.local_support_estimate(lambda, threshold))
            .collect::<Result<Vec<_>>>()?;
        let (aggregated, messages) = match params.mode {
            Mode::Centralized => {
                let union = server_aggregate(&local);
                let msgs = star_messages(t, &local, &union);
                (vec![union; n], msgs)
            }
            // A lone agent has nobody to pull from and keeps its own set.
            Mode::Decentralized if n == 1 => (local.clone(), Vec::new()),
            Mode::Decentralized => {
                let pulls = peer_exchange(&topology, &local, &mut exchange_rng)?;
                let msgs = peer_messages(t, &local, &pulls);
                (pulls.into_iter().map(|p| p.merged).collect(), msgs)
            }
        };
        record_comm(&mut comm, t, topology.kind(), &messages);
        for (agent, support) in agents.iter_mut().zip(&aggregated) {
            agent.adopt_support(support.clone())?;
        }
        log::debug!(
            "{} seed {seed} t {t}: lambda {lambda:.4}, threshold {threshold:.4}, |S| {:?}",
            cfg.algo,
            aggregated.iter().map(SupportSet::len).collect::<Vec<_>>()
        );
        syncs.push(SyncRecord {
            t,
            lambda,
            threshold,
            local,
            aggregated,
        });
    }

    let mut trace = RegretTrace::new(cfg.algo, seed, instant);
    trace.comm = comm;
    trace.syncs = syncs;
    trace.final_supports = agents.iter().map(|a| a.active_support().clone()).collect();
    trace.true_support = env.true_support().cloned();
    trace.fallbacks = agents.iter().map(Agent::fallbacks).sum();
    Ok(trace)
}

/// Greedy argmax of `⟨arm, coef⟩` over full-dimensional arms; ties go to the
/// lowest index.
fn greedy_full(contexts: &ContextSet, coef: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, arm) in contexts.arms().enumerate() {
        let s = dot(arm, coef);
        if s > best_score {
            best = k;
            best_score = s;
        }
    }
    best
}

fn simulate_sa_lasso(cfg: &ExperimentConfig, env: &Environment, seed: u64) -> Result<RegretTrace> {
    let d = env.dim();
    let mut stream = AgentStreams::new(seed, 0);
    let mut history = AgentHistory::new(d);
    let mut coef = vec![0.0; d];
    let mut instant = Vec::with_capacity(cfg.horizon);

    for t in 1..=cfg.horizon {
        if !history.is_empty() {
            let lasso = LassoConfig {
                lambda: lambda_schedule(t, cfg.lambda0, d),
                ..cfg.lasso
            };
            coef = lasso_fit_gram(history.gram(), &lasso, Some(&coef))?.coef;
        }
        let round = stream.next_round(env);
        let k = greedy_full(&round.contexts, &coef);
        let y = stream.observe(env, &round, k);
        history.push(round.contexts.arm(k), y)?;
        instant.push(round.regret(k));
    }

    let mut trace = RegretTrace::new(cfg.algo, seed, vec![instant]);
    trace.final_supports = vec![SupportSet::above_threshold(&coef, 0.0)];
    trace.true_support = env.true_support().cloned();
    Ok(trace)
}

fn simulate_th_lasso(cfg: &ExperimentConfig, env: &Environment, seed: u64) -> Result<RegretTrace> {
    let d = env.dim();
    let mut stream = AgentStreams::new(seed, 0);
    let mut history = AgentHistory::new(d);
    let mut first_stage = vec![0.0; d];
    let mut estimate = vec![0.0; d];
    let mut support = SupportSet::full(d);
    let mut fallbacks = 0;
    let mut instant = Vec::with_capacity(cfg.horizon);

    for t in 1..=cfg.horizon {
        if !history.is_empty() {
            let lambda = lambda_schedule(t, cfg.lambda0, d);
            let lasso = LassoConfig { lambda, ..cfg.lasso };
            first_stage = lasso_fit_gram(history.gram(), &lasso, Some(&first_stage))?.coef;
            support = SupportSet::above_threshold(&first_stage, lambda);
            if support.is_empty() {
                fallbacks += 1;
                support = SupportSet::singleton(0);
            }
            let reduced = history.gram().restrict(&support);
            let warm = support.restrict(&first_stage);
            let refit = lasso_fit_gram(&reduced, &lasso, Some(&warm))?.coef;
            estimate.iter_mut().for_each(|v| *v = 0.0);
            for (j, v) in support.iter().zip(refit) {
                estimate[j] = v;
            }
        }
        let round = stream.next_round(env);
        let k = greedy_full(&round.contexts, &estimate);
        let y = stream.observe(env, &round, k);
        history.push(round.contexts.arm(k), y)?;
        instant.push(round.regret(k));
    }

    let mut trace = RegretTrace::new(cfg.algo, seed, vec![instant]);
    trace.final_supports = vec![support];
    trace.true_support = env.true_support().cloned();
    trace.fallbacks = fallbacks;
    Ok(trace)
}
