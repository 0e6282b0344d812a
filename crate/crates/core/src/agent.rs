//! Per-agent state: greedy play on a ridge estimate over the active support,
//! plus Lasso-and-threshold support estimation at sync rounds.

use serde::{Deserialize, Serialize};

use crate::env::ContextSet;
use crate::error::{Error, Result};
use crate::solver::{lasso_fit_gram, DesignMatrix, GramSystem, LassoConfig, RidgeState};
use crate::support::SupportSet;

/// How support estimates are merged at a sync round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Server takes the union of all agents' sets; threshold `N·λ_t`.
    Centralized,
    /// Each agent unions with one random neighbour; threshold `2·λ_t`.
    Decentralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncParams {
    pub lambda0: f64,
    /// Base of the geometric sync schedule.
    pub xi: f64,
    pub mode: Mode,
    pub n_agents: usize,
}

impl SyncParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.xi > 1.0) {
            return Err(Error::InvalidInput(format!("xi must be > 1, got {}", self.xi)));
        }
        if !(self.lambda0.is_finite() && self.lambda0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda0 must be > 0, got {}",
                self.lambda0
            )));
        }
        if self.n_agents == 0 {
            return Err(Error::InvalidInput("need at least one agent".into()));
        }
        Ok(())
    }
}

/// `λ_t = λ₀ √(2 ln t · ln d / t)`.
pub fn lambda_schedule(t: usize, lambda0: f64, d: usize) -> f64 {
    debug_assert!(t >= 1);
    let t = t as f64;
    lambda0 * (2.0 * t.ln() * (d as f64).ln() / t).sqrt()
}

pub fn threshold_value(params: &SyncParams, lambda_t: f64) -> f64 {
    match params.mode {
        Mode::Centralized => params.n_agents as f64 * lambda_t,
        Mode::Decentralized => 2.0 * lambda_t,
    }
}

/// Append-only log of chosen full-dimensional arms and rewards.
///
/// Gram statistics over all `d` coordinates are kept alongside so the Lasso
/// and ridge rebuilds never rescan the rows.
#[derive(Debug, Clone)]
pub struct AgentHistory {
    dim: usize,
    contexts: Vec<f64>,
    rewards: Vec<f64>,
    gram: GramSystem,
}

impl AgentHistory {
    pub fn new(dim: usize) -> Self {
        AgentHistory {
            dim,
            contexts: Vec::new(),
            rewards: Vec::new(),
            gram: GramSystem::new(dim),
        }
    }

    pub fn push(&mut self, arm: &[f64], reward: f64) -> Result<()> {
        self.gram.push(arm, reward)?;
        self.contexts.extend_from_slice(arm);
        self.rewards.push(reward);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn context(&self, s: usize) -> &[f64] {
        &self.contexts[s * self.dim..(s + 1) * self.dim]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn gram(&self) -> &GramSystem {
        &self.gram
    }

    pub fn design(&self) -> Result<DesignMatrix> {
        DesignMatrix::new(self.len(), self.dim, self.contexts.clone())
    }
}

#[derive(Debug, Clone)]
pub struct Agent {
    id: usize,
    history: AgentHistory,
    ridge: RidgeState,
    theta_hat: Vec<f64>,
    lasso: LassoConfig,
    lasso_coef: Vec<f64>,
    fallbacks: usize,
}

impl Agent {
    /// Fresh agent playing on the full support with `M = I`, `b = 0`.
    pub fn new(id: usize, dim: usize, lasso: LassoConfig) -> Self {
        let support = SupportSet::full(dim);
        Agent {
            id,
            history: AgentHistory::new(dim),
            theta_hat: vec![0.0; dim],
            ridge: RidgeState::new(support),
            lasso,
            lasso_coef: vec![0.0; dim],
            fallbacks: 0,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn history(&self) -> &AgentHistory {
        &self.history
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn active_support(&self) -> &SupportSet {
        self.ridge.support()
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    /// Coefficients of the most recent sync-time Lasso fit (full dimension).
    pub fn lasso_coef(&self) -> &[f64] {
        &self.lasso_coef
    }

    /// Number of times an empty support had to be replaced by `{0}`.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    /// Greedy arm on the active support; ties go to the lowest index.
    pub fn select_arm(&self, contexts: &ContextSet) -> usize {
        let support = self.active_support().indices();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, arm) in contexts.arms().enumerate() {
            let score: f64 = support
                .iter()
                .zip(&self.theta_hat)
                .map(|(&j, th)| arm[j] * th)
                .sum();
            if score > best_score {
                best = k;
                best_score = score;
            }
        }
        best
    }

    /// Records the full arm and updates the ridge state on its restriction.
    pub fn observe(&mut self, full_arm: &[f64], reward: f64) -> Result<()> {
        self.history.push(full_arm, reward)?;
        let restricted = self.active_support().restrict(full_arm);
        self.ridge.update(&restricted, reward)?;
        self.theta_hat = self.ridge.estimate();
        Ok(())
    }

    /// Lasso over all `d` coordinates of the history at `lambda_t`, keeping
    /// coordinates with `|θ_j| > threshold`. Warm-started from the previous fit.
    pub fn local_support_estimate(&mut self, lambda_t: f64, threshold: f64) -> Result<SupportSet> {
        if self.history.is_empty() {
            return Ok(SupportSet::full(self.history.dim()));
        }
        let cfg = LassoConfig {
            lambda: lambda_t,
            ..self.lasso
        };
        let fit = lasso_fit_gram(self.history.gram(), &cfg, Some(&self.lasso_coef))?;
        self.lasso_coef = fit.coef;
        Ok(SupportSet::above_threshold(&self.lasso_coef, threshold))
    }

    /// Switches to `support`, rebuilding `(M, b)` from the whole history
    /// restricted to it. An empty set falls back to `{0}`.
    pub fn adopt_support(&mut self, support: SupportSet) -> Result<()> {
        support.check_bounds(self.history.dim())?;
        let support = if support.is_empty() {
            log::warn!(
                "agent {}: empty support after sync, falling back to {{0}}",
                self.id
            );
            self.fallbacks += 1;
            SupportSet::singleton(0)
        } else {
            support
        };
        self.ridge = RidgeState::from_gram(support, self.history.gram())?;
        self.theta_hat = self.ridge.estimate();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn agent(dim: usize) -> Agent {
        Agent::new(0, dim, LassoConfig::default())
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lambda_schedule(1, 0.7, 100), 0.0);
        // At real arguments t = e², d = e: √(2·2·1/e²) = 2/e. The grid point
        // closest to e² is t = 7; check the formula there by hand too.
        let e = std::f64::consts::E;
        let at = |t: f64, d: f64| (2.0 * t.ln() * d.ln() / t).sqrt();
        assert!((at(e * e, e) - 2.0 / e).abs() < 1e-15);
        let t7 = (2.0 * 7f64.ln() * 3f64.ln() / 7.0).sqrt();
        assert!((lambda_schedule(7, 1.0, 3) - t7).abs() < 1e-15);
        assert!(
            (lambda_schedule(4, 2.0, 10) - 2.0 * (2.0 * 4f64.ln() * 10f64.ln() / 4.0).sqrt()).abs() < 1e-15
        );
    }

    #[test]
    fn schedule_decreases_from_eight() {
        for d in [2, 10, 100, 1000] {
            let mut prev = lambda_schedule(8, 0.3, d);
            for t in 9..5000 {
                let cur = lambda_schedule(t, 0.3, d);
                assert!(cur < prev, "t = {t}, d = {d}");
                prev = cur;
            }
        }
    }

    #[test]
    fn thresholds() {
        let mut p = SyncParams {
            lambda0: 0.1,
            xi: 2.0,
            mode: Mode::Centralized,
            n_agents: 10,
        };
        assert!((threshold_value(&p, 0.3) - 3.0).abs() < 1e-15);
        p.n_agents = 2;
        let central = threshold_value(&p, 0.3);
        p.mode = Mode::Decentralized;
        assert!((threshold_value(&p, 0.3) - 0.6).abs() < 1e-15);
        assert_eq!(central, threshold_value(&p, 0.3));
    }

    #[test]
    fn sync_params_validation() {
        let ok = SyncParams {
            lambda0: 0.1,
            xi: 2.0,
            mode: Mode::Decentralized,
            n_agents: 3,
        };
        assert!(ok.validate().is_ok());
        assert!(SyncParams { xi: 1.0, ..ok }.validate().is_err());
        assert!(SyncParams { lambda0: 0.0, ..ok }.validate().is_err());
        assert!(SyncParams { n_agents: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn fresh_agent_picks_first_arm() {
        let a = agent(3);
        let ctx = ContextSet::from_rows(&[vec![1.0, 2.0, 3.0], vec![9.0, 9.0, 9.0]]).unwrap();
        assert_eq!(a.select_arm(&ctx), 0);
    }

    #[test]
    fn single_coordinate_selection_matches_scan() {
        let mut a = agent(4);
        a.adopt_support(SupportSet::singleton(2)).unwrap();
        a.theta_hat = vec![1.0];
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|k| (0..4).map(|j| (((k * 5 + j * 3) % 11) as f64) - 5.0).collect())
            .collect();
        let ctx = ContextSet::from_rows(&rows).unwrap();
        let mut best = 0;
        for k in 1..rows.len() {
            if rows[k][2] > rows[best][2] {
                best = k;
            }
        }
        assert_eq!(a.select_arm(&ctx), best);
        // Positive rescaling leaves the argmax unchanged.
        a.theta_hat = vec![37.5];
        assert_eq!(a.select_arm(&ctx), best);
    }

    #[test]
    fn observe_grows_state() {
        let mut a = agent(3);
        a.observe(&[1.0, 0.0, 2.0], 1.5).unwrap();
        assert_eq!(a.history().len(), 1);
        assert_ne!(a.ridge().m(), &DMatrix::identity(3, 3));
        a.observe(&[0.0, 0.0, 0.0], 4.0).unwrap();
        assert_eq!(a.history().len(), 2);
        let mut expected = DMatrix::identity(3, 3);
        expected[(0, 0)] += 1.0;
        expected[(0, 2)] += 2.0;
        expected[(2, 0)] += 2.0;
        expected[(2, 2)] += 4.0;
        assert_eq!(a.ridge().m(), &expected);
        assert!(a.observe(&[1.0], 1.0).is_err());
    }

    #[test]
    fn observe_on_reduced_support_matches_batch() {
        let mut a = agent(5);
        a.adopt_support(SupportSet::from_indices([1, 3])).unwrap();
        let rows = [
            [0.2, 1.0, -3.0, 0.5, 7.0],
            [1.0, -2.0, 0.0, 1.5, 0.0],
            [0.0, 0.5, 1.0, -1.0, 2.0],
        ];
        let ys = [0.3, -1.1, 2.2];
        for (r, &y) in rows.iter().zip(&ys) {
            a.observe(r, y).unwrap();
        }
        let mut m = DMatrix::identity(2, 2);
        let mut b = [0.0; 2];
        for (r, &y) in rows.iter().zip(&ys) {
            let v = [r[1], r[3]];
            for i in 0..2 {
                b[i] += y * v[i];
                for j in 0..2 {
                    m[(i, j)] += v[i] * v[j];
                }
            }
        }
        assert!((a.ridge().m() - &m).amax() < 1e-14);
        assert!((a.ridge().b()[0] - b[0]).abs() < 1e-14);
        assert!((a.ridge().b()[1] - b[1]).abs() < 1e-14);
    }

    #[test]
    fn shrink_rebuild_by_hand() {
        let mut a = agent(6);
        let rows = [
            [1.0, 2.0, 0.0, 0.0, -1.0, 0.0],
            [0.0, 1.0, 5.0, 0.0, 3.0, 1.0],
            [2.0, -1.0, 0.0, 4.0, 1.0, 0.0],
        ];
        let ys = [1.0, 2.0, -1.0];
        for (r, &y) in rows.iter().zip(&ys) {
            a.observe(r, y).unwrap();
        }
        a.adopt_support(SupportSet::from_indices([1, 4])).unwrap();
        // Columns 1 and 4: (2, −1), (1, 3), (−1, 1).
        // M = I + [[4+1+1, −2+3−1], [−2+3−1, 1+9+1]] = [[7, 0], [0, 12]].
        // b = 1·(2, −1) + 2·(1, 3) − 1·(−1, 1) = (5, 4).
        assert_eq!(
            a.ridge().m(),
            &DMatrix::from_row_slice(2, 2, &[7.0, 0.0, 0.0, 12.0])
        );
        assert_eq!(a.ridge().b().as_slice(), &[5.0, 4.0]);
        let th = a.theta_hat();
        assert!((th[0] - 5.0 / 7.0).abs() < 1e-15);
        assert!((th[1] - 4.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn adopting_same_support_is_idempotent() {
        let mut a = agent(3);
        a.observe(&[1.0, -1.0, 0.5], 0.4).unwrap();
        a.observe(&[0.0, 2.0, 1.0], -0.2).unwrap();
        let before = a.ridge().clone();
        a.adopt_support(a.active_support().clone()).unwrap();
        assert!((a.ridge().m() - before.m()).amax() < 1e-14);
        assert!((a.ridge().b() - before.b()).amax() < 1e-14);
    }

    #[test]
    fn full_support_on_fresh_agent_is_identity() {
        let mut a = agent(4);
        a.adopt_support(SupportSet::full(4)).unwrap();
        assert_eq!(a.ridge().m(), &DMatrix::identity(4, 4));
        assert_eq!(a.theta_hat(), &[0.0; 4]);
    }

    #[test]
    fn empty_support_falls_back() {
        let mut a = agent(4);
        a.adopt_support(SupportSet::empty()).unwrap();
        assert_eq!(a.active_support(), &SupportSet::singleton(0));
        assert_eq!(a.fallbacks(), 1);
        assert!(a.adopt_support(SupportSet::singleton(4)).is_err());
    }

    fn noiseless_agent() -> (Agent, Vec<f64>) {
        let theta = vec![0.0, 1.5, 0.0, 0.0, -0.8, 0.0, 0.0, 1.0];
        let mut a = agent(8);
        for s in 0..60usize {
            let x: Vec<f64> = (0..8)
                .map(|j| (((s * 13 + j * 7 + s * j) % 17) as f64 - 8.0) / 4.0)
                .collect();
            let y: f64 = x.iter().zip(&theta).map(|(a, b)| a * b).sum();
            a.observe(&x, y).unwrap();
        }
        (a, theta)
    }

    #[test]
    fn local_estimate_threshold_extremes() {
        let (mut a, _) = noiseless_agent();
        let dense = a.local_support_estimate(1e-4, 0.0).unwrap();
        let nonzero = SupportSet::above_threshold(a.lasso_coef(), 0.0);
        assert_eq!(dense, nonzero);
        let max = a.lasso_coef().iter().fold(0.0f64, |m, c| m.max(c.abs()));
        assert!(a.local_support_estimate(1e-4, max + 1.0).unwrap().is_empty());
    }

    #[test]
    fn local_estimate_recovers_noiseless_support() {
        let (mut a, theta) = noiseless_agent();
        let s = a.local_support_estimate(0.01, 0.1).unwrap();
        let truth = SupportSet::above_threshold(&theta, 0.0);
        assert!(s.is_superset_of(&truth), "{s} vs {truth}");
        for j in truth.iter() {
            assert!((a.lasso_coef()[j] - theta[j]).abs() < 0.05);
        }
    }

    #[test]
    fn empty_history_keeps_full_support() {
        let mut a = agent(5);
        assert_eq!(a.local_support_estimate(0.1, 0.2).unwrap(), SupportSet::full(5));
    }
}
