//! Bandit environments: the hidden sparse parameter, per-round context sets,
//! noisy rewards, and ground-truth regret.

mod features;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::support::SupportSet;

pub use features::{load_feature_file, parse_features, FeatureDataset, RewardSource};

/// RNG used for every simulation stream.
pub type StreamRng = ChaCha8Rng;

/// Range of the non-zero entries of the hidden parameter.
pub const THETA_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Ambient dimension.
    pub d: usize,
    /// Arms per round.
    pub k: usize,
    /// Number of non-zero entries in the hidden parameter.
    pub s0: usize,
    /// Off-diagonal covariance of the context distribution.
    pub rho2: f64,
    /// Infinity-norm cap for every arm.
    pub s_a: f64,
    /// Reward noise standard deviation.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            d: 100,
            k: 10,
            s0: 5,
            rho2: 0.3,
            s_a: 5.0,
            noise_sd: 0.05f64.sqrt(),
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidInput("d must be >= 1".into()));
        }
        if self.s0 == 0 || self.s0 > self.d {
            return Err(Error::InvalidInput(format!(
                "s0 must lie in [1, d = {}], got {}",
                self.d, self.s0
            )));
        }
        if self.k < 2 {
            return Err(Error::InvalidInput(format!("k must be >= 2, got {}", self.k)));
        }
        if !(0.0..1.0).contains(&self.rho2) {
            return Err(Error::InvalidInput(format!(
                "rho2 must lie in [0, 1), got {}",
                self.rho2
            )));
        }
        if self.s_a.is_nan() || self.s_a <= 0.0 {
            return Err(Error::InvalidInput(format!("s_a must be > 0, got {}", self.s_a)));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise_sd must be finite and >= 0, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// The hidden `s0`-sparse parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseParameter {
    pub theta: Vec<f64>,
    pub support: SupportSet,
}

impl SparseParameter {
    pub fn s0(&self) -> usize {
        self.support.len()
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn mean_reward(&self, arm: &[f64]) -> f64 {
        dot(arm, &self.theta)
    }
}

/// `K × d` arm contexts for one agent and one round, one row per arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    k: usize,
    d: usize,
    data: Vec<f64>,
}

impl ContextSet {
    pub fn new(k: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * d {
            return Err(Error::DimensionMismatch {
                expected: k * d,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite context entry".into()));
        }
        Ok(ContextSet { k, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("ragged context rows".into()));
        }
        ContextSet::new(rows.len(), d, rows.concat())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn arm(&self, k: usize) -> &[f64] {
        &self.data[k * self.d..(k + 1) * self.d]
    }

    pub fn arms(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d.max(1)).take(self.k)
    }
}

/// Draws the support uniformly without replacement and the non-zero values
/// i.i.d. uniform on [`THETA_RANGE`].
pub fn gen_parameter(cfg: &EnvConfig, rng: &mut impl Rng) -> Result<SparseParameter> {
    if cfg.s0 > cfg.d {
        return Err(Error::InvalidInput(format!(
            "s0 = {} exceeds d = {}",
            cfg.s0, cfg.d
        )));
    }
    let support = SupportSet::from_indices(index::sample(rng, cfg.d, cfg.s0));
    let values = Uniform::new_inclusive(THETA_RANGE.0, THETA_RANGE.1)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut theta = vec![0.0; cfg.d];
    for j in support.iter() {
        theta[j] = rng.sample(values);
    }
    Ok(SparseParameter { theta, support })
}

/// One arm with covariance `(1−ρ²)I + ρ²·11ᵀ`, downscaled to `‖·‖∞ ≤ s_a`.
///
/// Sampled as `√(1−ρ²)·g + √ρ²·z·1` with `g` standard normal in `ℝᵈ` and `z`
/// a shared standard normal scalar.
pub fn gen_arm(cfg: &EnvConfig, rng: &mut impl Rng) -> Vec<f64> {
    let own = (1.0 - cfg.rho2).sqrt();
    let shared = cfg.rho2.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let mut arm: Vec<f64> = (0..cfg.d)
        .map(|_| own * rng.sample::<f64, _>(StandardNormal) + shared)
        .collect();
    let inf_norm = arm.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if inf_norm > cfg.s_a {
        let scale = cfg.s_a / inf_norm;
        arm.iter_mut().for_each(|v| *v *= scale);
    }
    arm
}

/// `K` independent arms.
pub fn gen_contexts(cfg: &EnvConfig, rng: &mut impl Rng) -> ContextSet {
    let mut data = Vec::with_capacity(cfg.k * cfg.d);
    for _ in 0..cfg.k {
        data.extend(gen_arm(cfg, rng));
    }
    ContextSet {
        k: cfg.k,
        d: cfg.d,
        data,
    }
}

/// `⟨arm, θ*⟩ + ω`, `ω ~ N(0, noise_sd²)`.
pub fn reward(arm: &[f64], param: &SparseParameter, noise_sd: f64, rng: &mut impl Rng) -> f64 {
    param.mean_reward(arm) + noisy(noise_sd, rng)
}

/// Always consumes exactly one normal draw so streams stay aligned across
/// algorithms.
pub(crate) fn noisy(noise_sd: f64, rng: &mut impl Rng) -> f64 {
    noise_sd * rng.sample::<f64, _>(StandardNormal)
}

/// `max_k ⟨A_k, θ*⟩ − ⟨A_chosen, θ*⟩`.
pub fn instant_regret(contexts: &ContextSet, chosen: usize, param: &SparseParameter) -> f64 {
    let means: Vec<f64> = contexts.arms().map(|a| param.mean_reward(a)).collect();
    regret_from_means(&means, chosen)
}

pub fn regret_from_means(means: &[f64], chosen: usize) -> f64 {
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (best - means[chosen]).max(0.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One agent's view of one round: contexts plus the noiseless mean reward of
/// every arm.
#[derive(Debug, Clone)]
pub struct Round {
    pub contexts: ContextSet,
    pub means: Vec<f64>,
}

impl Round {
    pub fn regret(&self, chosen: usize) -> f64 {
        regret_from_means(&self.means, chosen)
    }
}

/// Where arms and ground-truth rewards come from.
#[derive(Debug, Clone)]
pub enum Environment {
    Synthetic {
        cfg: EnvConfig,
        param: SparseParameter,
    },
    Features {
        data: FeatureDataset,
        k: usize,
        noise_sd: f64,
    },
}

impl Environment {
    /// Synthetic environment whose hidden parameter is drawn from the
    /// parameter stream of `cfg.seed`.
    pub fn synthetic(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(cfg.seed, Stream::Parameter);
        let param = gen_parameter(&cfg, &mut rng)?;
        Ok(Environment::Synthetic { cfg, param })
    }

    pub fn features(data: FeatureDataset, k: usize, noise_sd: f64) -> Result<Self> {
        if k == 0 || k > data.items() {
            return Err(Error::InvalidInput(format!(
                "cannot draw {k} distinct arms from {} items",
                data.items()
            )));
        }
        Ok(Environment::Features { data, k, noise_sd })
    }

    pub fn dim(&self) -> usize {
        match self {
            Environment::Synthetic { cfg, .. } => cfg.d,
            Environment::Features { data, .. } => data.dim(),
        }
    }

    pub fn noise_sd(&self) -> f64 {
        match self {
            Environment::Synthetic { cfg, .. } => cfg.noise_sd,
            Environment::Features { noise_sd, .. } => *noise_sd,
        }
    }

    /// Support of the ground-truth parameter when one exists.
    pub fn true_support(&self) -> Option<&SupportSet> {
        match self {
            Environment::Synthetic { param, .. } => Some(&param.support),
            Environment::Features { data, .. } => data.theta().map(|p| &p.support),
        }
    }

    pub fn draw_round(&self, rng: &mut impl Rng) -> Round {
        match self {
            Environment::Synthetic { cfg, param } => {
                let contexts = gen_contexts(cfg, rng);
                let means = contexts.arms().map(|a| param.mean_reward(a)).collect();
                Round { contexts, means }
            }
            Environment::Features { data, k, .. } => data.draw_round(*k, rng),
        }
    }
}

/// Independent RNG streams derived from one replica seed.
///
/// Each agent owns its context and noise streams, so agent `i` sees the same
/// arms and noise regardless of the algorithm or the number of agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Parameter,
    Graph,
    Exchange,
    Contexts(usize),
    Noise(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Parameter => 0,
            Stream::Graph => 1,
            Stream::Exchange => 2,
            Stream::Contexts(i) => 16 + 2 * i as u64,
            Stream::Noise(i) => 17 + 2 * i as u64,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// The per-agent context and noise streams.
#[derive(Debug, Clone)]
pub struct AgentStreams {
    pub contexts: StreamRng,
    pub noise: StreamRng,
}

impl AgentStreams {
    pub fn new(seed: u64, agent: usize) -> Self {
        AgentStreams {
            contexts: stream_rng(seed, Stream::Contexts(agent)),
            noise: stream_rng(seed, Stream::Noise(agent)),
        }
    }

    pub fn next_round(&mut self, env: &Environment) -> Round {
        env.draw_round(&mut self.contexts)
    }

    pub fn observe(&mut self, env: &Environment, round: &Round, chosen: usize) -> f64 {
        round.means[chosen] + noisy(env.noise_sd(), &mut self.noise)
    }
}
