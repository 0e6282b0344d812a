//! Sync schedule, network topologies, support aggregation, and communication
//! accounting.

use std::collections::VecDeque;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::support::SupportSet;

/// Rounds `round(ξ^m)`, `m ≥ 1`, deduplicated and capped at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncSchedule {
    rounds: Vec<usize>,
}

impl SyncSchedule {
    pub fn new(xi: f64, horizon: usize) -> Result<Self> {
        if !(xi.is_finite() && xi > 1.0) {
            return Err(Error::InvalidInput(format!("xi must be > 1, got {xi}")));
        }
        let mut rounds: Vec<usize> = Vec::new();
        let mut power = xi;
        loop {
            let r = power.round();
            if r > horizon as f64 {
                break;
            }
            let r = r as usize;
            if rounds.last() != Some(&r) {
                rounds.push(r);
            }
            power *= xi;
        }
        Ok(SyncSchedule { rounds })
    }

    pub fn is_sync(&self, t: usize) -> bool {
        self.rounds.binary_search(&t).is_ok()
    }

    pub fn rounds(&self) -> &[usize] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

/// Whether round `t` lies on the grid `{round(ξ^m) : m ≥ 1}`.
pub fn is_sync_step(t: usize, xi: f64) -> bool {
    SyncSchedule::new(xi, t).map(|s| s.is_sync(t)).unwrap_or(false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Star,
    PeerGraph,
}

impl TopologyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::Star => "star",
            TopologyKind::PeerGraph => "peer_graph",
        }
    }
}

/// Agent network. Star topologies have no agent-to-agent edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    kind: TopologyKind,
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    pub fn star(n_agents: usize) -> Self {
        Topology {
            kind: TopologyKind::Star,
            adjacency: vec![Vec::new(); n_agents],
        }
    }

    /// Peer graph from an edge list; checks every topology invariant.
    pub fn peer_graph(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n_agents];
        for &(a, b) in edges {
            if a >= n_agents || b >= n_agents {
                return Err(Error::Topology(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::Topology(format!("self-loop at {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            let before = nbrs.len();
            nbrs.dedup();
            if nbrs.len() != before {
                return Err(Error::Topology("duplicate edge".into()));
            }
        }
        let topo = Topology {
            kind: TopologyKind::PeerGraph,
            adjacency,
        };
        if !topo.is_connected() {
            return Err(Error::Topology("peer graph is not connected".into()));
        }
        Ok(topo)
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Breadth-first search from agent 0.
    pub fn is_connected(&self) -> bool {
        let n = self.n_agents();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }
}

/// Random connected graph: `|E|` uniform on `{N−1, …, 2N}` (capped at
/// `N(N−1)/2`), a uniform random spanning tree, then distinct extra edges
/// chosen uniformly among the remaining pairs.
pub fn gen_random_connected_graph(n_agents: usize, rng: &mut impl Rng) -> Topology {
    if n_agents <= 1 {
        return Topology {
            kind: TopologyKind::PeerGraph,
            adjacency: vec![Vec::new(); n_agents],
        };
    }
    let n = n_agents;
    let max_edges = n * (n - 1) / 2;
    let target = rng.random_range(n - 1..=2 * n).min(max_edges);

    let mut edges = random_spanning_tree(n, rng);
    let mut present = vec![false; n * n];
    for &(a, b) in &edges {
        present[a * n + b] = true;
        present[b * n + a] = true;
    }
    let candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .filter(|&(a, b)| !present[a * n + b])
        .collect();
    let extra = target - (n - 1);
    for i in index::sample(rng, candidates.len(), extra).iter() {
        edges.push(candidates[i]);
    }
    Topology::peer_graph(n, &edges).expect("tree plus distinct extra edges is a valid connected graph")
}

/// Uniform labelled tree on `n ≥ 2` nodes via a random Prüfer sequence.
fn random_spanning_tree(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let prufer: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &p in &prufer {
        degree[p] += 1;
    }
    let mut leaves: std::collections::BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &p in &prufer {
        let leaf = leaves.pop_first().expect("Prüfer decoding always has a leaf");
        edges.push((leaf.min(p), leaf.max(p)));
        degree[p] -= 1;
        if degree[p] == 1 {
            leaves.insert(p);
        }
    }
    let a = leaves.pop_first().expect("two leaves remain");
    let b = leaves.pop_first().expect("two leaves remain");
    edges.push((a, b));
    edges
}

/// Union of all agents' sets.
pub fn server_aggregate(supports: &[SupportSet]) -> SupportSet {
    supports.iter().fold(SupportSet::empty(), |acc, s| acc.union(s))
}

/// Result of one agent's pull in a peer exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerPull {
    /// The neighbour whose estimate was obtained.
    pub from: usize,
    pub merged: SupportSet,
}

/// Every agent pulls one uniformly chosen neighbour's local set and unions it
/// with its own. All unions use the pre-exchange sets.
pub fn peer_exchange(topology: &Topology, local: &[SupportSet], rng: &mut impl Rng) -> Result<Vec<PeerPull>> {
    if topology.kind() != TopologyKind::PeerGraph {
        return Err(Error::Topology("peer exchange needs a peer graph".into()));
    }
    if local.len() != topology.n_agents() {
        return Err(Error::DimensionMismatch {
            expected: topology.n_agents(),
            actual: local.len(),
        });
    }
    (0..local.len())
        .map(|i| {
            let nbrs = topology.neighbors(i);
            if nbrs.is_empty() {
                return Err(Error::Topology(format!("agent {i} has no neighbours")));
            }
            let from = nbrs[rng.random_range(0..nbrs.len())];
            Ok(PeerPull {
                from,
                merged: local[i].union(&local[from]),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Agent(usize),
    Server,
}

/// A sync-round message. Carries nothing but a support set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncMessage {
    pub sender: Endpoint,
    pub support: SupportSet,
    pub round: usize,
}

/// Uplink from every agent plus one broadcast copy of the union per agent.
pub fn star_messages(t: usize, local: &[SupportSet], union: &SupportSet) -> Vec<SyncMessage> {
    let uplink = local.iter().enumerate().map(|(i, s)| SyncMessage {
        sender: Endpoint::Agent(i),
        support: s.clone(),
        round: t,
    });
    let broadcast = local.iter().map(|_| SyncMessage {
        sender: Endpoint::Server,
        support: union.clone(),
        round: t,
    });
    uplink.chain(broadcast).collect()
}

/// One message per pull, carrying the neighbour's local set.
pub fn peer_messages(t: usize, local: &[SupportSet], pulls: &[PeerPull]) -> Vec<SyncMessage> {
    pulls
        .iter()
        .map(|p| SyncMessage {
            sender: Endpoint::Agent(p.from),
            support: local[p.from].clone(),
            round: t,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommRound {
    pub t: usize,
    pub mode: TopologyKind,
    pub messages: usize,
    pub indices_transmitted: usize,
}

/// Append-only communication ledger, one entry per sync round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommLog {
    rounds: Vec<CommRound>,
}

impl CommLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rounds(&self) -> &[CommRound] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn total_indices(&self) -> usize {
        self.rounds.iter().map(|r| r.indices_transmitted).sum()
    }

    pub fn total_messages(&self) -> usize {
        self.rounds.iter().map(|r| r.messages).sum()
    }

    /// CSV with header `t,mode,messages,indices_transmitted`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "t,mode,messages,indices_transmitted")?;
        for r in &self.rounds {
            writeln!(
                out,
                "{},{},{},{}",
                r.t,
                r.mode.as_str(),
                r.messages,
                r.indices_transmitted
            )?;
        }
        Ok(())
    }
}

/// Appends one sync round's totals. Only called at sync rounds; a round in
/// which nothing could be sent is still logged with zero messages.
pub fn record_comm(log: &mut CommLog, t: usize, mode: TopologyKind, messages: &[SyncMessage]) {
    log.rounds.push(CommRound {
        t,
        mode,
        messages: messages.len(),
        indices_transmitted: messages.iter().map(|m| m.support.len()).sum(),
    });
}
