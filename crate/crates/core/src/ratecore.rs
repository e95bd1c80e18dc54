//! Per-node instantaneous rates, weighted sum-rate and long-run averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{ChannelRealization, Topology};

/// What a node does in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeState {
    Receive,
    Transmit,
    /// Transmit and receive at once (full-duplex only).
    Both,
    Silent,
}

impl NodeState {
    pub fn transmits(self) -> bool {
        matches!(self, NodeState::Transmit | NodeState::Both)
    }

    pub fn receives(self) -> bool {
        matches!(self, NodeState::Receive | NodeState::Both)
    }

    pub fn as_char(self) -> char {
        match self {
            NodeState::Receive => 'r',
            NodeState::Transmit => 't',
            NodeState::Both => 'f',
            NodeState::Silent => 's',
        }
    }
}

/// Joint state of all nodes in a slot. Holding one [`NodeState`] per node
/// keeps `r + t + f + s = 1` true by construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleState {
    nodes: Vec<NodeState>,
}

impl ScheduleState {
    pub fn new(nodes: Vec<NodeState>) -> Self {
        Self { nodes }
    }

    pub fn all(k: usize, state: NodeState) -> Self {
        Self {
            nodes: vec![state; k],
        }
    }

    /// Builds a state from the four indicator vectors, rejecting anything
    /// off the per-node simplex.
    pub fn from_indicators(r: &[u8], t: &[u8], f: &[u8], s: &[u8]) -> Result<Self> {
        let k = r.len();
        if t.len() != k || f.len() != k || s.len() != k {
            return Err(Error::InvalidInput("indicator vectors differ in length".into()));
        }
        let nodes = (0..k)
            .map(|x| match (r[x], t[x], f[x], s[x]) {
                (1, 0, 0, 0) => Ok(NodeState::Receive),
                (0, 1, 0, 0) => Ok(NodeState::Transmit),
                (0, 0, 1, 0) => Ok(NodeState::Both),
                (0, 0, 0, 1) => Ok(NodeState::Silent),
                other => Err(Error::InvalidInput(format!(
                    "node {x}: indicators (r,t,f,s) = {other:?} are not one-hot"
                ))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, k: usize) -> NodeState {
        self.nodes[k]
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    fn indicator(&self, which: NodeState) -> Vec<u8> {
        self.nodes.iter().map(|&s| u8::from(s == which)).collect()
    }

    pub fn r(&self) -> Vec<u8> {
        self.indicator(NodeState::Receive)
    }

    pub fn t(&self) -> Vec<u8> {
        self.indicator(NodeState::Transmit)
    }

    pub fn f(&self) -> Vec<u8> {
        self.indicator(NodeState::Both)
    }

    pub fn s(&self) -> Vec<u8> {
        self.indicator(NodeState::Silent)
    }

    /// `t + f`: which nodes put energy on the air.
    pub fn active(&self) -> Vec<bool> {
        self.nodes.iter().map(|s| s.transmits()).collect()
    }

    /// `r + f`: which nodes listen.
    pub fn listening(&self) -> Vec<bool> {
        self.nodes.iter().map(|s| s.receives()).collect()
    }

    /// Rejects states where a half-duplex node transmits and receives at
    /// once, or whose size does not match the topology.
    pub fn check(&self, topology: &Topology) -> Result<()> {
        if self.len() != topology.len() {
            return Err(Error::InvalidInput(format!(
                "state has {} nodes, topology {}",
                self.len(),
                topology.len()
            )));
        }
        for (k, s) in self.nodes.iter().enumerate() {
            if *s == NodeState::Both && topology.is_half_duplex(k) {
                return Err(Error::HalfDuplexNode(k));
            }
        }
        Ok(())
    }

    /// Compact `rtfs` string, one character per node.
    pub fn code(&self) -> String {
        self.nodes.iter().map(|s| s.as_char()).collect()
    }

    /// Ordering key: the `t`, `f`, `r`, `s` vectors concatenated.
    pub fn lex_key(&self) -> Vec<u8> {
        let mut key = self.t();
        key.extend(self.f());
        key.extend(self.r());
        key.extend(self.s());
        key
    }
}

/// Rate weights on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    mu: Vec<f64>,
}

impl WeightVector {
    /// Normalizes nonnegative weights to sum to one.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        Ok(Self {
            mu: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            mu: vec![1.0 / k as f64; k],
        }
    }

    /// All weight on node `j`.
    pub fn indicator(k: usize, j: usize) -> Self {
        let mut mu = vec![0.0; k];
        mu[j] = 1.0;
        Self { mu }
    }

    /// `mu_k` proportional to `1 / k` with 1-based node numbers.
    pub fn inverse_index(k: usize) -> Self {
        Self::new((1..=k).map(|x| 1.0 / x as f64).collect()).expect("positive weights")
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub slot: u64,
    /// Bits per slot per Hz.
    pub per_node_rate: Vec<f64>,
    pub lambda: f64,
}

impl RateRecord {
    pub fn sum_rate(&self) -> f64 {
        self.per_node_rate.iter().sum()
    }
}

/// Received rate of every node given which nodes transmit and which listen.
/// All rate evaluation in the crate funnels through here so that identical
/// activity patterns give bit-identical rates.
pub(crate) fn rates_for_activity(
    active: &[bool],
    listening: &[bool],
    chan: &ChannelRealization,
    p_eff: f64,
) -> Vec<f64> {
    let n = chan.len();
    (0..n)
        .map(|k| {
            if !listening[k] {
                return 0.0;
            }
            let mut desired = 0.0;
            let mut interference = 0.0;
            for v in 0..n {
                if active[v] {
                    desired += chan.d.get(v, k);
                    interference += chan.i_mat.get(v, k);
                }
            }
            (1.0 + p_eff * desired / (1.0 + p_eff * interference)).log2()
        })
        .collect()
}

/// Instantaneous rate of node `k`:
/// `log2(1 + (r_k + f_k) P (t + f) d_k / (1 + P (t + f) i_k))`.
///
/// When `k` is in state `f` its own transmission activates the diagonal
/// (self-interference) entry of `i_k`.
pub fn per_node_rate(
    state: &ScheduleState,
    chan: &ChannelRealization,
    p_eff: f64,
    k: usize,
) -> f64 {
    if !state.get(k).receives() {
        return 0.0;
    }
    let mut desired = 0.0;
    let mut interference = 0.0;
    for v in 0..chan.len() {
        if state.get(v).transmits() {
            desired += chan.d.get(v, k);
            interference += chan.i_mat.get(v, k);
        }
    }
    (1.0 + p_eff * desired / (1.0 + p_eff * interference)).log2()
}

pub(crate) fn weighted(rates: &[f64], mu: &[f64]) -> f64 {
    rates.iter().zip(mu).map(|(r, m)| r * m).sum()
}

pub fn weighted_sum_rate(
    state: &ScheduleState,
    chan: &ChannelRealization,
    p_eff: f64,
    mu: &WeightVector,
) -> RateRecord {
    let per_node_rate = rates_for_activity(&state.active(), &state.listening(), chan, p_eff);
    let lambda = weighted(&per_node_rate, mu.as_slice());
    RateRecord {
        slot: chan.slot,
        per_node_rate,
        lambda,
    }
}

/// Mean per-node rate over the records. Records are reduced in slot order,
/// so the result does not depend on the order they arrive in.
pub fn average_rates(records: &[RateRecord]) -> Result<Vec<f64>> {
    let first = records.first().ok_or(Error::Empty("average_rates"))?;
    let k = first.per_node_rate.len();
    if records.iter().any(|r| r.per_node_rate.len() != k) {
        return Err(Error::InvalidInput("records disagree on node count".into()));
    }
    let mut ordered: Vec<&RateRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.slot);
    let mut sums = vec![0.0; k];
    for rec in ordered {
        for (s, r) in sums.iter_mut().zip(&rec.per_node_rate) {
            *s += r;
        }
    }
    let n = records.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}
