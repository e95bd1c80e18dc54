//! Conventional TDD baselines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::Topology;
use crate::ratecore::{NodeState, ScheduleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    /// Pairs alternate direction every slot; every node is half-duplex.
    ConventionalHd,
    /// Every node transmits and receives in every slot.
    ConventionalFd,
}

impl BenchmarkKind {
    pub fn schedule(self, topology: &Topology, slot: u64) -> Result<ScheduleState> {
        match self {
            BenchmarkKind::ConventionalHd => bs1_schedule(topology, slot),
            BenchmarkKind::ConventionalFd => bs3_schedule(topology, slot),
        }
    }
}

/// Group A is the first node of each pair. In odd slots group A transmits
/// to group B, in even slots the other way round.
pub fn bs1_schedule(topology: &Topology, slot: u64) -> Result<ScheduleState> {
    let pairs = topology.pairs()?;
    let a_sends = slot % 2 == 1;
    let mut nodes = vec![NodeState::Silent; topology.len()];
    for (a, b) in pairs {
        let (tx, rx) = if a_sends { (a, b) } else { (b, a) };
        nodes[tx] = NodeState::Transmit;
        nodes[rx] = NodeState::Receive;
    }
    Ok(ScheduleState::new(nodes))
}

pub fn bs3_schedule(topology: &Topology, _slot: u64) -> Result<ScheduleState> {
    if let Some(k) = (0..topology.len()).find(|&k| topology.is_half_duplex(k)) {
        return Err(Error::HalfDuplexNode(k));
    }
    Ok(ScheduleState::all(topology.len(), NodeState::Both))
}
