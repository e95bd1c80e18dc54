//! Centralized dynamic-TDD scheduling for networks of full-duplex and
//! half-duplex nodes.
//!
//! Each time slot, every node is placed in one of four states (receive,
//! transmit, simultaneous transmit/receive, silent) so that the weighted
//! sum of the per-node received rates is maximized. The crate provides the
//! network and fading model ([`netmodel`]), the rate model ([`ratecore`]),
//! the iterative per-slot scheduler ([`fpsched`]), an exhaustive reference
//! solver ([`oracle`]), the conventional TDD baselines ([`benchmarks`]), the
//! demand-tracking weight controller ([`fairness`]) and the experiment
//! drivers behind the `dtdd` binary ([`harness`]).

pub mod benchmarks;
pub mod error;
pub mod fairness;
pub mod fpsched;
pub mod harness;
pub mod matrix;
pub mod netmodel;
pub mod oracle;
pub mod ratecore;
pub mod rng;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::benchmarks::{bs1_schedule, bs3_schedule, BenchmarkKind};
    pub use crate::error::{Error, Result};
    pub use crate::fairness::{run_fairness_loop, FairnessState, FeedbackSign, StepSize};
    pub use crate::fpsched::{optimize_slot, SolveResult, SolverConfig, UpdateRule};
    pub use crate::netmodel::{
        draw_channels, generate_topology, ChannelRealization, Duplex, NodeSpec, SimConfig,
        Topology,
    };
    pub use crate::oracle::{brute_force_slot, oracle_gap_report};
    pub use crate::ratecore::{
        average_rates, per_node_rate, weighted_sum_rate, NodeState, RateRecord, ScheduleState,
        WeightVector,
    };
}
