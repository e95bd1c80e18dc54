//! Exhaustive per-slot search, used as ground truth for small networks.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpsched::{optimize_slot, SolverConfig};
use crate::netmodel::{
    db_to_linear, draw_channels, generate_topology, mean_pathloss_gain, ChannelRealization, Duplex,
    SimConfig, Topology,
};
use crate::ratecore::{rates_for_activity, weighted_sum_rate, NodeState, ScheduleState, WeightVector};
use crate::rng::{stream, Domain};

pub const DEFAULT_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteForce {
    pub cap: usize,
    /// Enumerate transmit patterns only and fill in the best listening
    /// states, instead of every per-node state combination.
    pub prune: bool,
}

impl Default for BruteForce {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            prune: true,
        }
    }
}

/// Better-than test with the deterministic tie-break: higher objective, or
/// equal objective and a lexicographically smaller `(t, f, r, s)` key.
fn beats(lambda: f64, key: &[u8], best: &Option<(f64, Vec<u8>, ScheduleState)>) -> bool {
    match best {
        None => true,
        Some((bl, bk, _)) => lambda > *bl || (lambda == *bl && key < bk.as_slice()),
    }
}

pub fn brute_force_slot(
    chan: &ChannelRealization,
    topology: &Topology,
    p_eff: f64,
    mu: &WeightVector,
) -> Result<(ScheduleState, f64)> {
    brute_force_slot_with(chan, topology, p_eff, mu, BruteForce::default())
}

pub fn brute_force_slot_with(
    chan: &ChannelRealization,
    topology: &Topology,
    p_eff: f64,
    mu: &WeightVector,
    opts: BruteForce,
) -> Result<(ScheduleState, f64)> {
    let k = topology.len();
    if k > opts.cap {
        return Err(Error::OracleCap { nodes: k, cap: opts.cap });
    }
    if chan.len() != k || mu.len() != k {
        return Err(Error::InvalidInput("channel, weights and topology differ in size".into()));
    }
    let best = if opts.prune {
        enumerate_activity(chan, topology, p_eff, mu)
    } else {
        enumerate_all(chan, topology, p_eff, mu)
    };
    let (lambda, _, state) = best.expect("non-empty search space");
    Ok((state, lambda))
}

/// Every joint state: four options per full-duplex node, three per
/// half-duplex node.
fn enumerate_all(
    chan: &ChannelRealization,
    topology: &Topology,
    p_eff: f64,
    mu: &WeightVector,
) -> Option<(f64, Vec<u8>, ScheduleState)> {
    const FD: [NodeState; 4] = [NodeState::Receive, NodeState::Transmit, NodeState::Both, NodeState::Silent];
    const HD: [NodeState; 3] = [NodeState::Receive, NodeState::Transmit, NodeState::Silent];
    let k = topology.len();
    let radix: Vec<usize> = (0..k)
        .map(|x| if topology.is_half_duplex(x) { 3 } else { 4 })
        .collect();
    let mut digits = vec![0usize; k];
    let mut best = None;
    loop {
        let nodes = (0..k)
            .map(|x| if radix[x] == 3 { HD[digits[x]] } else { FD[digits[x]] })
            .collect();
        let state = ScheduleState::new(nodes);
        let lambda = weighted_sum_rate(&state, chan, p_eff, mu).lambda;
        let key = state.lex_key();
        if beats(lambda, &key, &best) {
            best = Some((lambda, key, state));
        }
        // mixed-radix increment
        let mut pos = 0;
        loop {
            if pos == k {
                return best;
            }
            digits[pos] += 1;
            if digits[pos] < radix[pos] {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

/// One candidate per transmit pattern. Given who is on, interference is
/// fixed, so each node independently takes its best (and, on ties,
/// lexicographically smallest) state: an off node listens only if that
/// earns it a positive weighted rate, an on full-duplex node is put in the
/// simultaneous state.
fn enumerate_activity(
    chan: &ChannelRealization,
    topology: &Topology,
    p_eff: f64,
    mu: &WeightVector,
) -> Option<(f64, Vec<u8>, ScheduleState)> {
    let k = topology.len();
    let mut best = None;
    for pattern in 0u64..(1u64 << k) {
        let active: Vec<bool> = (0..k).map(|x| pattern >> x & 1 == 1).collect();
        let can_listen: Vec<bool> = (0..k)
            .map(|x| !active[x] || !topology.is_half_duplex(x))
            .collect();
        let rates = rates_for_activity(&active, &can_listen, chan, p_eff);
        let nodes = (0..k)
            .map(|x| match (active[x], topology.is_half_duplex(x)) {
                (true, true) => NodeState::Transmit,
                (true, false) => NodeState::Both,
                (false, _) if mu.as_slice()[x] * rates[x] > 0.0 => NodeState::Receive,
                (false, _) => NodeState::Silent,
            })
            .collect();
        let state = ScheduleState::new(nodes);
        let lambda = weighted_sum_rate(&state, chan, p_eff, mu).lambda;
        let key = state.lex_key();
        if beats(lambda, &key, &best) {
            best = Some((lambda, key, state));
        }
    }
    best
}

/// Settings for matched scheduler/oracle comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapConfig {
    pub n_pairs: usize,
    pub area_side_m: f64,
    pub si_suppression_db: f64,
    pub duplex: Duplex,
    /// When set, transmit power is chosen per instance so that the median
    /// mean SNR over desired links equals this value; otherwise the base
    /// config's transmit power is used.
    pub target_median_snr_db: Option<f64>,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            n_pairs: 4,
            area_side_m: 250.0,
            si_suppression_db: 110.0,
            duplex: Duplex::Full,
            target_median_snr_db: Some(15.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub instance_seed: u64,
    pub lambda_alg: f64,
    pub lambda_oracle: f64,
    pub ratio: f64,
    pub iters_alg: usize,
    pub time_alg_us: f64,
    pub time_oracle_us: f64,
    #[serde(skip)]
    pub converged: bool,
    /// The scheduler's state is valid for the node types and its reported
    /// objective matches recomputation.
    #[serde(skip)]
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
}

impl GapReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    pub fn mean_ratio(&self) -> f64 {
        mean(&self.ratios())
    }

    /// 5th percentile of the ratio (nearest-rank).
    pub fn p5_ratio(&self) -> f64 {
        percentile(&self.ratios(), 0.05)
    }

    pub fn fraction_at_least(&self, threshold: f64) -> f64 {
        let n = self.rows.len().max(1) as f64;
        self.rows.iter().filter(|r| r.ratio >= threshold).count() as f64 / n
    }

    /// Fraction where the scheduler matched the optimum to 1e-9.
    pub fn fraction_exact(&self) -> f64 {
        self.fraction_at_least(1.0 - 1e-9)
    }

    pub fn fraction_converged(&self) -> f64 {
        let n = self.rows.len().max(1) as f64;
        self.rows.iter().filter(|r| r.converged).count() as f64 / n
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean_time_alg_us(&self) -> f64 {
        mean(&self.rows.iter().map(|r| r.time_alg_us).collect::<Vec<_>>())
    }

    pub fn mean_time_oracle_us(&self) -> f64 {
        mean(&self.rows.iter().map(|r| r.time_oracle_us).collect::<Vec<_>>())
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn percentile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1]
}

/// Transmit power (relative to noise) that puts the median mean SNR of the
/// desired links at `target_db`.
pub fn p_eff_for_median_snr(topology: &Topology, base: &SimConfig, target_db: f64) -> Result<f64> {
    let nodes = topology.nodes();
    let mut gains = topology
        .desired_links()
        .into_iter()
        .map(|(j, k)| mean_pathloss_gain(nodes[j].distance_to(&nodes[k]), base))
        .collect::<Result<Vec<_>>>()?;
    if gains.is_empty() {
        return Err(Error::InvalidInput("topology has no desired links".into()));
    }
    gains.sort_by(f64::total_cmp);
    let n = gains.len();
    let median = if n % 2 == 1 {
        gains[n / 2]
    } else {
        0.5 * (gains[n / 2 - 1] + gains[n / 2])
    };
    Ok(db_to_linear(target_db) / median)
}

/// One matched instance: topology, single-slot channel and transmit power.
pub fn gap_instance(
    instance_seed: u64,
    gap: &GapConfig,
    base: &SimConfig,
) -> Result<(Topology, ChannelRealization, f64)> {
    let sim = SimConfig {
        n_pairs: gap.n_pairs,
        area_side_m: gap.area_side_m,
        si_suppression_db: gap.si_suppression_db,
        ..base.clone()
    };
    let topology = generate_topology(&sim, gap.duplex, &mut stream(instance_seed, Domain::Topology, 0))?;
    let p_eff = match gap.target_median_snr_db {
        Some(db) => p_eff_for_median_snr(&topology, &sim, db)?,
        None => sim.p_eff(),
    };
    let chan = draw_channels(&topology, &sim, 1, &mut stream(instance_seed, Domain::Channel, 1))?;
    Ok((topology, chan, p_eff))
}

/// Runs the scheduler and the exhaustive search on `n_instances` matched
/// random instances with uniform weights. Instance `i` uses seed
/// `seed + i`.
pub fn oracle_gap_report(
    n_instances: usize,
    gap: &GapConfig,
    base: &SimConfig,
    solver: &SolverConfig,
    seed: u64,
) -> Result<GapReport> {
    if 2 * gap.n_pairs > DEFAULT_CAP {
        return Err(Error::OracleCap { nodes: 2 * gap.n_pairs, cap: DEFAULT_CAP });
    }
    let rows = (0..n_instances as u64)
        .into_par_iter()
        .map(|i| {
            let instance_seed = seed.wrapping_add(i);
            let (topology, chan, p_eff) = gap_instance(instance_seed, gap, base)?;
            let mu = WeightVector::uniform(topology.len());

            let start = Instant::now();
            let res = optimize_slot(&chan, &topology, p_eff, &mu, solver, &mut stream(instance_seed, Domain::Solver, 1))?;
            let time_alg_us = start.elapsed().as_secs_f64() * 1e6;

            let start = Instant::now();
            let (_, lambda_oracle) = brute_force_slot(&chan, &topology, p_eff, &mu)?;
            let time_oracle_us = start.elapsed().as_secs_f64() * 1e6;

            let recomputed = weighted_sum_rate(&res.state, &chan, p_eff, &mu).lambda;
            let consistent = res.state.check(&topology).is_ok()
                && (res.lambda - recomputed).abs() <= 1e-9 * recomputed.abs().max(f64::MIN_POSITIVE);
            let ratio = if lambda_oracle > 0.0 { res.lambda / lambda_oracle } else { 1.0 };
            Ok(GapRow {
                instance_seed,
                lambda_alg: res.lambda,
                lambda_oracle,
                ratio,
                iters_alg: res.iters,
                time_alg_us,
                time_oracle_us,
                converged: res.converged,
                consistent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapReport { rows })
}
