//! Per-slot iterative scheduler.
//!
//! The transmit vector `t` is found by alternating three updates: the
//! auxiliary `w` and `l` vectors of the quadratic transform, and a sign
//! test on each node that switches it on or off. Once `t` settles, the
//! receive / simultaneous / silent states follow from who the node's
//! desired sources are. Half-duplex nodes are handled by giving them an
//! unbounded self-interference gain inside the iteration and by never
//! assigning them the simultaneous state.

use std::f64::consts::LN_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{ChannelRealization, Topology};
use crate::ratecore::{rates_for_activity, weighted, NodeState, ScheduleState, WeightVector};

/// Below this, `sqrt(P * sum_{v != x} t_v d_vk)` counts as zero.
pub const TAU_DIV: f64 = 1e-15;
/// Below this, the desired power `A_x` counts as zero and `w_x = 0`.
pub const TAU_ACT: f64 = 1e-30;
/// Stand-in for an unbounded `w_k / sqrt(..)` ratio.
pub const LARGE: f64 = 1e30;
/// Self-interference gain that makes simultaneous operation useless.
pub const HD_SENTINEL: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// Every node is tested against the previous iterate.
    Jacobi,
    /// Nodes are tested in index order, refreshing `w` and `l` after each.
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Independent random starts; the best one wins.
    pub restarts: usize,
    pub update_rule: UpdateRule,
    /// Finish each start with a local search on the exact objective.
    pub refine: bool,
    pub keep_trajectory: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 100,
            restarts: 3,
            update_rule: UpdateRule::Jacobi,
            refine: true,
            keep_trajectory: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("solver epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::Config("solver max_iters and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpIterate {
    pub n: usize,
    pub t_vec: Vec<u8>,
    pub w_vec: Vec<f64>,
    pub l_vec: Vec<f64>,
    pub lambda_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub state: ScheduleState,
    /// Weighted sum-rate of `state`.
    pub lambda: f64,
    /// Iterations of the winning start.
    pub iters: usize,
    /// Every start met the stopping rule before the iteration cap.
    pub converged: bool,
    /// Best objective reached by the iteration alone, before refinement.
    pub fp_lambda: f64,
    pub trajectory: Option<Vec<f64>>,
}

/// `A_x = P t d_x` and `B_x = 1 + P t i_x` for every node.
pub fn desired_and_interference(
    t_vec: &[u8],
    chan: &ChannelRealization,
    p_eff: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = chan.len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for x in 0..n {
        let mut ds = 0.0;
        let mut is = 0.0;
        for v in 0..n {
            if t_vec[v] == 1 {
                ds += chan.d.get(v, x);
                is += chan.i_mat.get(v, x);
            }
        }
        a[x] = p_eff * ds;
        b[x] = 1.0 + p_eff * is;
    }
    (a, b)
}

/// `w_x = (A_x + B_x) / sqrt(A_x)`, or 0 when `A_x` vanishes.
pub fn fp_update_w(t_vec: &[u8], chan: &ChannelRealization, p_eff: f64) -> Vec<f64> {
    let (a, b) = desired_and_interference(t_vec, chan, p_eff);
    a.iter()
        .zip(&b)
        .map(|(&a, &b)| if a < TAU_ACT { 0.0 } else { (a + b) / a.sqrt() })
        .collect()
}

/// `l_x = 1 / (|sqrt(A_x) - w_x|^2 + B_x)`.
pub fn fp_update_l(t_vec: &[u8], w_vec: &[f64], chan: &ChannelRealization, p_eff: f64) -> Vec<f64> {
    let (a, b) = desired_and_interference(t_vec, chan, p_eff);
    (0..a.len())
        .map(|x| 1.0 / ((a[x].sqrt() - w_vec[x]).powi(2) + b[x]))
        .collect()
}

/// The switching score of node `x`; the node stays off when it is `>= 0`.
///
/// `S_x = sum_k (P mu_k l_k / ln 2) [d_xk (1 - w_k / sqrt(P sum_{v != x} t_v d_vk)) + i_xk]`
pub fn threshold_score(
    x: usize,
    t_vec: &[u8],
    w_vec: &[f64],
    l_vec: &[f64],
    chan: &ChannelRealization,
    p_eff: f64,
    mu: &[f64],
) -> f64 {
    let n = chan.len();
    let mut score = 0.0;
    for k in 0..n {
        let d_xk = chan.d.get(x, k);
        let mut term = chan.i_mat.get(x, k);
        if d_xk > 0.0 {
            let others: f64 = (0..n)
                .filter(|&v| v != x && t_vec[v] == 1)
                .map(|v| chan.d.get(v, k))
                .sum();
            let root = (p_eff * others).sqrt();
            let ratio = if root < TAU_DIV {
                if w_vec[k] > 0.0 {
                    LARGE
                } else {
                    0.0
                }
            } else {
                w_vec[k] / root
            };
            term += d_xk * (1.0 - ratio);
        }
        score += p_eff * mu[k] * l_vec[k] / LN_2 * term;
    }
    score
}

/// Synchronous transmit-vector update from the previous iterate.
pub fn fp_update_t(
    prev: &FpIterate,
    chan: &ChannelRealization,
    p_eff: f64,
    mu: &WeightVector,
) -> Vec<u8> {
    (0..chan.len())
        .map(|x| {
            let s = threshold_score(x, &prev.t_vec, &prev.w_vec, &prev.l_vec, chan, p_eff, mu.as_slice());
            u8::from(s < 0.0)
        })
        .collect()
}

/// Turns a transmit vector into the full per-node state.
///
/// A node that is off listens when one of its desired sources is on and is
/// silent otherwise. A full-duplex node that is on also listens when one of
/// its sources is on; a half-duplex node that is on only transmits.
pub fn postprocess_states(t_vec: &[u8], topology: &Topology) -> ScheduleState {
    let nodes = (0..topology.len())
        .map(|x| {
            let source_on = topology.desired_sources(x).any(|k| t_vec[k] == 1);
            match (t_vec[x] == 1, source_on) {
                (false, true) => NodeState::Receive,
                (false, false) => NodeState::Silent,
                (true, true) if !topology.is_half_duplex(x) => NodeState::Both,
                (true, _) => NodeState::Transmit,
            }
        })
        .collect();
    ScheduleState::new(nodes)
}

/// Copy of `chan` whose self-interference gains are all [`HD_SENTINEL`].
pub fn hd_diag_transform(chan: &ChannelRealization) -> ChannelRealization {
    let mut out = chan.clone();
    for k in 0..out.len() {
        out.g.set(k, k, HD_SENTINEL);
        out.i_mat.set(k, k, HD_SENTINEL);
    }
    out
}

fn with_hd_sentinel(chan: &ChannelRealization, topology: &Topology) -> ChannelRealization {
    let mut out = chan.clone();
    for k in 0..out.len() {
        if topology.is_half_duplex(k) {
            out.g.set(k, k, HD_SENTINEL);
            out.i_mat.set(k, k, HD_SENTINEL);
        }
    }
    out
}

/// Exact weighted sum-rate reached by a transmit vector after
/// post-processing.
pub fn objective(
    t_vec: &[u8],
    topology: &Topology,
    chan: &ChannelRealization,
    p_eff: f64,
    mu: &WeightVector,
) -> f64 {
    let state = postprocess_states(t_vec, topology);
    let rates = rates_for_activity(&state.active(), &state.listening(), chan, p_eff);
    weighted(&rates, mu.as_slice())
}

fn iterate_at(
    n: usize,
    t_vec: Vec<u8>,
    work: &ChannelRealization,
    p_eff: f64,
    lambda_n: f64,
) -> FpIterate {
    let w_vec = fp_update_w(&t_vec, work, p_eff);
    let l_vec = fp_update_l(&t_vec, &w_vec, work, p_eff);
    FpIterate {
        n,
        t_vec,
        w_vec,
        l_vec,
        lambda_n,
    }
}

/// Outcome of one run of the iteration from a given start.
#[derive(Debug, Clone)]
pub struct FpRun {
    pub last: FpIterate,
    pub best_t: Vec<u8>,
    pub best_lambda: f64,
    pub converged: bool,
    pub trajectory: Vec<f64>,
}

/// Runs the alternating updates from `t0` until two consecutive objective
/// values differ by less than `epsilon` or the cap is hit.
pub fn run_iteration(
    t0: Vec<u8>,
    chan: &ChannelRealization,
    topology: &Topology,
    p_eff: f64,
    mu: &WeightVector,
    cfg: &SolverConfig,
) -> FpRun {
    let work = with_hd_sentinel(chan, topology);
    let lambda0 = objective(&t0, topology, chan, p_eff, mu);
    let mut current = iterate_at(0, t0, &work, p_eff, lambda0);
    let mut best_t = current.t_vec.clone();
    let mut best_lambda = lambda0;
    let mut trajectory = vec![lambda0];
    let mut converged = false;

    for n in 1..=cfg.max_iters {
        let t_next = match cfg.update_rule {
            UpdateRule::Jacobi => fp_update_t(&current, &work, p_eff, mu),
            UpdateRule::GaussSeidel => {
                let mut t = current.t_vec.clone();
                let mut w = current.w_vec.clone();
                let mut l = current.l_vec.clone();
                for x in 0..t.len() {
                    let s = threshold_score(x, &t, &w, &l, &work, p_eff, mu.as_slice());
                    let bit = u8::from(s < 0.0);
                    if bit != t[x] {
                        t[x] = bit;
                        w = fp_update_w(&t, &work, p_eff);
                        l = fp_update_l(&t, &w, &work, p_eff);
                    }
                }
                t
            }
        };
        let lambda_n = objective(&t_next, topology, chan, p_eff, mu);
        trajectory.push(lambda_n);
        if lambda_n > best_lambda {
            best_lambda = lambda_n;
            best_t = t_next.clone();
        }
        let delta = (lambda_n - current.lambda_n).abs();
        current = iterate_at(n, t_next, &work, p_eff, lambda_n);
        if delta < cfg.epsilon {
            converged = true;
            break;
        }
    }

    FpRun {
        last: current,
        best_t,
        best_lambda,
        converged,
        trajectory,
    }
}

/// Incremental evaluator for moves that toggle one or two entries of the
/// transmit vector.
struct MoveSearch<'a> {
    topology: &'a Topology,
    chan: &'a ChannelRealization,
    p_eff: f64,
    mu: &'a [f64],
    desired: Vec<f64>,
    interference: Vec<f64>,
    sources_on: Vec<usize>,
}

impl<'a> MoveSearch<'a> {
    fn new(
        t: &[u8],
        topology: &'a Topology,
        chan: &'a ChannelRealization,
        p_eff: f64,
        mu: &'a [f64],
    ) -> Self {
        let mut s = Self {
            topology,
            chan,
            p_eff,
            mu,
            desired: vec![0.0; t.len()],
            interference: vec![0.0; t.len()],
            sources_on: vec![0; t.len()],
        };
        s.reset(t);
        s
    }

    fn reset(&mut self, t: &[u8]) {
        let n = t.len();
        for k in 0..n {
            let (mut ds, mut is, mut on) = (0.0, 0.0, 0);
            for v in (0..n).filter(|&v| v != k) {
                if t[v] == 1 {
                    ds += self.chan.d.get(v, k);
                    is += self.chan.i_mat.get(v, k);
                    on += usize::from(self.topology.q(v, k));
                }
            }
            self.desired[k] = ds;
            self.interference[k] = is;
            self.sources_on[k] = on;
        }
    }

    /// Objective after toggling every node in `flips`.
    fn value(&self, t: &[u8], flips: &[usize]) -> f64 {
        let mut total = 0.0;
        for k in 0..t.len() {
            let (mut ds, mut is, mut on) = (self.desired[k], self.interference[k], self.sources_on[k]);
            let mut t_k = t[k] == 1;
            for &x in flips.iter().filter(|&&x| x != k) {
                let was_on = t[x] == 1;
                let sign = if was_on { -1.0 } else { 1.0 };
                ds += sign * self.chan.d.get(x, k);
                is += sign * self.chan.i_mat.get(x, k);
                if self.topology.q(x, k) {
                    on = if was_on { on - 1 } else { on + 1 };
                }
            }
            if flips.contains(&k) {
                t_k = !t_k;
            }
            let listens = on > 0 && (!t_k || !self.topology.is_half_duplex(k));
            if listens {
                // self-interference kept out of the running sums: it can be
                // many orders above the rest and would not cancel exactly
                let own = if t_k { self.chan.i_mat.get(k, k) } else { 0.0 };
                let rate = (1.0 + self.p_eff * ds.max(0.0) / (1.0 + self.p_eff * (is.max(0.0) + own))).log2();
                total += self.mu[k] * rate;
            }
        }
        total
    }
}

/// Steepest ascent on the exact objective over moves that toggle one node
/// or one desired link (both endpoints at once), until no move improves.
pub fn refine_flips(
    t_vec: &mut [u8],
    topology: &Topology,
    chan: &ChannelRealization,
    p_eff: f64,
    mu: &WeightVector,
    max_sweeps: usize,
) {
    let n = t_vec.len();
    let mut moves: Vec<Vec<usize>> = (0..n).map(|x| vec![x]).collect();
    for j in 0..n {
        for k in j + 1..n {
            if topology.q(j, k) || topology.q(k, j) {
                moves.push(vec![j, k]);
            }
        }
    }
    let mut search = MoveSearch::new(t_vec, topology, chan, p_eff, mu.as_slice());
    for _ in 0..max_sweeps {
        let here = search.value(t_vec, &[]);
        let mut best_gain = 1e-12 * here.abs().max(1.0);
        let mut best_move = None;
        for (idx, m) in moves.iter().enumerate() {
            let gain = search.value(t_vec, m) - here;
            if gain > best_gain {
                best_gain = gain;
                best_move = Some(idx);
            }
        }
        let Some(idx) = best_move else { break };
        for &x in &moves[idx] {
            t_vec[x] ^= 1;
        }
        search.reset(t_vec);
    }
}

/// Schedules one slot.
pub fn optimize_slot(
    chan: &ChannelRealization,
    topology: &Topology,
    p_eff: f64,
    mu: &WeightVector,
    cfg: &SolverConfig,
    rng: &mut impl Rng,
) -> Result<SolveResult> {
    cfg.validate()?;
    let k = topology.len();
    if chan.len() != k || mu.len() != k {
        return Err(Error::InvalidInput(format!(
            "size mismatch: topology {k}, channel {}, weights {}",
            chan.len(),
            mu.len()
        )));
    }

    let mut best: Option<(f64, Vec<u8>, FpRun)> = None;
    let mut all_converged = true;
    for _ in 0..cfg.restarts {
        let t0: Vec<u8> = (0..k).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let run = run_iteration(t0, chan, topology, p_eff, mu, cfg);
        all_converged &= run.converged;
        let mut t = run.best_t.clone();
        if cfg.refine {
            refine_flips(&mut t, topology, chan, p_eff, mu, cfg.max_iters.max(k));
        }
        let value = objective(&t, topology, chan, p_eff, mu);
        if best.as_ref().is_none_or(|(v, _, _)| value > *v) {
            best = Some((value, t, run));
        }
    }
    let (lambda, t, run) = best.expect("at least one restart");
    let state = postprocess_states(&t, topology);
    Ok(SolveResult {
        state,
        lambda,
        iters: run.last.n,
        converged: all_converged,
        fp_lambda: run.best_lambda,
        trajectory: cfg.keep_trajectory.then_some(run.trajectory),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Square;
    use crate::netmodel::{Duplex, NodeSpec};
    use crate::ratecore::weighted_sum_rate;
    use crate::rng::{stream, Domain};

    fn pair_topology(k: usize, duplex: Duplex) -> Topology {
        let nodes = (0..k)
            .map(|id| NodeSpec {
                id,
                position: [id as f64 * 10.0, 0.0],
                duplex,
            })
            .collect();
        Topology::paired(nodes).unwrap()
    }

    fn chan(topo: &Topology, rows: &[Vec<f64>]) -> ChannelRealization {
        ChannelRealization::from_gains(1, Square::from_rows(rows).unwrap(), topo).unwrap()
    }

    #[test]
    fn w_update_values() {
        // A = P t d_x with P = 1: one active source of gain a.
        let topo = pair_topology(2, Duplex::Full);
        let unit = chan(&topo, &[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(fp_update_w(&[1, 0], &unit, 1.0)[1], 2.0);
        let four = chan(&topo, &[vec![0.0, 4.0], vec![0.0, 0.0]]);
        assert_eq!(fp_update_w(&[1, 0], &four, 1.0)[1], 2.5);
        assert_eq!(fp_update_w(&[0, 0], &four, 1.0)[1], 0.0);
    }

    #[test]
    fn l_update_values() {
        let topo = pair_topology(2, Duplex::Full);
        let unit = chan(&topo, &[vec![0.0, 1.0], vec![0.0, 0.0]]);
        let w = fp_update_w(&[1, 0], &unit, 1.0);
        let l = fp_update_l(&[1, 0], &w, &unit, 1.0);
        assert_eq!(l[1], 0.5);
        // fixed point of w gives l = A / (B (A + B))
        let (a, b) = (1.0, 1.0);
        assert_eq!(l[1], a / (b * (a + b)));
        // A = 0 path: w = 0, l = 1 / (A + B) = 1
        let l0 = fp_update_l(&[0, 0], &[0.0, 0.0], &unit, 1.0);
        assert_eq!(l0[1], 1.0);
    }

    fn iterate(t: Vec<u8>, chan: &ChannelRealization, p: f64) -> FpIterate {
        iterate_at(0, t, chan, p, 0.0)
    }

    #[test]
    fn pure_interferer_is_silenced() {
        // node 0 only interferes with nodes 2 and 3
        let topo = Topology::new(
            (0..4)
                .map(|id| NodeSpec { id, position: [0.0, 0.0], duplex: Duplex::Full })
                .collect(),
            &[(2, 3), (3, 2), (1, 2)],
        )
        .unwrap();
        let mut g = vec![vec![0.0; 4]; 4];
        g[0][2] = 0.3;
        g[0][3] = 0.7;
        g[2][3] = 1.0;
        g[3][2] = 1.0;
        let ch = chan(&topo, &g);
        let it = iterate(vec![1, 1, 1, 0], &ch, 1.0);
        let mu = WeightVector::uniform(4);
        assert!(threshold_score(0, &it.t_vec, &it.w_vec, &it.l_vec, &ch, 1.0, mu.as_slice()) >= 0.0);
        assert_eq!(fp_update_t(&it, &ch, 1.0, &mu)[0], 0);
    }

    #[test]
    fn isolated_node_stays_off_on_zero_score() {
        let topo = pair_topology(4, Duplex::Full);
        let mut g = vec![vec![0.0; 4]; 4];
        g[2][3] = 1.0;
        g[3][2] = 1.0;
        let ch = chan(&topo, &g);
        let it = iterate(vec![1, 1, 1, 1], &ch, 1.0);
        let mu = WeightVector::uniform(4);
        let s = threshold_score(0, &it.t_vec, &it.w_vec, &it.l_vec, &ch, 1.0, mu.as_slice());
        assert_eq!(s, 0.0);
        assert_eq!(fp_update_t(&it, &ch, 1.0, &mu)[0], 0);
    }

    #[test]
    fn sole_desired_transmitter_guard() {
        let topo = pair_topology(2, Duplex::Full);
        let ch = chan(&topo, &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let it = iterate(vec![1, 0], &ch, 1.0);
        assert!(it.w_vec[1] > 0.0);
        let mu = WeightVector::uniform(2);
        let s = threshold_score(0, &it.t_vec, &it.w_vec, &it.l_vec, &ch, 1.0, mu.as_slice());
        assert!(s < -1e20);
        assert_eq!(fp_update_t(&it, &ch, 1.0, &mu)[0], 1);
    }

    #[test]
    fn postprocess_cases() {
        let fd = pair_topology(2, Duplex::Full);
        assert_eq!(postprocess_states(&[0, 1], &fd).code(), "rt");
        assert_eq!(postprocess_states(&[1, 1], &fd).code(), "ff");
        assert_eq!(postprocess_states(&[0, 0], &fd).code(), "ss");
        assert_eq!(postprocess_states(&[1, 0], &fd).code(), "tr");
        let hd = pair_topology(2, Duplex::Half);
        assert_eq!(postprocess_states(&[1, 1], &hd).code(), "tt");
    }

    #[test]
    fn diag_transform() {
        let topo = pair_topology(2, Duplex::Full);
        let ch = chan(&topo, &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let tr = hd_diag_transform(&ch);
        assert_eq!(tr.g.get(0, 0), 1e30);
        assert_eq!(tr.g.get(1, 1), 1e30);
        assert_eq!(tr.i_mat.get(1, 1), 1e30);
        assert_eq!(tr.d.get(1, 1), 0.0);
        assert_eq!(tr.g.get(0, 1), 1.0);
    }

    #[test]
    fn full_duplex_pair_goes_bidirectional() {
        let topo = pair_topology(2, Duplex::Full);
        let ch = chan(&topo, &[vec![0.1, 50.0], vec![40.0, 0.2]]);
        let p = 100.0;
        let mu = WeightVector::uniform(2);
        let res = optimize_slot(&ch, &topo, p, &mu, &SolverConfig::default(), &mut stream(1, Domain::Solver, 0)).unwrap();
        assert_eq!(res.state.code(), "ff");
        let expected = 0.5 * (1.0f64 + p * 50.0 / (1.0 + p * 0.2)).log2()
            + 0.5 * (1.0f64 + p * 40.0 / (1.0 + p * 0.1)).log2();
        assert!((res.lambda - expected).abs() < 1e-12);
    }

    #[test]
    fn half_duplex_pair_picks_better_direction() {
        let topo = pair_topology(2, Duplex::Half);
        let ch = chan(&topo, &[vec![0.0, 3.0], vec![8.0, 0.0]]);
        let mu = WeightVector::uniform(2);
        for seed in 0..20 {
            let res = optimize_slot(&ch, &topo, 1.0, &mu, &SolverConfig::default(), &mut stream(seed, Domain::Solver, 0)).unwrap();
            // 1 -> 0 carries gain 8, the larger of the two
            assert_eq!(res.state.code(), "rt");
            assert!((res.lambda - 0.5 * 9f64.log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn reported_lambda_matches_recomputation() {
        let cfg = crate::netmodel::SimConfig { n_pairs: 4, area_side_m: 300.0, ..Default::default() };
        for seed in 0..20 {
            let topo = crate::netmodel::generate_topology(&cfg, Duplex::Full, &mut stream(seed, Domain::Topology, 0)).unwrap();
            let ch = crate::netmodel::draw_channels(&topo, &cfg, 1, &mut stream(seed, Domain::Channel, 1)).unwrap();
            let mu = WeightVector::inverse_index(8);
            let res = optimize_slot(&ch, &topo, cfg.p_eff(), &mu, &SolverConfig::default(), &mut stream(seed, Domain::Solver, 1)).unwrap();
            let rec = weighted_sum_rate(&res.state, &ch, cfg.p_eff(), &mu);
            assert_eq!(rec.lambda, res.lambda);
        }
    }

    #[test]
    fn gauss_seidel_and_no_refine_still_valid() {
        let cfg = crate::netmodel::SimConfig { n_pairs: 3, area_side_m: 200.0, ..Default::default() };
        let topo = crate::netmodel::generate_topology(&cfg, Duplex::Half, &mut stream(4, Domain::Topology, 0)).unwrap();
        let ch = crate::netmodel::draw_channels(&topo, &cfg, 1, &mut stream(4, Domain::Channel, 1)).unwrap();
        let mu = WeightVector::uniform(6);
        for (rule, refine) in [(UpdateRule::GaussSeidel, true), (UpdateRule::GaussSeidel, false), (UpdateRule::Jacobi, false)] {
            let sc = SolverConfig { update_rule: rule, refine, keep_trajectory: true, ..Default::default() };
            let res = optimize_slot(&ch, &topo, cfg.p_eff(), &mu, &sc, &mut stream(4, Domain::Solver, 1)).unwrap();
            res.state.check(&topo).unwrap();
            assert!(res.iters <= sc.max_iters);
            let traj = res.trajectory.unwrap();
            if res.converged {
                let n = traj.len();
                assert!((traj[n - 1] - traj[n - 2]).abs() < sc.epsilon);
            }
        }
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let topo = pair_topology(2, Duplex::Full);
        let ch = chan(&topo, &[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let mu = WeightVector::uniform(3);
        assert!(optimize_slot(&ch, &topo, 1.0, &mu, &SolverConfig::default(), &mut stream(0, Domain::Solver, 0)).is_err());
    }
}
