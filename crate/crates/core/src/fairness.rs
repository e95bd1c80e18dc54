//! Demand-tracking weight controller.
//!
//! Each slot the scheduler runs with the current weights, the per-node
//! rates it delivers update running averages, and the weights are nudged
//! towards nodes whose average falls short of their demand.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpsched::{optimize_slot, SolverConfig};
use crate::netmodel::{draw_from_means, mean_gains, SimConfig, Topology};
use crate::ratecore::{average_rates, weighted_sum_rate, WeightVector};
use crate::rng::{slot_index, stream, Domain};

/// Decaying step `c / (d i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSize {
    pub c: f64,
    pub d: f64,
}

impl Default for StepSize {
    fn default() -> Self {
        Self { c: 1.0, d: 2.0 }
    }
}

impl StepSize {
    pub fn at(&self, i: u64) -> f64 {
        self.c / (self.d * i as f64)
    }
}

/// Direction of the weight correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSign {
    /// Under-served nodes gain weight.
    #[default]
    Corrective,
    /// `mu += delta * alpha * (r_bar - tau)`: over-served nodes gain weight.
    Literal,
}

impl FeedbackSign {
    fn factor(self) -> f64 {
        match self {
            FeedbackSign::Corrective => -1.0,
            FeedbackSign::Literal => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessState {
    pub mu_e: Vec<f64>,
    /// Demands, bits per slot per Hz.
    pub tau: Vec<f64>,
    /// Priorities; nonnegative, summing to one.
    pub alpha: Vec<f64>,
    pub r_bar_e: Vec<f64>,
    pub step: StepSize,
    pub sign: FeedbackSign,
}

impl FairnessState {
    /// Starts from uniform weights and zero rate estimates.
    pub fn new(tau: Vec<f64>, alpha: Vec<f64>, step: StepSize, sign: FeedbackSign) -> Result<Self> {
        let k = tau.len();
        if k == 0 {
            return Err(Error::Empty("demand vector"));
        }
        if alpha.len() != k {
            return Err(Error::InvalidInput(format!("{k} demands but {} priorities", alpha.len())));
        }
        if tau.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::InvalidInput("demands must be finite and nonnegative".into()));
        }
        if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidInput("priorities must lie in [0, 1]".into()));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("priorities sum to {total}, expected 1")));
        }
        if !(step.c > 0.0 && step.d > 0.0 && step.c.is_finite() && step.d.is_finite()) {
            return Err(Error::InvalidInput("step constants must be positive".into()));
        }
        Ok(Self {
            mu_e: vec![1.0 / k as f64; k],
            r_bar_e: vec![0.0; k],
            tau,
            alpha,
            step,
            sign,
        })
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Running mean: `r_bar(i) = (i-1)/i r_bar(i-1) + achieved / i`.
    pub fn update_rate_estimate(&mut self, i: u64, achieved: &[f64]) -> Result<()> {
        if i < 1 {
            return Err(Error::InvalidInput("slot index starts at 1".into()));
        }
        if achieved.len() != self.len() {
            return Err(Error::InvalidInput("achieved rate vector has the wrong length".into()));
        }
        let inv = 1.0 / i as f64;
        let keep = (i - 1) as f64 * inv;
        for (r, &a) in self.r_bar_e.iter_mut().zip(achieved) {
            *r = keep * *r + inv * a;
        }
        Ok(())
    }

    /// Moves the weights by the demand error, clamps at zero and
    /// renormalizes. Falls back to uniform weights if nothing is left.
    pub fn update_mu(&mut self, i: u64) -> Result<()> {
        if i < 1 {
            return Err(Error::InvalidInput("slot index starts at 1".into()));
        }
        let delta = self.step.at(i);
        let sign = self.sign.factor();
        for k in 0..self.len() {
            let err = self.r_bar_e[k] - self.tau[k];
            self.mu_e[k] = (self.mu_e[k] + delta * self.alpha[k] * sign * err).max(0.0);
        }
        let total: f64 = self.mu_e.iter().sum();
        if total > 0.0 && total.is_finite() {
            for m in &mut self.mu_e {
                *m /= total;
            }
        } else {
            log::warn!("slot {i}: all weights vanished, resetting to uniform");
            let u = 1.0 / self.len() as f64;
            self.mu_e.iter_mut().for_each(|m| *m = u);
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<WeightVector> {
        WeightVector::new(self.mu_e.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FairnessConfig {
    pub step: StepSize,
    pub sign: FeedbackSign,
}

/// State at the end of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessSlot {
    pub slot: u64,
    pub mu: Vec<f64>,
    pub r_bar_e: Vec<f64>,
    pub achieved: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessTrace {
    pub tau: Vec<f64>,
    pub slots: Vec<FairnessSlot>,
    /// Slots whose schedule was invalid for the node types or whose
    /// reported objective disagreed with recomputation.
    pub violations: usize,
}

#[derive(Serialize)]
struct TraceRow {
    slot: u64,
    node: usize,
    mu: f64,
    r_bar_e: f64,
    tau: f64,
    achieved_rate: f64,
}

impl FairnessTrace {
    pub fn final_rates(&self) -> &[f64] {
        self.slots.last().map(|s| s.r_bar_e.as_slice()).unwrap_or(&[])
    }

    /// Per-node mean of the weights over all slots.
    pub fn mean_mu(&self) -> Vec<f64> {
        let k = self.tau.len();
        let mut acc = vec![0.0; k];
        for s in &self.slots {
            for (a, m) in acc.iter_mut().zip(&s.mu) {
                *a += m;
            }
        }
        let n = self.slots.len().max(1) as f64;
        acc.into_iter().map(|a| a / n).collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.slots {
            for k in 0..self.tau.len() {
                w.serialize(TraceRow {
                    slot: s.slot,
                    node: k + 1,
                    mu: s.mu[k],
                    r_bar_e: s.r_bar_e[k],
                    tau: self.tau[k],
                    achieved_rate: s.achieved[k],
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `n_slots` slots of scheduling with adaptive weights. Slot `i` draws
/// its channel and solver randomness from streams keyed by `(seed, i)`.
pub fn run_fairness_loop(
    sim: &SimConfig,
    solver: &SolverConfig,
    fairness: &FairnessConfig,
    topology: &Topology,
    demands: &[f64],
    priorities: &[f64],
    n_slots: u64,
    seed: u64,
) -> Result<FairnessTrace> {
    if demands.len() != topology.len() {
        return Err(Error::InvalidInput(format!(
            "{} demands for {} nodes",
            demands.len(),
            topology.len()
        )));
    }
    let mut state = FairnessState::new(demands.to_vec(), priorities.to_vec(), fairness.step, fairness.sign)?;
    let means = mean_gains(topology, sim)?;
    let p_eff = sim.p_eff();
    let mut slots = Vec::with_capacity(n_slots as usize);
    let mut violations = 0;
    for i in 1..=n_slots {
        let idx = slot_index(0, i);
        let chan = draw_from_means(topology, &means, i, &mut stream(seed, Domain::Channel, idx))?;
        let mu = state.weights()?;
        let res = optimize_slot(&chan, topology, p_eff, &mu, solver, &mut stream(seed, Domain::Solver, idx))?;
        let record = weighted_sum_rate(&res.state, &chan, p_eff, &mu);
        if res.state.check(topology).is_err()
            || (res.lambda - record.lambda).abs() > 1e-9 * record.lambda.abs().max(f64::MIN_POSITIVE)
        {
            violations += 1;
        }
        let achieved = record.per_node_rate;
        state.update_rate_estimate(i, &achieved)?;
        state.update_mu(i)?;
        slots.push(FairnessSlot {
            slot: i,
            mu: state.mu_e.clone(),
            r_bar_e: state.r_bar_e.clone(),
            achieved,
        });
    }
    Ok(FairnessTrace {
        tau: state.tau,
        slots,
        violations,
    })
}

/// Average per-node rate of the plain scheduler with uniform weights over
/// `n_slots` slots, on streams separate from the ones the loop uses.
pub fn unconstrained_rates(
    sim: &SimConfig,
    solver: &SolverConfig,
    topology: &Topology,
    n_slots: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_slots == 0 {
        return Err(Error::Empty("calibration"));
    }
    let means = mean_gains(topology, sim)?;
    let p_eff = sim.p_eff();
    let mu = WeightVector::uniform(topology.len());
    let mut records = Vec::with_capacity(n_slots as usize);
    for i in 1..=n_slots {
        let mut rng = stream(seed, Domain::Calibration, i);
        let chan = draw_from_means(topology, &means, i, &mut rng)?;
        let res = optimize_slot(&chan, topology, p_eff, &mu, solver, &mut rng)?;
        records.push(weighted_sum_rate(&res.state, &chan, p_eff, &mu));
    }
    average_rates(&records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two(tau: Vec<f64>) -> FairnessState {
        FairnessState::new(tau, vec![0.5, 0.5], StepSize::default(), FeedbackSign::Corrective).unwrap()
    }

    #[test]
    fn estimate_is_running_mean() {
        let mut s = two(vec![0.0, 0.0]);
        s.update_rate_estimate(1, &[1.0, 3.0]).unwrap();
        assert_eq!(s.r_bar_e, vec![1.0, 3.0]);
        s.update_rate_estimate(2, &[0.0, 3.0]).unwrap();
        assert_eq!(s.r_bar_e, vec![0.5, 3.0]);
        assert!(s.update_rate_estimate(0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn mu_update_hand_value() {
        let mut s = two(vec![0.0, 2.0]);
        s.r_bar_e = vec![1.0, 1.0];
        // i = 1 gives delta = 0.5
        s.update_mu(1).unwrap();
        assert!((s.mu_e[0] - 0.25).abs() < 1e-15);
        assert!((s.mu_e[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn literal_sign_goes_the_other_way() {
        let mut s = FairnessState::new(vec![0.0, 2.0], vec![0.5, 0.5], StepSize::default(), FeedbackSign::Literal).unwrap();
        s.r_bar_e = vec![1.0, 1.0];
        s.update_mu(1).unwrap();
        assert!(s.mu_e[0] > s.mu_e[1]);
    }

    #[test]
    fn zero_error_keeps_mu() {
        let mut s = two(vec![1.0, 2.0]);
        s.mu_e = vec![0.3, 0.7];
        s.r_bar_e = vec![1.0, 2.0];
        s.update_mu(4).unwrap();
        assert_eq!(s.mu_e, vec![0.3, 0.7]);
    }

    #[test]
    fn wiped_out_weights_reset_to_uniform() {
        let mut s = FairnessState::new(vec![0.0, 0.0], vec![0.5, 0.5], StepSize { c: 100.0, d: 1.0 }, FeedbackSign::Corrective).unwrap();
        s.r_bar_e = vec![5.0, 5.0];
        s.update_mu(1).unwrap();
        assert_eq!(s.mu_e, vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_priorities() {
        assert!(FairnessState::new(vec![1.0, 1.0], vec![0.7, 0.7], StepSize::default(), FeedbackSign::Corrective).is_err());
        assert!(FairnessState::new(vec![-1.0, 1.0], vec![0.5, 0.5], StepSize::default(), FeedbackSign::Corrective).is_err());
    }

    #[test]
    fn default_step_decays_and_sums_up() {
        let step = StepSize::default();
        assert_eq!(step.at(1), 0.5);
        let partial: f64 = (1..=5000).map(|i| step.at(i)).sum();
        assert!(step.at(5000) < 1e-3);
        assert!(partial > 4.0); // ~ ln(5000)/2
    }
}
