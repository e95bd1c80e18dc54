//! Run configuration files.
//!
//! A config file is a JSON object holding [`SimConfig`] keys at the top
//! level plus optional `solver`, `experiment` and `fairness` blocks. Unknown
//! keys anywhere are rejected. Solver `epsilon`/`max_iters` default to the
//! top-level values unless the `solver` block sets them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::fairness::{FairnessConfig, FeedbackSign, StepSize};
use crate::fpsched::SolverConfig;
use crate::netmodel::SimConfig;
use crate::oracle::GapConfig;
use crate::ratecore::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    Uniform,
    /// `mu_k` proportional to `1/k`.
    #[default]
    InverseIndex,
}

impl WeightRule {
    pub fn weights(self, k: usize) -> WeightVector {
        match self {
            WeightRule::Uniform => WeightVector::uniform(k),
            WeightRule::InverseIndex => WeightVector::inverse_index(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Independent topology drops per grid point.
    pub reps: usize,
    pub weights: WeightRule,
    pub power_grid_dbm: Vec<f64>,
    pub dim_grid_m: Vec<f64>,
    pub mu1_grid: Vec<f64>,
    /// Overrides the per-subcommand default scheme list.
    pub schemes: Option<Vec<String>>,
    pub complexity_nodes: Vec<usize>,
    pub complexity_trials: usize,
    pub oracle: GapConfig,
    pub oracle_instances: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            reps: 10,
            weights: WeightRule::InverseIndex,
            power_grid_dbm: (0..9).map(|i| -10.0 + 5.0 * i as f64).collect(),
            dim_grid_m: vec![250.0, 500.0, 1000.0, 2000.0],
            mu1_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            schemes: None,
            complexity_nodes: vec![4, 6, 8, 10, 12],
            complexity_trials: 30,
            oracle: GapConfig::default(),
            oracle_instances: 500,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("experiment.reps must be at least 1".into()));
        }
        for (name, grid) in [
            ("power_grid_dbm", &self.power_grid_dbm),
            ("dim_grid_m", &self.dim_grid_m),
            ("mu1_grid", &self.mu1_grid),
        ] {
            if grid.is_empty() {
                return Err(Error::Config(format!("experiment.{name} must not be empty")));
            }
            if grid.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("experiment.{name} has non-finite values")));
            }
        }
        if self.dim_grid_m.iter().any(|&v| v <= 0.0) {
            return Err(Error::Config("experiment.dim_grid_m must be positive".into()));
        }
        if self.mu1_grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Config("experiment.mu1_grid must lie in [0, 1]".into()));
        }
        if self.complexity_nodes.is_empty()
            || self.complexity_nodes.iter().any(|&k| k < 2 || k % 2 == 1)
        {
            return Err(Error::Config(
                "experiment.complexity_nodes must be non-empty even node counts".into(),
            ));
        }
        if self.complexity_trials == 0 || self.oracle_instances == 0 {
            return Err(Error::Config("trial and instance counts must be at least 1".into()));
        }
        if let Some(s) = &self.schemes {
            if s.is_empty() {
                return Err(Error::Config("experiment.schemes must not be empty".into()));
            }
        }
        Ok(())
    }
}

/// How per-node demands are set for the fairness run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandRule {
    /// `tau_k = k / 2` with 1-based node numbers.
    HalfIndex,
    Explicit { values: Vec<f64> },
    /// A fraction of each node's average rate under the plain scheduler
    /// with uniform weights.
    FractionOfUnconstrained { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FairnessRun {
    pub demand: DemandRule,
    /// Defaults to equal priorities.
    pub priorities: Option<Vec<f64>>,
    pub n_slots: u64,
    pub calibration_slots: u64,
    pub step: StepSize,
    pub sign: FeedbackSign,
}

impl Default for FairnessRun {
    fn default() -> Self {
        Self {
            demand: DemandRule::HalfIndex,
            priorities: None,
            n_slots: 5000,
            calibration_slots: 2000,
            step: StepSize::default(),
            sign: FeedbackSign::default(),
        }
    }
}

impl FairnessRun {
    pub fn controller(&self) -> FairnessConfig {
        FairnessConfig {
            step: self.step,
            sign: self.sign,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
    pub fairness: FairnessRun,
}

fn block<T: serde::de::DeserializeOwned + Default>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    match map.remove(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| Error::Config(format!("{key}: {e}"))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let Value::Object(mut map) = value else {
            return Err(Error::Config("config must be a JSON object".into()));
        };
        let solver_explicit = map.get("solver").cloned();
        let solver: Option<SolverConfig> = block(&mut map, "solver")?;
        let experiment = block(&mut map, "experiment")?.unwrap_or_default();
        let fairness = block(&mut map, "fairness")?.unwrap_or_default();
        let sim: SimConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;

        let mut solver = solver.unwrap_or_default();
        let sets = |key: &str| {
            solver_explicit
                .as_ref()
                .and_then(|v| v.as_object())
                .is_some_and(|o| o.contains_key(key))
        };
        if !sets("epsilon") {
            solver.epsilon = sim.epsilon;
        }
        if !sets("max_iters") {
            solver.max_iters = sim.max_iters;
        }
        let cfg = RunConfig { sim, solver, experiment, fairness };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.solver.validate()?;
        self.experiment.validate()?;
        if let DemandRule::FractionOfUnconstrained { fraction } = self.fairness.demand {
            if !(fraction > 0.0 && fraction.is_finite()) {
                return Err(Error::Config("fairness demand fraction must be positive".into()));
            }
        }
        if self.fairness.n_slots == 0 {
            return Err(Error::Config("fairness.n_slots must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn top_level_solver_keys_propagate() {
        let cfg = RunConfig::from_json(r#"{"epsilon": 1e-4, "max_iters": 7}"#).unwrap();
        assert_eq!(cfg.solver.epsilon, 1e-4);
        assert_eq!(cfg.solver.max_iters, 7);
        let cfg = RunConfig::from_json(r#"{"max_iters": 7, "solver": {"max_iters": 9}}"#).unwrap();
        assert_eq!(cfg.solver.max_iters, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"n_pair": 3}"#,
            r#"{"solver": {"restart": 2}}"#,
            r#"{"experiment": {"rep": 2}}"#,
            r#"{"fairness": {"demand": {"rule": "nope"}}}"#,
        ] {
            assert!(RunConfig::from_json(text).unwrap_err().is_config(), "{text}");
        }
    }

    #[test]
    fn blocks_parse() {
        let cfg = RunConfig::from_json(
            r#"{"n_pairs": 5, "seed": 3,
                "solver": {"restarts": 1, "update_rule": "gauss-seidel"},
                "experiment": {"reps": 2, "weights": "uniform", "schemes": ["bs1"]},
                "fairness": {"demand": {"rule": "fraction_of_unconstrained", "fraction": 0.5}, "sign": "literal"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.sim.n_pairs, 5);
        assert_eq!(cfg.solver.restarts, 1);
        assert_eq!(cfg.experiment.weights, WeightRule::Uniform);
        assert_eq!(cfg.fairness.sign, FeedbackSign::Literal);
        assert_eq!(cfg.fairness.demand, DemandRule::FractionOfUnconstrained { fraction: 0.5 });
    }

    #[test]
    fn bad_values_rejected() {
        assert!(RunConfig::from_json(r#"{"experiment": {"reps": 0}}"#).unwrap_err().is_config());
        assert!(RunConfig::from_json(r#"{"pathloss_exp": 1.5}"#).unwrap_err().is_config());
        assert!(RunConfig::from_json("[1]").unwrap_err().is_config());
    }
}
