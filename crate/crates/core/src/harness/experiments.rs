use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{DemandRule, RunConfig};
use super::scheme::{run_scheme, Scheme, SchemeRun};
use crate::error::{Error, Result};
use crate::fairness::{run_fairness_loop, unconstrained_rates, FairnessTrace};
use crate::fpsched::optimize_slot;
use crate::netmodel::{draw_channels, generate_topology, Duplex, SimConfig, Topology};
use crate::oracle::{brute_force_slot, oracle_gap_report, GapReport};
use crate::ratecore::WeightVector;
use crate::rng::{stream, Domain};

/// Node layout of repetition `rep`. Layouts are generated full-duplex and
/// converted per scheme.
pub fn layout(sim: &SimConfig, seed: u64, rep: u64) -> Result<Topology> {
    generate_topology(sim, Duplex::Full, &mut stream(seed, Domain::Topology, rep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    TxPowerDbm,
    AreaSideM,
}

impl SweepAxis {
    pub fn apply(self, base: &SimConfig, x: f64) -> SimConfig {
        let mut sim = base.clone();
        match self {
            SweepAxis::TxPowerDbm => sim.tx_power_dbm = x,
            SweepAxis::AreaSideM => sim.area_side_m = x,
        }
        sim
    }
}

/// One (grid point, scheme, repetition) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub x_value: f64,
    pub scheme: Scheme,
    pub si_db: Option<f64>,
    pub rep: u64,
    pub outcome: std::result::Result<CellStats, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub avg_rates: Vec<f64>,
    pub sum_rate: f64,
    pub slots: usize,
    pub converged: usize,
    pub violations: usize,
}

impl CellStats {
    fn from_run(run: &SchemeRun) -> Result<Self> {
        let avg_rates = run.average_rates()?;
        Ok(Self {
            sum_rate: avg_rates.iter().sum(),
            avg_rates,
            slots: run.records.len(),
            converged: run.converged,
            violations: run.violations,
        })
    }
}

fn run_cell(
    cfg: &RunConfig,
    sim: &SimConfig,
    scheme: Scheme,
    mu_for: impl Fn(&Topology) -> Result<WeightVector>,
    rep: u64,
) -> Result<CellStats> {
    let seed = cfg.sim.seed;
    let layout = layout(sim, seed, rep)?;
    let mu = mu_for(&layout)?;
    let run = run_scheme(scheme, &layout, sim, &cfg.solver, &mu, rep, seed)?;
    CellStats::from_run(&run)
}

/// Runs every `(x, scheme, rep)` cell of a sweep. Cells that fail are kept
/// with their error message; the rest of the grid still runs.
pub fn sweep_cells(cfg: &RunConfig, axis: SweepAxis, grid: &[f64], schemes: &[Scheme]) -> Vec<Cell> {
    let reps = cfg.experiment.reps as u64;
    let jobs: Vec<(f64, Scheme, u64)> = grid
        .iter()
        .flat_map(|&x| schemes.iter().flat_map(move |&s| (0..reps).map(move |r| (x, s, r))))
        .collect();
    jobs.into_par_iter()
        .map(|(x, scheme, rep)| {
            let sim = axis.apply(&cfg.sim, x);
            let outcome = run_cell(cfg, &sim, scheme, |t| Ok(cfg.experiment.weights.weights(t.len())), rep)
                .map_err(|e| e.to_string());
            Cell {
                x_value: x,
                scheme,
                si_db: scheme.si_db(&sim),
                rep,
                outcome,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x_value: f64,
    pub scheme: String,
    pub si_db: Option<f64>,
    pub mean_sum_rate: Option<f64>,
    pub stderr: Option<f64>,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRow {
    pub x_value: f64,
    pub scheme: String,
    pub si_db: Option<f64>,
    pub rep: u64,
    pub sum_rate: Option<f64>,
    pub converged_slots: Option<usize>,
    pub slots: Option<usize>,
    pub error: String,
}

pub fn rep_rows(cells: &[Cell]) -> Vec<RepRow> {
    cells
        .iter()
        .map(|c| {
            let ok = c.outcome.as_ref().ok();
            RepRow {
                x_value: c.x_value,
                scheme: c.scheme.base_name().to_string(),
                si_db: c.si_db,
                rep: c.rep,
                sum_rate: ok.map(|s| s.sum_rate),
                converged_slots: ok.map(|s| s.converged),
                slots: ok.map(|s| s.slots),
                error: c.outcome.as_ref().err().cloned().unwrap_or_default(),
            }
        })
        .collect()
}

/// Mean and standard error of the mean.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One row per (grid point, scheme), in grid order then scheme order.
/// Failed repetitions are left out of the mean.
pub fn aggregate(cells: &[Cell], grid: &[f64], schemes: &[Scheme]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(grid.len() * schemes.len());
    for &x in grid {
        for &scheme in schemes {
            let group: Vec<&Cell> = cells
                .iter()
                .filter(|c| c.x_value == x && c.scheme == scheme)
                .collect();
            let sums: Vec<f64> = group
                .iter()
                .filter_map(|c| c.outcome.as_ref().ok().map(|s| s.sum_rate))
                .collect();
            let (mean, se) = if sums.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_stderr(&sums);
                (Some(m), Some(s))
            };
            rows.push(SweepRow {
                x_value: x,
                scheme: scheme.base_name().to_string(),
                si_db: group.first().and_then(|c| c.si_db),
                mean_sum_rate: mean,
                stderr: se,
                n_reps: sums.len(),
            });
        }
    }
    rows
}

/// Weights with total `mu1` spread over the first node of each pair and
/// `1 - mu1` over the partners.
pub fn group_weights(layout: &Topology, mu1: f64) -> Result<WeightVector> {
    let pairs = layout.pairs()?;
    let share = 1.0 / pairs.len() as f64;
    let mut mu = vec![0.0; layout.len()];
    for (a, b) in pairs {
        mu[a] = mu1 * share;
        mu[b] = (1.0 - mu1) * share;
    }
    WeightVector::new(mu)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionRow {
    pub mu1: f64,
    pub scheme: String,
    pub rate_group1: Option<f64>,
    pub rate_group2: Option<f64>,
}

/// One (mu1, scheme, repetition) cell of the rate region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell {
    pub mu1: f64,
    pub scheme: Scheme,
    pub rep: u64,
    /// Group sum-rates and run statistics, or the error message.
    pub outcome: std::result::Result<((f64, f64), CellStats), String>,
}

pub fn rate_region_cells(cfg: &RunConfig, schemes: &[Scheme]) -> Vec<RegionCell> {
    let reps = cfg.experiment.reps as u64;
    let seed = cfg.sim.seed;
    let jobs: Vec<(f64, Scheme, u64)> = cfg
        .experiment
        .mu1_grid
        .iter()
        .flat_map(|&m| schemes.iter().flat_map(move |&s| (0..reps).map(move |r| (m, s, r))))
        .collect();
    jobs.into_par_iter()
        .map(|(mu1, scheme, rep)| {
            let outcome = (|| {
                let layout = layout(&cfg.sim, seed, rep)?;
                let pairs = layout.pairs()?;
                let mu = group_weights(&layout, mu1)?;
                let run = run_scheme(scheme, &layout, &cfg.sim, &cfg.solver, &mu, rep, seed)?;
                let stats = CellStats::from_run(&run)?;
                let g1 = pairs.iter().map(|&(a, _)| stats.avg_rates[a]).sum();
                let g2 = pairs.iter().map(|&(_, b)| stats.avg_rates[b]).sum();
                Ok::<_, Error>(((g1, g2), stats))
            })()
            .map_err(|e| e.to_string());
            RegionCell { mu1, scheme, rep, outcome }
        })
        .collect()
}

/// Group sum-rates for every `mu1` on the grid, averaged over repetitions.
pub fn region_rows(cells: &[RegionCell], grid: &[f64], schemes: &[Scheme]) -> Vec<RegionRow> {
    let mut rows = Vec::with_capacity(grid.len() * schemes.len());
    for &mu1 in grid {
        for &scheme in schemes {
            let ok: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.mu1 == mu1 && c.scheme == scheme)
                .filter_map(|c| c.outcome.as_ref().ok().map(|(g, _)| *g))
                .collect();
            let (g1, g2) = if ok.is_empty() {
                (None, None)
            } else {
                let n = ok.len() as f64;
                (
                    Some(ok.iter().map(|p| p.0).sum::<f64>() / n),
                    Some(ok.iter().map(|p| p.1).sum::<f64>() / n),
                )
            };
            rows.push(RegionRow {
                mu1,
                scheme: scheme.to_string(),
                rate_group1: g1,
                rate_group2: g2,
            });
        }
    }
    rows
}

pub fn rate_region(cfg: &RunConfig, schemes: &[Scheme]) -> Vec<RegionRow> {
    let cells = rate_region_cells(cfg, schemes);
    for c in &cells {
        if let Err(e) = &c.outcome {
            log::warn!("{} at mu1={}, rep {}: {e}", c.scheme, c.mu1, c.rep);
        }
    }
    region_rows(&cells, &cfg.experiment.mu1_grid, schemes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRateRow {
    pub scheme: String,
    pub si_db: Option<f64>,
    pub rep: u64,
    pub node: usize,
    pub mean_rate: Option<f64>,
    pub error: String,
}

/// Per-node average rates of each scheme on each repetition, at the base
/// configuration.
pub fn simulate(cfg: &RunConfig, schemes: &[Scheme]) -> Vec<NodeRateRow> {
    let cells = sweep_cells(cfg, SweepAxis::TxPowerDbm, &[cfg.sim.tx_power_dbm], schemes);
    let k = 2 * cfg.sim.n_pairs;
    let mut rows = Vec::new();
    for c in cells {
        for node in 0..k {
            let (mean_rate, error) = match &c.outcome {
                Ok(s) => (Some(s.avg_rates[node]), String::new()),
                Err(e) => (None, e.clone()),
            };
            rows.push(NodeRateRow {
                scheme: c.scheme.base_name().to_string(),
                si_db: c.si_db,
                rep: c.rep,
                node: node + 1,
                mean_rate,
                error,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub n_nodes: usize,
    pub algorithm: String,
    pub median_time_us: f64,
    pub mean_iters: Option<f64>,
    pub n_trials: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Wall-clock of one scheduling decision, iterative versus exhaustive, for
/// each node count. Runs single-threaded so the timings are comparable.
pub fn complexity(cfg: &RunConfig) -> Result<Vec<ComplexityRow>> {
    let seed = cfg.sim.seed;
    let trials = cfg.experiment.complexity_trials;
    let mut rows = Vec::new();
    for &k in &cfg.experiment.complexity_nodes {
        let sim = SimConfig { n_pairs: k / 2, ..cfg.sim.clone() };
        let mut t_alg = Vec::with_capacity(trials);
        let mut t_bf = Vec::with_capacity(trials);
        let mut iters = 0usize;
        for trial in 0..trials as u64 {
            let topo = layout(&sim, seed, trial)?;
            let chan = draw_channels(&topo, &sim, 1, &mut stream(seed, Domain::Channel, trial))?;
            let mu = WeightVector::uniform(k);
            let p = sim.p_eff();

            let mut rng = stream(seed, Domain::Solver, trial);
            let start = Instant::now();
            let res = optimize_slot(&chan, &topo, p, &mu, &cfg.solver, &mut rng)?;
            t_alg.push(start.elapsed().as_secs_f64() * 1e6);
            iters += res.iters;

            let start = Instant::now();
            let (_, lambda) = brute_force_slot(&chan, &topo, p, &mu)?;
            t_bf.push(start.elapsed().as_secs_f64() * 1e6);
            if res.lambda > lambda * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::InvalidInput(format!(
                    "scheduler beat exhaustive search at {k} nodes (trial {trial})"
                )));
            }
        }
        rows.push(ComplexityRow {
            n_nodes: k,
            algorithm: "optimize_slot".into(),
            median_time_us: median(t_alg),
            mean_iters: Some(iters as f64 / trials as f64),
            n_trials: trials,
        });
        rows.push(ComplexityRow {
            n_nodes: k,
            algorithm: "brute_force_slot".into(),
            median_time_us: median(t_bf),
            mean_iters: None,
            n_trials: trials,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

pub fn oracle_compare(cfg: &RunConfig) -> Result<GapReport> {
    oracle_gap_report(
        cfg.experiment.oracle_instances,
        &cfg.experiment.oracle,
        &cfg.sim,
        &cfg.solver,
        cfg.sim.seed,
    )
}

/// Demands for the fairness run on `topology`.
pub fn demands(cfg: &RunConfig, topology: &Topology) -> Result<Vec<f64>> {
    let k = topology.len();
    match &cfg.fairness.demand {
        DemandRule::HalfIndex => Ok((1..=k).map(|x| x as f64 / 2.0).collect()),
        DemandRule::Explicit { values } => {
            if values.len() != k {
                return Err(Error::Config(format!("{} explicit demands for {k} nodes", values.len())));
            }
            Ok(values.clone())
        }
        DemandRule::FractionOfUnconstrained { fraction } => {
            let base = unconstrained_rates(&cfg.sim, &cfg.solver, topology, cfg.fairness.calibration_slots, cfg.sim.seed)?;
            Ok(base.into_iter().map(|r| fraction * r).collect())
        }
    }
}

pub fn fairness(cfg: &RunConfig) -> Result<FairnessTrace> {
    let seed = cfg.sim.seed;
    let topology = layout(&cfg.sim, seed, 0)?;
    let k = topology.len();
    let tau = demands(cfg, &topology)?;
    let alpha = cfg
        .fairness
        .priorities
        .clone()
        .unwrap_or_else(|| vec![1.0 / k as f64; k]);
    run_fairness_loop(
        &cfg.sim,
        &cfg.solver,
        &cfg.fairness.controller(),
        &topology,
        &tau,
        &alpha,
        cfg.fairness.n_slots,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [4.0, 6.0, 8.0, 10.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.5)).collect();
        assert!((loglog_slope(&x, &y) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn group_weights_split() {
        let cfg = SimConfig { n_pairs: 4, ..SimConfig::default() };
        let t = layout(&cfg, 1, 0).unwrap();
        let mu = group_weights(&t, 0.2).unwrap();
        let pairs = t.pairs().unwrap();
        let g1: f64 = pairs.iter().map(|&(a, _)| mu.as_slice()[a]).sum();
        assert!((g1 - 0.2).abs() < 1e-15);
    }
}
