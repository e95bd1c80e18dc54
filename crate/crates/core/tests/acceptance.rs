//! End-to-end acceptance checks. Runs as a plain binary so that every
//! check prints exactly one verdict line. A failed check is reported, not
//! fatal; set `ACCEPTANCE_STRICT=1` to exit non-zero when any check fails.

use std::time::Instant;

use rand::seq::SliceRandom;

use dtdd_core::fairness::FairnessTrace;
use dtdd_core::fpsched::{hd_diag_transform, optimize_slot, SolverConfig};
use dtdd_core::harness::experiments::{
    self, loglog_slope, mean_stderr, region_rows, sweep_cells, Cell, RegionCell,
};
use dtdd_core::harness::{
    run_experiment, DemandRule, ExperimentKind, ExperimentSpec, RunConfig, Scheme, SweepAxis, WeightRule,
};
use dtdd_core::netmodel::{draw_channels, generate_topology, Duplex, SimConfig};
use dtdd_core::oracle::{brute_force_slot, GapConfig, GapReport};
use dtdd_core::prelude::*;
use dtdd_core::rng::{stream, Domain};

const SEED: u64 = 0;

struct Verdicts {
    lines: Vec<(&'static str, bool, String)>,
}

impl Verdicts {
    fn record(&mut self, id: &'static str, pass: bool, detail: String) {
        self.lines.push((id, pass, detail));
    }
}

fn scheme(s: &str) -> Scheme {
    s.parse().unwrap()
}

fn desk_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.sim.seed = SEED;
    cfg
}

/// Structural problems seen so far, with the number of slots inspected.
#[derive(Default)]
struct Structure {
    slots: usize,
    violations: usize,
}

impl Structure {
    fn add_cells(&mut self, cells: &[Cell]) {
        for c in cells {
            match &c.outcome {
                Ok(s) => {
                    self.slots += s.slots;
                    self.violations += s.violations;
                }
                Err(_) => self.violations += 1,
            }
        }
    }

    fn add_region(&mut self, cells: &[RegionCell]) {
        for c in cells {
            match &c.outcome {
                Ok((_, s)) => {
                    self.slots += s.slots;
                    self.violations += s.violations;
                }
                Err(_) => self.violations += 1,
            }
        }
    }

    fn add_trace(&mut self, t: &FairnessTrace) {
        self.slots += t.slots.len();
        self.violations += t.violations;
    }

    fn add_report(&mut self, r: &GapReport) {
        self.slots += r.rows.len();
        self.violations += r.rows.iter().filter(|r| !r.consistent).count();
    }
}

fn oracle_suite(v: &mut Verdicts, structure: &mut Structure) {
    let base = SimConfig { seed: SEED, ..SimConfig::default() };
    let gap = GapConfig {
        n_pairs: 4,
        area_side_m: 250.0,
        si_suppression_db: 110.0,
        duplex: Duplex::Full,
        target_median_snr_db: Some(15.0),
    };
    let solver = SolverConfig { restarts: 3, epsilon: 1e-6, max_iters: 100, ..SolverConfig::default() };
    let start = Instant::now();
    let report = dtdd_core::oracle::oracle_gap_report(500, &gap, &base, &solver, SEED).unwrap();
    let secs = start.elapsed().as_secs_f64();
    structure.add_report(&report);

    let frac95 = report.fraction_at_least(0.95);
    let mean = report.mean_ratio();
    let dominated = report.rows.iter().all(|r| r.lambda_alg <= r.lambda_oracle);
    v.record(
        "1",
        frac95 >= 0.90 && mean >= 0.97 && dominated && secs < 60.0,
        format!(
            "ratio>=0.95 on {:.1}% (need 90%), mean ratio {mean:.4} (need 0.97), dominance {}, \
             exact optimum on {:.1}%, {secs:.1}s (limit 60s)",
            100.0 * frac95,
            if dominated { "holds on all 500" } else { "VIOLATED" },
            100.0 * report.fraction_exact(),
        ),
    );

    let conv = report.fraction_converged();
    v.record(
        "2",
        conv >= 0.99 && report.rows.len() == 500,
        format!(
            "{:.1}% of slots met the stopping rule within 100 iterations (need 99%), {}/500 terminated",
            100.0 * conv,
            report.rows.len()
        ),
    );
}

/// Half-duplex nodes as a structural mask versus full-duplex nodes with a
/// huge self-interference gain: same decisions once the simultaneous
/// state of a saturated node is read as transmit-only.
fn mask_equivalence() -> (usize, usize) {
    let sim = SimConfig { n_pairs: 2, area_side_m: 250.0, ..SimConfig::default() };
    let mut same = 0;
    let n = 100;
    for i in 0..n {
        let hd = generate_topology(&sim, Duplex::Half, &mut stream(SEED + i, Domain::Topology, 0)).unwrap();
        let fd = hd.with_duplex(Duplex::Full);
        let chan_hd = draw_channels(&hd, &sim, 1, &mut stream(SEED + i, Domain::Channel, 0)).unwrap();
        let chan_fd = hd_diag_transform(&chan_hd);
        let mu = WeightVector::uniform(4);
        let p = sim.p_eff();
        let as_hd = |s: &ScheduleState| {
            ScheduleState::new(
                s.nodes()
                    .iter()
                    .map(|&x| if x == NodeState::Both { NodeState::Transmit } else { x })
                    .collect(),
            )
        };

        let (bf_hd, _) = brute_force_slot(&chan_hd, &hd, p, &mu).unwrap();
        let (bf_fd, _) = brute_force_slot(&chan_fd, &fd, p, &mu).unwrap();
        let solver = SolverConfig::default();
        let alg_hd = optimize_slot(&chan_hd, &hd, p, &mu, &solver, &mut stream(SEED + i, Domain::Solver, 0)).unwrap();
        let alg_fd = optimize_slot(&chan_fd, &fd, p, &mu, &solver, &mut stream(SEED + i, Domain::Solver, 0)).unwrap();
        if bf_hd == as_hd(&bf_fd) && alg_hd.state == as_hd(&alg_fd.state) {
            same += 1;
        }
    }
    (same, n as usize)
}

fn paired_margin(cells: &[Cell], x: f64, a: Scheme, b: Scheme) -> (f64, f64) {
    let get = |s: Scheme| -> Vec<f64> {
        let mut v: Vec<(u64, f64)> = cells
            .iter()
            .filter(|c| c.x_value == x && c.scheme == s)
            .map(|c| (c.rep, c.outcome.as_ref().map(|o| o.sum_rate).unwrap_or(f64::NAN)))
            .collect();
        v.sort_by_key(|p| p.0);
        v.into_iter().map(|p| p.1).collect()
    };
    let diffs: Vec<f64> = get(a).iter().zip(get(b)).map(|(x, y)| x - y).collect();
    mean_stderr(&diffs)
}

fn scheme_mean(cells: &[Cell], x: f64, s: Scheme) -> f64 {
    let v: Vec<f64> = cells
        .iter()
        .filter(|c| c.x_value == x && c.scheme == s)
        .map(|c| c.outcome.as_ref().map(|o| o.sum_rate).unwrap_or(f64::NAN))
        .collect();
    mean_stderr(&v).0
}

fn power_sweep(v: &mut Verdicts, structure: &mut Structure) {
    let cfg = desk_config();
    let grid = cfg.experiment.power_grid_dbm.clone();
    let (fd, hd, bs1, bs3) = (scheme("proposed_fd@110"), scheme("proposed_hd"), scheme("bs1"), scheme("bs3"));
    let cells = sweep_cells(&cfg, SweepAxis::TxPowerDbm, &grid, &[fd, hd, bs1, bs3]);
    structure.add_cells(&cells);

    let low: Vec<f64> = [fd, hd, bs1, bs3].iter().map(|&s| scheme_mean(&cells, -10.0, s)).collect();
    let (lo, hi) = low.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    let spread_ok = hi <= 1.10 * lo;

    let (m_hd, se_hd) = paired_margin(&cells, 20.0, hd, bs1);
    let (m_fd, se_fd) = paired_margin(&cells, 20.0, fd, bs3);
    let margins_ok = m_hd > 2.0 * se_hd && m_fd > 2.0 * se_fd;

    let monotone = |s: Scheme| {
        let curve: Vec<f64> = grid.iter().map(|&x| scheme_mean(&cells, x, s)).collect();
        curve.windows(2).all(|w| w[1] >= w[0])
    };
    let mono_ok = monotone(fd) && monotone(hd);

    v.record(
        "4",
        spread_ok && margins_ok && mono_ok,
        format!(
            "at -10 dBm max/min = {:.3} (need <= 1.10) [fd {:.2}, hd {:.2}, bs1 {:.2}, bs3 {:.2}]; \
             at 20 dBm hd-bs1 = {m_hd:.2} (2se {:.2}), fd-bs3 = {m_fd:.2} (2se {:.2}); \
             proposed curves non-decreasing: fd {}, hd {}",
            hi / lo,
            low[0],
            low[1],
            low[2],
            low[3],
            2.0 * se_hd,
            2.0 * se_fd,
            monotone(fd),
            monotone(hd),
        ),
    );
}

fn dimension_sweep(v: &mut Verdicts, structure: &mut Structure) {
    let mut cfg = desk_config();
    cfg.sim.tx_power_dbm = 20.0;
    let grid = [250.0, 500.0, 1000.0, 2000.0];
    let (hd, bs1) = (scheme("proposed_hd"), scheme("bs1"));
    let cells = sweep_cells(&cfg, SweepAxis::AreaSideM, &grid, &[hd, bs1]);
    structure.add_cells(&cells);
    let gains: Vec<f64> = grid
        .iter()
        .map(|&x| scheme_mean(&cells, x, hd) / scheme_mean(&cells, x, bs1))
        .collect();
    let ok = gains.windows(2).all(|w| w[1] < w[0]);
    v.record(
        "5",
        ok,
        format!(
            "proposed-hd / bs1 sum-rate at 250, 500, 1000, 2000 m: {} (need strictly decreasing)",
            gains.iter().map(|g| format!("{g:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn inside(hull: &[(f64, f64)], p: (f64, f64)) -> bool {
    let n = hull.len();
    (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= -1e-9)
}

fn rate_region(v: &mut Verdicts, structure: &mut Structure) {
    let mut cfg = desk_config();
    cfg.sim.tx_power_dbm = 20.0;
    cfg.experiment.mu1_grid = (0..=10).map(|i| i as f64 / 10.0).collect();
    let schemes = [scheme("proposed_hd"), scheme("bs1"), scheme("proposed_fd@110"), scheme("bs3")];
    let cells = experiments::rate_region_cells(&cfg, &schemes);
    structure.add_region(&cells);
    let rows = region_rows(&cells, &cfg.experiment.mu1_grid, &schemes);
    let points = |name: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.scheme == name)
            .map(|r| (r.rate_group1.unwrap_or(f64::NAN), r.rate_group2.unwrap_or(f64::NAN)))
            .collect()
    };
    let hd = points("proposed_hd");
    let mut region = vec![(0.0, 0.0)];
    for &(x, y) in &hd {
        region.extend([(x, y), (x, 0.0), (0.0, y)]);
    }
    let hull = convex_hull(region);
    let bs1 = points("bs1");
    let enclosed = bs1.iter().filter(|&&p| inside(&hull, p)).count();

    let at_half = |name: &str| -> f64 {
        rows.iter()
            .find(|r| r.scheme == name && (r.mu1 - 0.5).abs() < 1e-12)
            .map(|r| r.rate_group1.unwrap_or(f64::NAN) + r.rate_group2.unwrap_or(f64::NAN))
            .unwrap()
    };
    let (fd, bs3) = (at_half("proposed_fd@110"), at_half("bs3"));
    v.record(
        "6",
        enclosed == bs1.len() && fd >= 2.0 * bs3,
        format!(
            "{enclosed}/{} bs1 points inside the proposed-hd region; equal-weight proposed-fd {fd:.2} vs bs3 {bs3:.2}, \
             ratio {:.3} (need >= 2)",
            bs1.len(),
            fd / bs3
        ),
    );
}

fn complexity(v: &mut Verdicts) {
    let mut cfg = desk_config();
    cfg.sim.tx_power_dbm = 20.0;
    cfg.sim.area_side_m = 1000.0;
    cfg.experiment.complexity_nodes = vec![4, 6, 8, 10, 12];
    cfg.experiment.complexity_trials = 30;
    let rows = experiments::complexity(&cfg).unwrap();
    let series = |alg: &str| -> (Vec<f64>, Vec<f64>) {
        rows.iter()
            .filter(|r| r.algorithm == alg)
            .map(|r| (r.n_nodes as f64, r.median_time_us))
            .unzip()
    };
    let (k, t_alg) = series("optimize_slot");
    let (_, t_bf) = series("brute_force_slot");
    let slope = loglog_slope(&k, &t_alg);
    let growth: Vec<f64> = t_bf.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = slope <= 3.0 && growth.iter().all(|&g| g >= 3.0);
    v.record(
        "7",
        ok,
        format!(
            "scheduler time exponent {slope:.2} (need <= 3); exhaustive time growth per added pair {} (need >= 3 each)",
            growth.iter().map(|g| format!("{g:.1}x")).collect::<Vec<_>>().join(", ")
        ),
    );
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            r[p] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn fairness(v: &mut Verdicts, structure: &mut Structure) {
    let mut cfg = desk_config();
    cfg.sim.n_pairs = 5;
    cfg.sim.tx_power_dbm = 20.0;
    cfg.sim.area_side_m = 1000.0;
    cfg.sim.si_suppression_db = 110.0;
    cfg.fairness.priorities = Some(vec![0.1; 10]);
    cfg.fairness.n_slots = 5000;
    cfg.fairness.demand = DemandRule::FractionOfUnconstrained { fraction: 0.5 };
    let feasible = experiments::fairness(&cfg).unwrap();
    structure.add_trace(&feasible);
    let r = feasible.final_rates();
    let within = r
        .iter()
        .zip(&feasible.tau)
        .filter(|(r, t)| (*r - *t).abs() <= 0.10 * *t)
        .count();

    cfg.fairness.demand = DemandRule::FractionOfUnconstrained { fraction: 1.0 };
    let infeasible = experiments::fairness(&cfg).unwrap();
    structure.add_trace(&infeasible);
    let simplex = infeasible.slots.iter().all(|s| {
        s.mu.iter().all(|m| (0.0..=1.0).contains(m)) && (s.mu.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    });
    let finite = infeasible
        .slots
        .iter()
        .all(|s| s.mu.iter().chain(&s.r_bar_e).chain(&s.achieved).all(|x| x.is_finite()));
    let rho = spearman(infeasible.final_rates(), &infeasible.tau);

    v.record(
        "8",
        within >= 8 && simplex && finite && rho >= 0.9,
        format!(
            "feasible demands: {within}/10 nodes within 10% after 5000 slots (need 8); \
             doubled demands: weights on simplex every slot {simplex}, all finite {finite}, \
             rank correlation {rho:.3} (need >= 0.9)"
        ),
    );
}

fn determinism(v: &mut Verdicts) {
    let mut cfg = desk_config();
    cfg.sim.n_pairs = 4;
    cfg.sim.n_slots = 30;
    cfg.experiment.reps = 3;
    cfg.experiment.power_grid_dbm = vec![0.0, 20.0];
    cfg.experiment.mu1_grid = vec![0.0, 0.5, 1.0];
    let kinds = [ExperimentKind::SweepPower, ExperimentKind::RateRegion, ExperimentKind::SingleRun];
    let run_all = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            kinds
                .iter()
                .map(|&k| {
                    let spec = ExperimentSpec::new(k, cfg.clone(), &[]).unwrap();
                    run_experiment(&spec).unwrap()
                })
                .collect::<Vec<_>>()
        })
    };
    let one = run_all(1);
    let same_bytes = [2, 4, 1].into_iter().all(|t| run_all(t) == one);

    let sim = SimConfig { n_pairs: 4, n_slots: 200, seed: SEED, ..SimConfig::default() };
    let layout = experiments::layout(&sim, SEED, 0).unwrap();
    let mu = WeightRule::InverseIndex.weights(8);
    let run = dtdd_core::harness::run_scheme(scheme("proposed_fd"), &layout, &sim, &SolverConfig::default(), &mu, 0, SEED)
        .unwrap();
    let reference = run.average_rates().unwrap();
    let mut shuffled = run.records.clone();
    let mut rng = stream(SEED, Domain::Calibration, 99);
    let permutation_ok = (0..20).all(|_| {
        shuffled.shuffle(&mut rng);
        average_rates(&shuffled).unwrap() == reference
    });

    v.record(
        "9",
        same_bytes && permutation_ok,
        format!(
            "outputs byte-identical across 1, 2 and 4 threads: {same_bytes}; \
             average rates bit-identical under 20 slot permutations: {permutation_ok}"
        ),
    );
}

fn main() {
    let start = Instant::now();
    let mut v = Verdicts { lines: Vec::new() };
    let mut structure = Structure::default();

    oracle_suite(&mut v, &mut structure);
    power_sweep(&mut v, &mut structure);
    dimension_sweep(&mut v, &mut structure);
    rate_region(&mut v, &mut structure);
    complexity(&mut v);
    fairness(&mut v, &mut structure);

    // mixed node types, where the half-duplex mask matters inside one network
    let mut cfg = desk_config();
    cfg.sim.n_slots = 100;
    cfg.experiment.reps = 3;
    let mixed = sweep_cells(&cfg, SweepAxis::TxPowerDbm, &[20.0], &[scheme("proposed_mixed@110")]);
    structure.add_cells(&mixed);
    let (same, n) = mask_equivalence();
    v.record(
        "3",
        structure.violations == 0 && same == n,
        format!(
            "{} violations over {} scheduled slots (state validity, no simultaneous state on half-duplex \
             nodes, objective vs recomputation at 1e-9); mask vs saturated self-interference agree on {same}/{n}",
            structure.violations, structure.slots
        ),
    );

    determinism(&mut v);

    v.lines.sort_by_key(|l| l.0);
    for (id, pass, detail) in &v.lines {
        println!("[{}] criterion {id}: {detail}", if *pass { "PASS" } else { "FAIL" });
    }
    let failed = v.lines.iter().filter(|l| !l.1).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        v.lines.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
        std::process::exit(1);
    }
}
