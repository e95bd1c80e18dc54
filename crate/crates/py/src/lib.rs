//! Python bindings for `dtdd_core`.

use dtdd_core::fairness::{self, FairnessConfig, FeedbackSign, StepSize};
use dtdd_core::fpsched::{self, SolverConfig};
use dtdd_core::harness::{self, ExperimentKind, ExperimentSpec, RunConfig};
use dtdd_core::netmodel::{self, ChannelRealization, Duplex};
use dtdd_core::oracle::{self, BruteForce};
use dtdd_core::ratecore::{self, NodeState, ScheduleState, WeightVector};
use dtdd_core::rng::{stream, Domain};
use dtdd_core::{benchmarks, matrix::Square, Error};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::OracleCap { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_duplex(s: &str) -> PyResult<Duplex> {
    match s {
        "full" | "fd" => Ok(Duplex::Full),
        "half" | "hd" => Ok(Duplex::Half),
        _ => Err(PyValueError::new_err(format!("unknown duplex mode {s:?}"))),
    }
}

fn duplex_name(d: Duplex) -> &'static str {
    match d {
        Duplex::Full => "full",
        Duplex::Half => "half",
    }
}

fn parse_state(code: &str) -> PyResult<ScheduleState> {
    code.chars()
        .map(|c| match c {
            'r' => Ok(NodeState::Receive),
            't' => Ok(NodeState::Transmit),
            'f' => Ok(NodeState::Both),
            's' => Ok(NodeState::Silent),
            _ => Err(PyValueError::new_err(format!("bad state character {c:?}, expected one of r t f s"))),
        })
        .collect::<PyResult<Vec<_>>>()
        .map(ScheduleState::new)
}

fn weights(mu: Option<Vec<f64>>, k: usize) -> PyResult<WeightVector> {
    match mu {
        None => Ok(WeightVector::uniform(k)),
        Some(raw) => WeightVector::new(raw).map_err(err),
    }
}

fn json_of(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<String> {
    py.import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// Simulation parameters. Keyword arguments override the defaults, e.g.
/// `SimConfig(n_pairs=4, tx_power_dbm=10)`.
#[pyclass(name = "SimConfig", module = "dtdd", from_py_object)]
#[derive(Clone)]
struct PySimConfig {
    inner: netmodel::SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let text = match kwargs {
            Some(kw) => json_of(py, kw.as_any())?,
            None => "{}".to_string(),
        };
        Ok(Self { inner: netmodel::SimConfig::from_json(&text).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: netmodel::SimConfig::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| err(e.into()))
    }

    #[getter]
    fn n_pairs(&self) -> usize {
        self.inner.n_pairs
    }

    #[getter]
    fn tx_power_dbm(&self) -> f64 {
        self.inner.tx_power_dbm
    }

    #[getter]
    fn area_side_m(&self) -> f64 {
        self.inner.area_side_m
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Transmit power over noise, linear.
    #[getter]
    fn p_eff(&self) -> f64 {
        self.inner.p_eff()
    }

    fn __repr__(&self) -> String {
        format!("SimConfig({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

#[pyclass(name = "Topology", module = "dtdd", from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: netmodel::Topology,
}

#[pymethods]
impl PyTopology {
    /// Random paired layout, reproducible from `seed`.
    #[staticmethod]
    #[pyo3(signature = (config, duplex = "full", seed = 0))]
    fn generate(config: &PySimConfig, duplex: &str, seed: u64) -> PyResult<Self> {
        let mut rng = stream(seed, Domain::Topology, 0);
        let inner = netmodel::generate_topology(&config.inner, parse_duplex(duplex)?, &mut rng).map_err(err)?;
        Ok(Self { inner })
    }

    /// Nodes `2m` and `2m + 1` form a pair.
    #[staticmethod]
    #[pyo3(signature = (positions, duplex = None))]
    fn paired(positions: Vec<[f64; 2]>, duplex: Option<Vec<String>>) -> PyResult<Self> {
        let modes = match duplex {
            Some(d) if d.len() != positions.len() => {
                return Err(PyValueError::new_err("one duplex mode per node"));
            }
            Some(d) => d.iter().map(|s| parse_duplex(s)).collect::<PyResult<Vec<_>>>()?,
            None => vec![Duplex::Full; positions.len()],
        };
        let nodes = positions
            .into_iter()
            .zip(modes)
            .enumerate()
            .map(|(id, (position, duplex))| netmodel::NodeSpec { id, position, duplex })
            .collect();
        Ok(Self { inner: netmodel::Topology::paired(nodes).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: netmodel::Topology::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn with_duplex(&self, modes: Vec<String>) -> PyResult<Self> {
        let modes = modes.iter().map(|s| parse_duplex(s)).collect::<PyResult<Vec<_>>>()?;
        Ok(Self { inner: self.inner.with_duplex_modes(&modes).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn positions(&self) -> Vec<[f64; 2]> {
        self.inner.nodes().iter().map(|n| n.position).collect()
    }

    #[getter]
    fn duplex(&self) -> Vec<&'static str> {
        self.inner.nodes().iter().map(|n| duplex_name(n.duplex)).collect()
    }

    /// Desired links as `(source, destination)`.
    #[getter]
    fn links(&self) -> Vec<(usize, usize)> {
        self.inner.desired_links()
    }

    fn __repr__(&self) -> String {
        format!("Topology(nodes={})", self.inner.len())
    }
}

#[pyclass(name = "Channel", module = "dtdd", from_py_object)]
#[derive(Clone)]
struct PyChannel {
    inner: ChannelRealization,
}

#[pymethods]
impl PyChannel {
    /// One fading draw for `slot`; `seed` selects the random stream.
    #[staticmethod]
    #[pyo3(signature = (topology, config, slot = 1, seed = 0))]
    fn draw(topology: &PyTopology, config: &PySimConfig, slot: u64, seed: u64) -> PyResult<Self> {
        let mut rng = stream(seed, Domain::Channel, slot);
        let inner = netmodel::draw_channels(&topology.inner, &config.inner, slot, &mut rng).map_err(err)?;
        Ok(Self { inner })
    }

    /// From an explicit gain matrix, `gains[j][k]` from node `j` to node `k`.
    #[staticmethod]
    #[pyo3(signature = (topology, gains, slot = 1))]
    fn from_gains(topology: &PyTopology, gains: Vec<Vec<f64>>, slot: u64) -> PyResult<Self> {
        let g = Square::from_rows(&gains).ok_or_else(|| PyValueError::new_err("gain matrix must be square"))?;
        Ok(Self { inner: ChannelRealization::from_gains(slot, g, &topology.inner).map_err(err)? })
    }

    /// Copy with every self-interference gain saturated, so that a
    /// full-duplex search never uses the simultaneous state profitably.
    fn saturated(&self) -> Self {
        Self { inner: fpsched::hd_diag_transform(&self.inner) }
    }

    #[getter]
    fn gains(&self) -> Vec<Vec<f64>> {
        self.inner.g.rows()
    }

    #[getter]
    fn desired(&self) -> Vec<Vec<f64>> {
        self.inner.d.rows()
    }

    #[getter]
    fn interference(&self) -> Vec<Vec<f64>> {
        self.inner.i_mat.rows()
    }

    #[getter]
    fn slot(&self) -> u64 {
        self.inner.slot
    }
}

/// Weighted sum-rate and per-node rates of a schedule given as an `rtfs`
/// code string.
#[pyfunction]
#[pyo3(signature = (state, channel, config, mu = None))]
fn weighted_sum_rate(state: &str, channel: &PyChannel, config: &PySimConfig, mu: Option<Vec<f64>>) -> PyResult<(f64, Vec<f64>)> {
    let s = parse_state(state)?;
    if s.len() != channel.inner.len() {
        return Err(PyValueError::new_err("state and channel differ in size"));
    }
    let mu = weights(mu, s.len())?;
    let rec = ratecore::weighted_sum_rate(&s, &channel.inner, config.inner.p_eff(), &mu);
    Ok((rec.lambda, rec.per_node_rate))
}

/// Schedules one slot. Returns a dict with `state`, `lambda`, `iters`,
/// `converged` and `fp_lambda`.
#[pyfunction]
#[pyo3(signature = (topology, channel, config, mu = None, seed = 0, restarts = 3, refine = true))]
fn optimize_slot<'py>(
    py: Python<'py>,
    topology: &PyTopology,
    channel: &PyChannel,
    config: &PySimConfig,
    mu: Option<Vec<f64>>,
    seed: u64,
    restarts: usize,
    refine: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mu = weights(mu, topology.inner.len())?;
    let solver = SolverConfig {
        epsilon: config.inner.epsilon,
        max_iters: config.inner.max_iters,
        restarts,
        refine,
        ..SolverConfig::default()
    };
    let mut rng = stream(seed, Domain::Solver, channel.inner.slot);
    let res = py
        .detach(|| fpsched::optimize_slot(&channel.inner, &topology.inner, config.inner.p_eff(), &mu, &solver, &mut rng))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("state", res.state.code())?;
    d.set_item("lambda", res.lambda)?;
    d.set_item("iters", res.iters)?;
    d.set_item("converged", res.converged)?;
    d.set_item("fp_lambda", res.fp_lambda)?;
    Ok(d)
}

/// Exhaustive search. Returns `(state, lambda)`.
#[pyfunction]
#[pyo3(signature = (topology, channel, config, mu = None, cap = 12))]
fn brute_force_slot(
    py: Python<'_>,
    topology: &PyTopology,
    channel: &PyChannel,
    config: &PySimConfig,
    mu: Option<Vec<f64>>,
    cap: usize,
) -> PyResult<(String, f64)> {
    let mu = weights(mu, topology.inner.len())?;
    let opts = BruteForce { cap, prune: true };
    let (state, lambda) = py
        .detach(|| oracle::brute_force_slot_with(&channel.inner, &topology.inner, config.inner.p_eff(), &mu, opts))
        .map_err(err)?;
    Ok((state.code(), lambda))
}

/// Conventional half-duplex TDD: in odd slots the first node of each pair
/// sends, in even slots the second.
#[pyfunction]
fn bs1_schedule(topology: &PyTopology, slot: u64) -> PyResult<String> {
    Ok(benchmarks::bs1_schedule(&topology.inner, slot).map_err(err)?.code())
}

/// Conventional full-duplex: every node transmits and receives.
#[pyfunction]
#[pyo3(signature = (topology, slot = 1))]
fn bs3_schedule(topology: &PyTopology, slot: u64) -> PyResult<String> {
    Ok(benchmarks::bs3_schedule(&topology.inner, slot).map_err(err)?.code())
}

/// Demand-tracking loop. Returns a dict of per-slot lists `mu`, `r_bar`,
/// `achieved` plus `violations`.
#[pyfunction]
#[pyo3(signature = (topology, config, demands, priorities = None, n_slots = 1000, seed = 0, step_c = 1.0, step_d = 2.0, literal_sign = false))]
#[allow(clippy::too_many_arguments)]
fn run_fairness_loop<'py>(
    py: Python<'py>,
    topology: &PyTopology,
    config: &PySimConfig,
    demands: Vec<f64>,
    priorities: Option<Vec<f64>>,
    n_slots: u64,
    seed: u64,
    step_c: f64,
    step_d: f64,
    literal_sign: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let k = topology.inner.len();
    let alpha = priorities.unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let cfg = FairnessConfig {
        step: StepSize { c: step_c, d: step_d },
        sign: if literal_sign { FeedbackSign::Literal } else { FeedbackSign::Corrective },
    };
    let solver = SolverConfig {
        epsilon: config.inner.epsilon,
        max_iters: config.inner.max_iters,
        ..SolverConfig::default()
    };
    let trace = py
        .detach(|| fairness::run_fairness_loop(&config.inner, &solver, &cfg, &topology.inner, &demands, &alpha, n_slots, seed))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("tau", trace.tau.clone())?;
    d.set_item("mu", trace.slots.iter().map(|s| s.mu.clone()).collect::<Vec<_>>())?;
    d.set_item("r_bar", trace.slots.iter().map(|s| s.r_bar_e.clone()).collect::<Vec<_>>())?;
    d.set_item("achieved", trace.slots.iter().map(|s| s.achieved.clone()).collect::<Vec<_>>())?;
    d.set_item("violations", trace.violations)?;
    Ok(d)
}

/// Runs one `dtdd` subcommand in memory. `config` is a dict in the
/// config-file format. Returns `{file name: bytes}` including the manifest.
#[pyfunction]
#[pyo3(signature = (command, config = None, schemes = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    command: &str,
    config: Option<&Bound<'py, PyDict>>,
    schemes: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = [
        ExperimentKind::SingleRun,
        ExperimentKind::SweepPower,
        ExperimentKind::SweepDimension,
        ExperimentKind::RateRegion,
        ExperimentKind::Fairness,
        ExperimentKind::OracleCompare,
        ExperimentKind::ComplexityScaling,
    ]
    .into_iter()
    .find(|k| k.command() == command)
    .ok_or_else(|| PyValueError::new_err(format!("unknown command {command:?}")))?;
    let text = match config {
        Some(c) => json_of(py, c.as_any())?,
        None => "{}".to_string(),
    };
    let cfg = RunConfig::from_json(&text).map_err(err)?;
    let spec = ExperimentSpec::new(kind, cfg, &schemes.unwrap_or_default()).map_err(err)?;
    let outputs = py.detach(|| harness::run_experiment(&spec)).map_err(err)?;
    let manifest = harness::manifest(&spec, &outputs).map_err(err)?;
    let d = PyDict::new(py);
    for o in &outputs {
        d.set_item(&o.name, PyBytes::new(py, &o.bytes))?;
    }
    d.set_item("manifest.json", PyBytes::new(py, &manifest))?;
    Ok(d)
}

#[pymodule]
fn dtdd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyChannel>()?;
    m.add_function(wrap_pyfunction!(weighted_sum_rate, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_slot, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_slot, m)?)?;
    m.add_function(wrap_pyfunction!(bs1_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(bs3_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_fairness_loop, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
