//! Network description, random pair placement and per-slot fading draws.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Square;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Duplex {
    Full,
    Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: usize,
    /// Coordinates in meters.
    pub position: [f64; 2],
    pub duplex: Duplex,
}

impl NodeSpec {
    pub fn distance_to(&self, other: &NodeSpec) -> f64 {
        let dx = self.position[0] - other.position[0];
        let dy = self.position[1] - other.position[1];
        dx.hypot(dy)
    }
}

/// Nodes plus the desired-link indicator `q`.
///
/// `q(j, k)` is true when node `k` treats the signal of node `j` as desired.
/// Its complement marks interference links; the diagonal of `q` is always
/// false, so self-interference ends up on the interference side.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<NodeSpec>,
    q: Square<bool>,
}

impl Topology {
    /// Builds a topology from nodes and `(j, k)` desired pairs, meaning node
    /// `k` wants the signal of node `j`.
    pub fn new(nodes: Vec<NodeSpec>, desired: &[(usize, usize)]) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Empty("topology"));
        }
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx {
                return Err(Error::InvalidInput(format!(
                    "node ids must be dense and ordered; found id {} at position {idx}",
                    node.id
                )));
            }
            if !node.position.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput(format!("node {idx} has a non-finite position")));
            }
        }
        let mut q = Square::new(n);
        for &(j, k) in desired {
            if j >= n || k >= n {
                return Err(Error::InvalidInput(format!(
                    "desired link ({j}, {k}) references a node outside 0..{n}"
                )));
            }
            if j == k {
                return Err(Error::InvalidInput(format!(
                    "node {j} cannot desire its own signal"
                )));
            }
            q.set(j, k, true);
        }
        Ok(Self { nodes, q })
    }

    /// Symmetric pairing: node `2p` and `2p + 1` want each other.
    pub fn paired(nodes: Vec<NodeSpec>) -> Result<Self> {
        if nodes.len() % 2 != 0 {
            return Err(Error::Unpaired);
        }
        let desired: Vec<_> = (0..nodes.len() / 2)
            .flat_map(|p| [(2 * p, 2 * p + 1), (2 * p + 1, 2 * p)])
            .collect();
        Self::new(nodes, &desired)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn duplex(&self, k: usize) -> Duplex {
        self.nodes[k].duplex
    }

    pub fn is_half_duplex(&self, k: usize) -> bool {
        self.nodes[k].duplex == Duplex::Half
    }

    pub fn q(&self, j: usize, k: usize) -> bool {
        self.q.get(j, k)
    }

    pub fn qbar(&self, j: usize, k: usize) -> bool {
        !self.q.get(j, k)
    }

    pub fn q_matrix(&self) -> &Square<bool> {
        &self.q
    }

    /// Nodes whose signal node `k` wants (support of column `k` of `q`).
    pub fn desired_sources(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.q.get(j, k))
    }

    pub fn desired_links(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for j in 0..n {
            for k in 0..n {
                if self.q.get(j, k) {
                    out.push((j, k));
                }
            }
        }
        out
    }

    /// Disjoint pairs `(a, b)` with `a < b`, when every node wants exactly
    /// one other node and the relation is mutual.
    pub fn pairs(&self) -> Result<Vec<(usize, usize)>> {
        let n = self.len();
        let mut pairs = Vec::with_capacity(n / 2);
        for k in 0..n {
            let mut sources = self.desired_sources(k);
            let partner = match (sources.next(), sources.next()) {
                (Some(j), None) => j,
                _ => return Err(Error::Unpaired),
            };
            let mut back = self.desired_sources(partner);
            if back.next() != Some(k) || back.next().is_some() {
                return Err(Error::Unpaired);
            }
            if k < partner {
                pairs.push((k, partner));
            }
        }
        Ok(pairs)
    }

    /// Copy with every node switched to `duplex`.
    pub fn with_duplex(&self, duplex: Duplex) -> Self {
        let mut out = self.clone();
        for node in &mut out.nodes {
            node.duplex = duplex;
        }
        out
    }

    /// Copy with per-node duplex modes.
    pub fn with_duplex_modes(&self, modes: &[Duplex]) -> Result<Self> {
        if modes.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} duplex modes, got {}",
                self.len(),
                modes.len()
            )));
        }
        let mut out = self.clone();
        for (node, &m) in out.nodes.iter_mut().zip(modes) {
            node.duplex = m;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TopologyFile {
            nodes: self.nodes.clone(),
            desired: self.desired_links(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile = serde_json::from_str(text)?;
        Self::new(file.nodes, &file.desired)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    nodes: Vec<NodeSpec>,
    desired: Vec<(usize, usize)>,
}

/// Simulation parameters. Field names double as the JSON config keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub area_side_m: f64,
    pub n_pairs: usize,
    pub pair_dist_min_m: f64,
    pub pair_dist_max_m: f64,
    pub carrier_hz: f64,
    pub pathloss_exp: f64,
    pub si_suppression_db: f64,
    pub tx_power_dbm: f64,
    /// Receiver noise power; transmit power is referenced to it.
    pub noise_floor_dbm: f64,
    pub n_slots: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            area_side_m: 1000.0,
            n_pairs: 10,
            pair_dist_min_m: 10.0,
            pair_dist_max_m: 100.0,
            carrier_hz: 1.9e9,
            pathloss_exp: 3.6,
            si_suppression_db: 110.0,
            tx_power_dbm: 20.0,
            noise_floor_dbm: -104.0,
            n_slots: 200,
            seed: 0,
            epsilon: 1e-6,
            max_iters: 100,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.area_side_m > 0.0 && self.area_side_m.is_finite()) {
            return fail(format!("area_side_m must be positive, got {}", self.area_side_m));
        }
        if !(self.pair_dist_min_m > 0.0 && self.pair_dist_min_m <= self.pair_dist_max_m) {
            return fail(format!(
                "need 0 < pair_dist_min_m <= pair_dist_max_m, got [{}, {}]",
                self.pair_dist_min_m, self.pair_dist_max_m
            ));
        }
        if !(self.pathloss_exp > 2.0) {
            return fail(format!("pathloss_exp must exceed 2, got {}", self.pathloss_exp));
        }
        if !(self.carrier_hz > 0.0) {
            return fail(format!("carrier_hz must be positive, got {}", self.carrier_hz));
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_iters < 1 {
            return fail("max_iters must be at least 1".into());
        }
        for (name, v) in [
            ("si_suppression_db", self.si_suppression_db),
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_floor_dbm", self.noise_floor_dbm),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// Transmit power relative to the noise floor, linear scale.
    pub fn p_eff(&self) -> f64 {
        db_to_linear(self.tx_power_dbm - self.noise_floor_dbm)
    }

    /// Mean self-interference gain of a full-duplex node.
    pub fn si_mean_gain(&self) -> f64 {
        db_to_linear(-self.si_suppression_db)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Places `n_pairs` node pairs: the first node uniformly in the square, the
/// partner at a uniform angle and uniform distance in
/// `[pair_dist_min_m, pair_dist_max_m]`, redrawn until it lands inside.
pub fn generate_topology(
    config: &SimConfig,
    duplex: Duplex,
    rng: &mut impl Rng,
) -> Result<Topology> {
    config.validate()?;
    if config.n_pairs == 0 {
        return Err(Error::Config("n_pairs must be at least 1".into()));
    }
    let side = config.area_side_m;
    if config.pair_dist_max_m > side {
        return Err(Error::Config(format!(
            "pair_dist_max_m {} exceeds the area side {side}",
            config.pair_dist_max_m
        )));
    }
    let mut nodes = Vec::with_capacity(2 * config.n_pairs);
    for _ in 0..config.n_pairs {
        let first = [rng.random_range(0.0..=side), rng.random_range(0.0..=side)];
        let second = loop {
            let angle = rng.random_range(0.0..2.0 * PI);
            let dist = rng.random_range(config.pair_dist_min_m..=config.pair_dist_max_m);
            let p = [first[0] + dist * angle.cos(), first[1] + dist * angle.sin()];
            if (0.0..=side).contains(&p[0]) && (0.0..=side).contains(&p[1]) {
                break p;
            }
        };
        for position in [first, second] {
            nodes.push(NodeSpec {
                id: nodes.len(),
                position,
                duplex,
            });
        }
    }
    Topology::paired(nodes)
}

/// Mean channel gain `(c / (4 pi f_c))^2 * d^(-beta)`, before noise
/// normalization.
pub fn mean_pathloss_gain(distance_m: f64, config: &SimConfig) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::InvalidInput(format!(
            "path loss needs a positive distance, got {distance_m}"
        )));
    }
    let wavelength_term = SPEED_OF_LIGHT / (4.0 * PI * config.carrier_hz);
    Ok(wavelength_term.powi(2) * distance_m.powf(-config.pathloss_exp))
}

/// Instantaneous gains for one slot, with the desired/interference split.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub slot: u64,
    pub g: Square<f64>,
    pub d: Square<f64>,
    pub i_mat: Square<f64>,
}

impl ChannelRealization {
    /// Splits `g` into desired (`g` masked by `q`) and interference (`g`
    /// masked by the complement of `q`) parts.
    pub fn from_gains(slot: u64, g: Square<f64>, topology: &Topology) -> Result<Self> {
        let n = topology.len();
        if g.dim() != n {
            return Err(Error::InvalidInput(format!(
                "gain matrix is {}x{0} but topology has {n} nodes",
                g.dim()
            )));
        }
        if g.as_slice().iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("channel gains must be nonnegative".into()));
        }
        let d = Square::from_fn(n, |j, k| if topology.q(j, k) { g.get(j, k) } else { 0.0 });
        let i_mat = Square::from_fn(n, |j, k| if topology.q(j, k) { 0.0 } else { g.get(j, k) });
        Ok(Self { slot, g, d, i_mat })
    }

    pub fn len(&self) -> usize {
        self.g.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.g.dim() == 0
    }
}

/// Mean gains for every link of `topology`: path loss off the diagonal,
/// SI suppression on the diagonal of full-duplex nodes and zero for
/// half-duplex nodes.
pub fn mean_gains(topology: &Topology, config: &SimConfig) -> Result<Square<f64>> {
    let n = topology.len();
    let nodes = topology.nodes();
    let mut m = Square::new(n);
    for j in 0..n {
        for k in 0..n {
            let v = if j == k {
                match nodes[k].duplex {
                    Duplex::Full => config.si_mean_gain(),
                    Duplex::Half => 0.0,
                }
            } else {
                mean_pathloss_gain(nodes[j].distance_to(&nodes[k]), config)?
            };
            m.set(j, k, v);
        }
    }
    Ok(m)
}

/// Draws one block-fading slot: every gain is exponential (Rayleigh power)
/// around its mean, independently per link and per slot.
pub fn draw_channels(
    topology: &Topology,
    config: &SimConfig,
    slot: u64,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    let means = mean_gains(topology, config)?;
    draw_from_means(topology, &means, slot, rng)
}

/// Same as [`draw_channels`] with precomputed means, for loops that draw
/// many slots of one topology.
pub fn draw_from_means(
    topology: &Topology,
    means: &Square<f64>,
    slot: u64,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    let n = topology.len();
    let g = Square::from_fn(n, |j, k| {
        let e: f64 = Exp1.sample(rng);
        e * means.get(j, k)
    });
    ChannelRealization::from_gains(slot, g, topology)
}
