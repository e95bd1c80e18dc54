use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::benchmarks::{bs1_schedule, bs3_schedule};
use crate::error::{Error, Result};
use crate::fpsched::{optimize_slot, SolverConfig};
use crate::netmodel::{draw_from_means, mean_gains, Duplex, SimConfig, Topology};
use crate::ratecore::{weighted_sum_rate, RateRecord, WeightVector};
use crate::rng::{slot_index, stream, Domain};

/// A scheduling scheme as named on the command line, e.g. `proposed_fd@120`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    ProposedFd { si_db: Option<f64> },
    ProposedHd,
    /// Even-numbered pairs full-duplex, odd-numbered pairs half-duplex.
    ProposedMixed { si_db: Option<f64> },
    Bs1,
    Bs3 { si_db: Option<f64> },
}

impl Scheme {
    pub fn base_name(&self) -> &'static str {
        match self {
            Scheme::ProposedFd { .. } => "proposed_fd",
            Scheme::ProposedHd => "proposed_hd",
            Scheme::ProposedMixed { .. } => "proposed_mixed",
            Scheme::Bs1 => "bs1",
            Scheme::Bs3 { .. } => "bs3",
        }
    }

    fn si_override(&self) -> Option<f64> {
        match *self {
            Scheme::ProposedFd { si_db } | Scheme::ProposedMixed { si_db } | Scheme::Bs3 { si_db } => si_db,
            Scheme::ProposedHd | Scheme::Bs1 => None,
        }
    }

    /// SI suppression in effect, or `None` when no node is full-duplex.
    pub fn si_db(&self, base: &SimConfig) -> Option<f64> {
        match self {
            Scheme::ProposedHd | Scheme::Bs1 => None,
            _ => Some(self.si_override().unwrap_or(base.si_suppression_db)),
        }
    }

    /// The base config with this scheme's SI suppression applied.
    pub fn sim_config(&self, base: &SimConfig) -> SimConfig {
        let mut sim = base.clone();
        if let Some(si) = self.si_override() {
            sim.si_suppression_db = si;
        }
        sim
    }

    /// Duplex modes this scheme runs the given node layout with.
    pub fn topology(&self, layout: &Topology) -> Result<Topology> {
        match self {
            Scheme::ProposedFd { .. } | Scheme::Bs3 { .. } => Ok(layout.with_duplex(Duplex::Full)),
            Scheme::ProposedHd | Scheme::Bs1 => Ok(layout.with_duplex(Duplex::Half)),
            Scheme::ProposedMixed { .. } => {
                let mut modes = vec![Duplex::Full; layout.len()];
                for (p, (a, b)) in layout.pairs()?.into_iter().enumerate() {
                    if p % 2 == 1 {
                        modes[a] = Duplex::Half;
                        modes[b] = Duplex::Half;
                    }
                }
                layout.with_duplex_modes(&modes)
            }
        }
    }

    pub fn is_proposed(&self) -> bool {
        matches!(
            self,
            Scheme::ProposedFd { .. } | Scheme::ProposedHd | Scheme::ProposedMixed { .. }
        )
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.base_name())?;
        if let Some(si) = self.si_override() {
            write!(f, "@{si}")?;
        }
        Ok(())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, si) = match s.split_once('@') {
            Some((n, v)) => {
                let si: f64 = v
                    .trim_end_matches("dB")
                    .trim_end_matches("db")
                    .parse()
                    .map_err(|_| Error::Config(format!("bad SI value in scheme `{s}`")))?;
                if !si.is_finite() {
                    return Err(Error::Config(format!("bad SI value in scheme `{s}`")));
                }
                (n, Some(si))
            }
            None => (s, None),
        };
        let scheme = match name {
            "proposed_fd" => Scheme::ProposedFd { si_db: si },
            "proposed_mixed" => Scheme::ProposedMixed { si_db: si },
            "bs3" => Scheme::Bs3 { si_db: si },
            "proposed_hd" if si.is_none() => Scheme::ProposedHd,
            "bs1" if si.is_none() => Scheme::Bs1,
            "proposed_hd" | "bs1" => {
                return Err(Error::Config(format!("scheme `{name}` has no full-duplex nodes to set SI for")))
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown scheme `{s}` (expected proposed_fd, proposed_hd, proposed_mixed, bs1 or bs3, optionally with @<si_db>)"
                )))
            }
        };
        Ok(scheme)
    }
}

pub fn parse_schemes<S: AsRef<str>>(names: &[S]) -> Result<Vec<Scheme>> {
    if names.is_empty() {
        return Err(Error::Config("no schemes selected".into()));
    }
    names.iter().map(|n| n.as_ref().parse()).collect()
}

/// Outcome of running one scheme on one topology drop.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub records: Vec<RateRecord>,
    /// Slots where the iteration met its stopping rule (benchmark slots
    /// count as converged).
    pub converged: usize,
    /// Slots that broke a structural check: invalid state for the node
    /// types, or a reported objective that disagrees with recomputation.
    pub violations: usize,
}

impl SchemeRun {
    pub fn average_rates(&self) -> Result<Vec<f64>> {
        crate::ratecore::average_rates(&self.records)
    }

    pub fn sum_rate(&self) -> Result<f64> {
        Ok(self.average_rates()?.iter().sum())
    }
}

fn fresh_rng(seed: u64, domain: Domain, rep: u64, slot: u64) -> impl Rng {
    stream(seed, domain, slot_index(rep, slot))
}

/// Simulates `n_slots` slots of `scheme` on the node layout of repetition
/// `rep`. Channel and solver randomness for each slot come from streams
/// keyed by `(seed, rep, slot)`, so schemes sharing a layout see the same
/// fading.
pub fn run_scheme(
    scheme: Scheme,
    layout: &Topology,
    base: &SimConfig,
    solver: &SolverConfig,
    mu: &WeightVector,
    rep: u64,
    seed: u64,
) -> Result<SchemeRun> {
    let sim = scheme.sim_config(base);
    let topology = scheme.topology(layout)?;
    let means = mean_gains(&topology, &sim)?;
    let p_eff = sim.p_eff();
    let n_slots = sim.n_slots as u64;
    let mut records = Vec::with_capacity(sim.n_slots);
    let mut converged = 0;
    let mut violations = 0;
    for slot in 1..=n_slots {
        let chan = draw_from_means(&topology, &means, slot, &mut fresh_rng(seed, Domain::Channel, rep, slot))?;
        let (state, reported) = match scheme {
            Scheme::Bs1 => (bs1_schedule(&topology, slot)?, None),
            Scheme::Bs3 { .. } => (bs3_schedule(&topology, slot)?, None),
            _ => {
                let mut rng = fresh_rng(seed, Domain::Solver, rep, slot);
                let res = optimize_slot(&chan, &topology, p_eff, mu, solver, &mut rng)?;
                converged += usize::from(res.converged);
                (res.state, Some(res.lambda))
            }
        };
        if reported.is_none() {
            converged += 1;
        }
        let record = weighted_sum_rate(&state, &chan, p_eff, mu);
        let lambda_ok = reported
            .is_none_or(|l| (l - record.lambda).abs() <= 1e-9 * record.lambda.abs().max(f64::MIN_POSITIVE));
        if state.check(&topology).is_err() || !lambda_ok {
            violations += 1;
        }
        records.push(record);
    }
    Ok(SchemeRun { records, converged, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in ["proposed_fd", "proposed_fd@120", "proposed_hd", "proposed_mixed@110", "bs1", "bs3", "bs3@130"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
        assert_eq!(
            "proposed_fd@110dB".parse::<Scheme>().unwrap(),
            Scheme::ProposedFd { si_db: Some(110.0) }
        );
        assert!("bs2".parse::<Scheme>().is_err());
        assert!("bs1@110".parse::<Scheme>().is_err());
        assert!("proposed_fd@x".parse::<Scheme>().is_err());
    }

    #[test]
    fn mixed_alternates_pairs() {
        use crate::netmodel::NodeSpec;
        let nodes = (0..8)
            .map(|id| NodeSpec { id, position: [id as f64, 0.0], duplex: Duplex::Full })
            .collect();
        let layout = Topology::paired(nodes).unwrap();
        let t = Scheme::ProposedMixed { si_db: None }.topology(&layout).unwrap();
        let hd: Vec<bool> = (0..8).map(|k| t.is_half_duplex(k)).collect();
        assert_eq!(hd, [false, false, true, true, false, false, true, true]);
    }
}
