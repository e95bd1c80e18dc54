//! Experiment drivers, result files and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod scheme;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
pub use config::{DemandRule, ExperimentConfig, FairnessRun, RunConfig, WeightRule};
pub use experiments::SweepAxis;
pub use scheme::{parse_schemes, run_scheme, Scheme, SchemeRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SingleRun,
    SweepPower,
    SweepDimension,
    RateRegion,
    Fairness,
    OracleCompare,
    ComplexityScaling,
}

impl ExperimentKind {
    pub fn command(self) -> &'static str {
        match self {
            ExperimentKind::SingleRun => "simulate",
            ExperimentKind::SweepPower => "sweep-power",
            ExperimentKind::SweepDimension => "sweep-dim",
            ExperimentKind::RateRegion => "rate-region",
            ExperimentKind::Fairness => "fairness",
            ExperimentKind::OracleCompare => "oracle-compare",
            ExperimentKind::ComplexityScaling => "complexity",
        }
    }

    pub fn default_schemes(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::SingleRun
            | ExperimentKind::SweepPower
            | ExperimentKind::SweepDimension
            | ExperimentKind::RateRegion => &["proposed_fd@110", "proposed_hd", "bs1", "bs3"],
            _ => &[],
        }
    }

    fn uses_schemes(self) -> bool {
        !self.default_schemes().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: RunConfig,
    pub schemes: Vec<Scheme>,
}

impl ExperimentSpec {
    /// Scheme list from, in order of preference, `cli_schemes`, the config
    /// file, or the experiment's default.
    pub fn new(kind: ExperimentKind, config: RunConfig, cli_schemes: &[String]) -> Result<Self> {
        config.validate()?;
        let schemes = if !kind.uses_schemes() {
            Vec::new()
        } else if !cli_schemes.is_empty() {
            parse_schemes(cli_schemes)?
        } else if let Some(s) = &config.experiment.schemes {
            parse_schemes(s)?
        } else {
            parse_schemes(kind.default_schemes())?
        };
        Ok(Self { kind, config, schemes })
    }
}

/// A result file, named relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn file(name: &str, bytes: Vec<u8>) -> OutputFile {
    OutputFile { name: name.to_string(), bytes }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<OutputFile>> {
    let cfg = &spec.config;
    let exp = &cfg.experiment;
    let out = match spec.kind {
        ExperimentKind::SingleRun => {
            vec![file("simulate.csv", csv_bytes(&experiments::simulate(cfg, &spec.schemes))?)]
        }
        ExperimentKind::SweepPower | ExperimentKind::SweepDimension => {
            let (axis, grid, stem) = if spec.kind == ExperimentKind::SweepPower {
                (SweepAxis::TxPowerDbm, &exp.power_grid_dbm, "sweep_power")
            } else {
                (SweepAxis::AreaSideM, &exp.dim_grid_m, "sweep_dim")
            };
            let cells = experiments::sweep_cells(cfg, axis, grid, &spec.schemes);
            for c in &cells {
                if let Err(e) = &c.outcome {
                    log::warn!("{} at x={}, rep {}: {e}", c.scheme, c.x_value, c.rep);
                }
            }
            vec![
                file(&format!("{stem}.csv"), csv_bytes(&experiments::aggregate(&cells, grid, &spec.schemes))?),
                file(&format!("{stem}_reps.csv"), csv_bytes(&experiments::rep_rows(&cells))?),
            ]
        }
        ExperimentKind::RateRegion => {
            vec![file("rate_region.csv", csv_bytes(&experiments::rate_region(cfg, &spec.schemes))?)]
        }
        ExperimentKind::Fairness => {
            let trace = experiments::fairness(cfg)?;
            let mut bytes = Vec::new();
            trace.write_csv(&mut bytes)?;
            vec![file("fairness_trace.csv", bytes)]
        }
        ExperimentKind::OracleCompare => {
            let report = experiments::oracle_compare(cfg)?;
            log::info!(
                "mean ratio {:.4}, p5 {:.4}, optimal on {:.1}% of instances",
                report.mean_ratio(),
                report.p5_ratio(),
                100.0 * report.fraction_exact()
            );
            let mut bytes = Vec::new();
            report.write_csv(&mut bytes)?;
            vec![file("oracle_compare.csv", bytes)]
        }
        ExperimentKind::ComplexityScaling => {
            vec![file("complexity.csv", csv_bytes(&experiments::complexity(cfg)?)?)]
        }
    };
    Ok(out)
}

/// Run manifest: crate version, seed, subcommand, full configuration and
/// the files written.
pub fn manifest(spec: &ExperimentSpec, outputs: &[OutputFile]) -> Result<Vec<u8>> {
    let value = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": spec.config.sim.seed,
        "subcommand": spec.kind.command(),
        "schemes": spec.schemes.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "config": spec.config.to_json_value(),
        "outputs": outputs.iter().map(|o| o.name.clone()).collect::<Vec<_>>(),
    });
    let mut bytes = serde_json::to_vec_pretty(&value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes the outputs and `manifest.json` into `dir`, creating it if
/// needed. Returns the paths written.
pub fn write_outputs(dir: &Path, spec: &ExperimentSpec, outputs: &[OutputFile]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for o in outputs {
        let p = dir.join(&o.name);
        std::fs::write(&p, &o.bytes)?;
        written.push(p);
    }
    let p = dir.join("manifest.json");
    std::fs::write(&p, manifest(spec, outputs)?)?;
    written.push(p);
    Ok(written)
}
