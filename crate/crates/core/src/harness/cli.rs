use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{run_experiment, write_outputs, ExperimentKind, ExperimentSpec, RunConfig};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dtdd", version, about = "Dynamic-TDD scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-node average rates of each scheme at the base configuration.
    Simulate(Common),
    /// Sum-rate versus transmit power.
    SweepPower(Common),
    /// Sum-rate versus side length of the deployment area.
    SweepDim(Common),
    /// Group-1 versus group-2 sum-rates over a grid of group weights.
    RateRegion(Common),
    /// Demand-tracking weight adaptation.
    Fairness(Common),
    /// Scheduler versus exhaustive search on small random instances.
    OracleCompare(Common),
    /// Decision time versus node count.
    Complexity(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Schemes to run: proposed_fd[@SI], proposed_hd, proposed_mixed[@SI], bs1, bs3[@SI].
    #[arg(long, num_args = 1..)]
    scheme: Vec<String>,
    /// SI suppression in dB for schemes that do not name their own.
    #[arg(long = "si-db", allow_negative_numbers = true)]
    si_db: Option<f64>,
    /// Only report warnings and errors.
    #[arg(long)]
    quiet: bool,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Simulate(c) => (ExperimentKind::SingleRun, c),
            Command::SweepPower(c) => (ExperimentKind::SweepPower, c),
            Command::SweepDim(c) => (ExperimentKind::SweepDimension, c),
            Command::RateRegion(c) => (ExperimentKind::RateRegion, c),
            Command::Fairness(c) => (ExperimentKind::Fairness, c),
            Command::OracleCompare(c) => (ExperimentKind::OracleCompare, c),
            Command::Complexity(c) => (ExperimentKind::ComplexityScaling, c),
        }
    }
}

fn build_spec(kind: ExperimentKind, args: &Common) -> Result<ExperimentSpec> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.sim.seed = seed;
    }
    if let Some(si) = args.si_db {
        config.sim.si_suppression_db = si;
        config.experiment.oracle.si_suppression_db = si;
    }
    ExperimentSpec::new(kind, config, &args.scheme)
}

fn run(kind: ExperimentKind, args: &Common) -> Result<()> {
    let spec = build_spec(kind, args)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?;
    }
    log::info!("{} with seed {}", kind.command(), spec.config.sim.seed);
    let outputs = run_experiment(&spec)?;
    for path in write_outputs(&args.out, &spec, &outputs)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 1 for usage or
/// configuration errors, 2 when the run itself fails.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (kind, args) = cli.command.split();
    let level = if args.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
    match run(kind, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}
