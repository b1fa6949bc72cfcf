//! `incomedyn` command-line front end.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use incomedyn::{Error, ErrorKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "incomedyn", version, about = "Income dynamics: simulation, Fokker-Planck, survey fits and poverty indices")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for the simulator; never changes results.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Re-run the command recorded in a manifest instead of a subcommand.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Agent-based Langevin simulation with KS and Hill reports.
    Simulate(SimulateArgs),
    /// Deflate and rescale survey rounds onto one curve.
    Collapse(CollapseArgs),
    /// Fit the steady state and the Monod curve to each round.
    Fit(FitArgs),
    /// Full chain to the per-round poverty index series.
    Indices(IndicesArgs),
    /// Evolve a density with the Fokker-Planck solver.
    Evolve(EvolveArgs),
    /// Generate synthetic survey rounds.
    Synth(SynthArgs),
    /// Evaluate transient eigenmodes and their operator residuals.
    Modes(ModesArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct LabourArgs {
    /// Constant labour rate C.
    #[arg(long = "C", alias = "c", default_value_t = 1.6)]
    pub c: f64,
    /// Piecewise-linear C(t) as `t:c,t:c,...`; overrides --C.
    #[arg(long = "C-knots")]
    pub c_knots: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long = "M", alias = "m", default_value_t = 1.6)]
    pub m: f64,
    #[command(flatten)]
    pub labour: LabourArgs,
    #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 10_000)]
    pub agents: usize,
    #[arg(long, default_value_t = 50.0)]
    pub t_end: f64,
    /// `equilibrium`, `constant` (at C/M) or `constant:<y>`.
    #[arg(long, default_value = "constant")]
    pub init: String,
    /// Comma-separated snapshot times; default is t_end only.
    #[arg(long)]
    pub snapshots: Option<String>,
    /// Histogram bins per snapshot.
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Rounds CSV.
    #[arg(long)]
    pub rounds: PathBuf,
    /// Deflators CSV (`year,cpi`); without it the data are used as given.
    #[arg(long)]
    pub deflators: Option<PathBuf>,
    #[arg(long, default_value_t = incomedyn::survey::REFERENCE_YEAR)]
    pub reference_year: f64,
    #[arg(long, default_value_t = incomedyn::survey::REFERENCE_MEAN_INCOME)]
    pub reference_mean: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CollapseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Shape of the analytic overlay.
    #[arg(long = "M", alias = "m", default_value_t = 1.6)]
    pub m: f64,
    /// Starvation offset in unit-mean units.
    #[arg(long, default_value_t = incomedyn::survey::DEFAULT_OFFSET)]
    pub offset: f64,
    /// Points on the common evaluation grid.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleArg {
    Joint,
    MeanAnchored,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Starvation offset in unit-mean units.
    #[arg(long, default_value_t = incomedyn::survey::DEFAULT_OFFSET)]
    pub offset: f64,
    /// Fit the offset instead of holding it fixed.
    #[arg(long)]
    pub fit_offset: bool,
    #[arg(long, value_enum, default_value_t = ScaleArg::Joint)]
    pub scale: ScaleArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IndicesArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Poverty line in the deflated frame.
    #[arg(long)]
    pub poverty_line: f64,
    /// Use each round's fitted C0 instead of the quasi-static C(t) series.
    #[arg(long)]
    pub per_round_scale: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvolveArgs {
    #[arg(long = "M", alias = "m", default_value_t = 1.6)]
    pub m: f64,
    #[command(flatten)]
    pub labour: LabourArgs,
    #[arg(long, default_value_t = incomedyn::fpsolve::DEFAULT_CELLS)]
    pub cells: usize,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// `steady` or `bump:<centre/mean>:<log width>`.
    #[arg(long, default_value = "bump:3:0.05")]
    pub init: String,
    #[arg(long, default_value_t = 100)]
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long = "M", alias = "m", default_value_t = 1.6)]
    pub m: f64,
    /// Scale per round, comma-separated (one value is broadcast).
    #[arg(long = "C0", alias = "c0", default_value = "1.6")]
    pub c0: String,
    #[arg(long, default_value_t = incomedyn::survey::DEFAULT_OFFSET)]
    pub offset: f64,
    /// Band edges, comma-separated; `inf` closes the open band.
    #[arg(long, default_value = commands::DEFAULT_EDGES)]
    pub edges: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub population: u64,
    /// Survey years, comma-separated; one round per year.
    #[arg(long, default_value = "2000")]
    pub years: String,
    #[arg(long = "V", alias = "v")]
    pub v: Option<f64>,
    #[arg(long = "K", alias = "k")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModesArgs {
    #[arg(long = "M", alias = "m", default_value_t = 1.6)]
    pub m: f64,
    /// Series scale c; defaults to C0 = M (unit mean).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub n_max: u32,
    #[arg(long = "A1", alias = "a1", default_value_t = 0.0)]
    pub a1: f64,
    #[arg(long = "A2", alias = "a2", default_value_t = 1.0)]
    pub a2: f64,
    #[arg(long, default_value_t = incomedyn::fpsolve::DEFAULT_CELLS)]
    pub cells: usize,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

/// Everything needed to reproduce a run. Output directory and worker count
/// are deliberately absent: neither changes any output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub command: Command,
}

pub struct Context<'a> {
    pub seed: u64,
    pub out_dir: &'a Path,
    pub workers: usize,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 2,
        ErrorKind::Validation | ErrorKind::Io => 3,
        ErrorKind::Numerical => 4,
    }
}

fn load_manifest(path: &Path) -> incomedyn::Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: not a valid manifest: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Error } else { log::LevelFilter::Warn })
        .parse_env("INCOMEDYN_LOG")
        .format_timestamp(None)
        .init();

    let manifest = match (&cli.manifest, cli.command) {
        (Some(_), Some(_)) => {
            eprintln!("error: give either a subcommand or --manifest, not both");
            return ExitCode::from(2);
        }
        (None, None) => {
            eprintln!("error: a subcommand or --manifest is required (see --help)");
            return ExitCode::from(2);
        }
        (Some(path), None) => match load_manifest(path) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(&e));
            }
        },
        (None, Some(command)) => Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cli.seed,
            command,
        },
    };
    let ctx = Context { seed: manifest.seed, out_dir: &cli.out_dir, workers: cli.workers };
    match commands::execute(&manifest, &ctx) {
        Ok(files) => {
            if !cli.quiet {
                println!("wrote {} files to {}", files.len(), cli.out_dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
