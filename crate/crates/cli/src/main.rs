//! Command-line driver: identity checks, manufactured convergence tables,
//! linear evolution runs with energy ledgers, surface transport tests,
//! initial-data construction, the nonlinear fixed-point iteration, and
//! post-hoc reports from checkpoints.

use benard_core::config::Config;
use benard_core::elliptic::SolverOpts;
use benard_core::error::Error;
use benard_core::fft::SpectralGrid;
use benard_core::Real;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;

#[derive(Parser)]
#[command(
    name = "benard",
    about = "Free-surface Benard convection on a flattened slab",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON configuration file; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initial-data preset overriding the configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for CSV/JSONL/checkpoint artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (1 = deterministic single-thread mode).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed for randomized identity checks.
    #[arg(long, default_value_t = 20260808)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Geometry and operator identity suite; prints pass/fail JSON.
    Check(CommonOpts),
    /// Manufactured-solution convergence tables (CSV).
    Elliptic(CommonOpts),
    /// Linear evolution run with the energy ledger (CSV).
    Evolve(CommonOpts),
    /// Surface advection tests.
    Transport(CommonOpts),
    /// Initial-data construction and compatibility residuals (JSON).
    InitData(CommonOpts),
    /// Full fixed-point iteration; JSONL records and a final checkpoint.
    Picard(CommonOpts),
    /// Re-derive ledgers and metrics from a checkpoint.
    Report {
        /// Checkpoint written by `picard`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn load_config(opts: &CommonOpts) -> Result<Config, Error> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Config::from_json(&text)?
        }
        None => Config::default_with_preset("equilibrium"),
    };
    if let Some(preset) = &opts.preset {
        cfg.initial_data.preset = Some(preset.clone());
        cfg.initial_data.eta_modes.clear();
        cfg.initial_data.theta_modes.clear();
        cfg.initial_data.u_modes.clear();
        cfg.validate()?;
    }
    Ok(cfg)
}

fn exit_code_of(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidGrid(_) => 2,
        Error::SolverDiverged { .. } | Error::IncompatibleData { .. } => 3,
        Error::GeometryDegenerate { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(opts) => with_setup(opts, commands::check::run),
        Command::Elliptic(opts) => with_setup(opts, commands::elliptic::run),
        Command::Evolve(opts) => with_setup(opts, commands::evolve::run),
        Command::Transport(opts) => with_setup(opts, commands::transport::run),
        Command::InitData(opts) => with_setup(opts, commands::init_data::run),
        Command::Picard(opts) => with_setup(opts, commands::picard::run),
        Command::Report { checkpoint, common } => {
            with_setup(common, |ctx| commands::report::run(ctx, checkpoint))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_of(&err))
        }
    }
}

pub struct Context {
    pub cfg: Config,
    pub grid: benard_core::Grid,
    pub sp: SpectralGrid<Real>,
    pub out: PathBuf,
    pub threads: usize,
    pub seed: u64,
}

impl Context {
    pub fn solver_opts(&self) -> SolverOpts {
        self.cfg.solver_opts()
    }
}

fn with_setup(
    opts: &CommonOpts,
    body: impl FnOnce(&Context) -> Result<(), Error>,
) -> Result<(), Error> {
    let cfg = load_config(opts)?;
    let grid = cfg.grid()?;
    let sp = SpectralGrid::<Real>::new(&grid);
    std::fs::create_dir_all(&opts.out)?;
    let ctx = Context {
        cfg,
        grid,
        sp,
        out: opts.out.clone(),
        threads: opts.threads,
        seed: opts.seed,
    };
    body(&ctx)
}
