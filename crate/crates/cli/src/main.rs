//! `battarb`: runs the power-energy and physics-based arbitrage models on a
//! day of prices and audits their schedules on the particle model.

mod output;
mod prices;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use battery_arbitrage::calibrate::round_trip_efficiency;
use battery_arbitrage::milp::backend::write_name_value;
use battery_arbitrage::milp::mps::read_mps;
use battery_arbitrage::milp::{HighsBackend, SolveOptions, SolverBackend};
use battery_arbitrage::params::{load_params, CellParams};
use clap::{Parser, Subcommand, ValueEnum};

/// Failure class, reported as a tag and mapped to the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Io,
    Solve,
    Audit,
}

impl Category {
    fn code(self) -> u8 {
        match self {
            Category::Config => 2,
            Category::Io => 3,
            Category::Solve => 4,
            Category::Audit => 5,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Io => "io",
            Category::Solve => "solve",
            Category::Audit => "audit",
        }
    }
}

/// An error with its failure class.
#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub source: anyhow::Error,
}

pub trait Categorize<T> {
    fn category(self, category: Category) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> Categorize<T> for Result<T, E> {
    fn category(self, category: Category) -> Result<T, CliError> {
        self.map_err(|e| CliError {
            category,
            source: e.into(),
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "battarb", version, about = "Battery energy-arbitrage models with a particle-model audit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    PowerEnergy,
    Physics,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    /// HiGHS linked into this process.
    Highs,
    /// CBC run as a child process on an MPS file.
    Cbc,
    /// This program's `solve-mps` command run as a child process.
    SelfProcess,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Which model to run.
    #[arg(long, value_enum, default_value = "both")]
    pub model: ModelChoice,
    /// Price CSV with header `hour,price`.
    #[arg(long)]
    pub prices: PathBuf,
    /// Cell and economics parameter JSON. Defaults to the bundled LG M50 set.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Subintervals per hour.
    #[arg(long, default_value_t = 5)]
    pub subintervals: usize,
    /// Round-trip efficiency of the power-energy model. Calibrated at 1C on
    /// the particle model when omitted.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Segments of the negative open-circuit potential.
    #[arg(long, default_value_t = 1)]
    pub pwl_ocp_segs: usize,
    /// Segments of the positive open-circuit potential.
    #[arg(long, default_value_t = 3)]
    pub pwl_ocp_segs_pos: usize,
    /// Segments of each square in the power product.
    #[arg(long, default_value_t = 6)]
    pub pwl_square_segs: usize,
    /// Width of the hourly power band as a fraction of the power rating.
    #[arg(long, default_value_t = 0.01)]
    pub power_band: f64,
    /// Solver backend.
    #[arg(long, value_enum, default_value = "highs")]
    pub solver: SolverChoice,
    /// Executable for the CBC backend.
    #[arg(long, default_value = "cbc")]
    pub solver_path: PathBuf,
    /// Relative optimality gap.
    #[arg(long, default_value_t = 1e-3)]
    pub gap: f64,
    /// Time limit per model (s).
    #[arg(long, default_value_t = 120.0)]
    pub time_limit: f64,
    /// Also write each model as an MPS file.
    #[arg(long)]
    pub emit_mps: bool,
    /// Skip the heuristic starting schedule of the physics-based model.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Also count steps outside the empty-to-full concentration window in the
    /// headline violation rate.
    #[arg(long)]
    pub audit_count_soc_window: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build, solve and audit the arbitrage models.
    Run(RunArgs),
    /// Solve an MPS file with HiGHS and write a `name value` solution.
    SolveMps {
        mps: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        gap: f64,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
    },
    /// Round-trip efficiency of a constant-current cycle on the particle model.
    Efficiency {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        c_rate: f64,
    },
}

pub fn read_params(path: Option<&PathBuf>) -> Result<CellParams> {
    match path {
        Some(p) => load_params(p).with_context(|| format!("parameter file {}", p.display())),
        None => Ok(CellParams::reference()),
    }
}

fn solve_mps(mps: &PathBuf, solution: &PathBuf, gap: f64, time_limit: f64) -> Result<(), CliError> {
    let model = read_mps(mps).with_context(|| format!("reading {}", mps.display())).category(Category::Config)?;
    let options = SolveOptions {
        gap,
        time_limit_s: time_limit,
        ..SolveOptions::default()
    };
    let s = HighsBackend::default().solve(&model, &options).category(Category::Solve)?;
    let names: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
    let mut file = std::fs::File::create(solution)
        .with_context(|| format!("creating {}", solution.display()))
        .category(Category::Io)?;
    write_name_value(&mut file, s.status, &names, &s.values).category(Category::Io)?;
    println!("status {} objective {}", s.status, s.objective);
    Ok(())
}

fn efficiency(params: Option<&PathBuf>, c_rate: f64) -> Result<(), CliError> {
    let params = read_params(params).category(Category::Config)?;
    let e = round_trip_efficiency(&params, c_rate).category(Category::Config)?;
    println!(
        "eta {:.4} at {c_rate}C (charged {:.3} Wh, discharged {:.3} Wh per cell, {} voltage excursion steps)",
        e.eta, e.charge_wh, e.discharge_wh, e.voltage_excursion_steps
    );
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run::run(args),
        Command::SolveMps {
            mps,
            solution,
            gap,
            time_limit,
        } => solve_mps(mps, solution, *gap, *time_limit),
        Command::Efficiency { params, c_rate } => efficiency(params.as_ref(), *c_rate),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {:#}", e.category.tag(), e.source);
            ExitCode::from(e.category.code())
        }
    }
}
