//! The `run` command: calibrate, build, solve, audit and report.

use std::time::Instant;

use anyhow::{anyhow, Context};
use battery_arbitrage::calibrate::{audit_schedule, round_trip_efficiency, AuditConfig, AuditReport};
use battery_arbitrage::milp::model::{Dimensions, MilpModel};
use battery_arbitrage::milp::mps::write_mps;
use battery_arbitrage::milp::warm_start::WarmStartReport;
use battery_arbitrage::milp::{
    build_physics_based, build_power_energy, solve_physics, solve_with, HighsBackend, PhysicsConfig,
    PowerEnergyConfig, PriceSeries, Schedule, SolveOptions, SolverBackend, SubprocessBackend,
};
use battery_arbitrage::params::CellParams;
use battery_arbitrage::reduced::ReducedState;
use battery_arbitrage::spm::SimTrace;

use crate::output::{write_artifacts, write_reports};
use crate::prices::ingest_prices;
use crate::{read_params, Categorize, Category, CliError, ModelChoice, RunArgs, SolverChoice};

/// Everything produced for one model.
pub struct ModelRun {
    pub label: &'static str,
    pub model: MilpModel,
    pub schedule: Schedule,
    pub audit: AuditReport,
    pub trace: SimTrace,
    pub eta: Option<f64>,
    pub warm_start: Option<WarmStartReport>,
    pub build_s: f64,
    pub solve_s: f64,
    pub audit_s: f64,
}

impl ModelRun {
    pub fn dimensions(&self) -> Dimensions {
        self.model.dimensions()
    }
}

/// Validated inputs shared by both models.
pub struct Inputs {
    pub prices: PriceSeries,
    pub params: CellParams,
    pub eta: f64,
    pub eta_calibrated: bool,
    pub physics: PhysicsConfig,
    pub options: SolveOptions,
    pub audit: AuditConfig,
}

fn validate(args: &RunArgs) -> anyhow::Result<Inputs> {
    let m = args.subintervals;
    if m == 0 || 3600 % m != 0 || (3600 / m) % 10 != 0 {
        return Err(anyhow!(
            "--subintervals {m}: the subinterval length must be a whole multiple of the 10 s audit step"
        ));
    }
    if !(args.gap > 0.0 && args.gap < 1.0) {
        return Err(anyhow!("--gap {} outside (0, 1)", args.gap));
    }
    if !(args.time_limit > 0.0 && args.time_limit.is_finite()) {
        return Err(anyhow!("--time-limit must be positive"));
    }
    let prices = ingest_prices(&args.prices)?;
    let params = read_params(args.params.as_ref())?;
    let (eta, eta_calibrated) = match args.eta {
        Some(e) => (e, false),
        None => (round_trip_efficiency(&params, 1.0).context("calibrating the round-trip efficiency")?.eta, true),
    };
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(anyhow!("--eta {eta} outside (0, 1]"));
    }
    let physics = PhysicsConfig {
        subintervals: m,
        ocp_segments_neg: args.pwl_ocp_segs,
        ocp_segments_pos: args.pwl_ocp_segs_pos,
        square_segments: args.pwl_square_segs,
        power_band: args.power_band,
        ..PhysicsConfig::default()
    };
    // Building is cheap; doing it here surfaces model errors before any output exists.
    build_power_energy(&prices, &PowerEnergyConfig::from_params(&params, eta, m))?;
    build_physics_based(&params, &prices, &physics, &ReducedState::at_soc(&params, 1.0))?;
    Ok(Inputs {
        prices,
        params,
        eta,
        eta_calibrated,
        physics,
        options: SolveOptions {
            gap: args.gap,
            time_limit_s: args.time_limit,
            ..SolveOptions::default()
        },
        audit: AuditConfig {
            count_soc_window: args.audit_count_soc_window,
            ..AuditConfig::default()
        },
    })
}

fn backend(args: &RunArgs) -> anyhow::Result<Box<dyn SolverBackend>> {
    Ok(match args.solver {
        SolverChoice::Highs => Box::new(HighsBackend::default()),
        SolverChoice::Cbc => Box::new(SubprocessBackend::cbc(&args.solver_path)),
        SolverChoice::SelfProcess => {
            let exe = std::env::current_exe().context("locating this executable")?;
            Box::new(SubprocessBackend::name_value(
                exe,
                &["solve-mps", "{mps}", "--solution", "{solution}", "--gap", "{gap}", "--time-limit", "{time_limit}"],
            ))
        }
    })
}

fn audit(
    label: &'static str,
    schedule: &Schedule,
    inputs: &Inputs,
) -> Result<(AuditReport, SimTrace, f64), CliError> {
    let started = Instant::now();
    let (report, trace) = audit_schedule(schedule, &inputs.params, &inputs.audit)
        .with_context(|| format!("replaying the {label} schedule"))
        .category(Category::Audit)?;
    Ok((report, trace, started.elapsed().as_secs_f64()))
}

fn run_power_energy(inputs: &Inputs, backend: &dyn SolverBackend) -> Result<ModelRun, CliError> {
    let started = Instant::now();
    let cfg = PowerEnergyConfig::from_params(&inputs.params, inputs.eta, inputs.physics.subintervals);
    let model = build_power_energy(&inputs.prices, &cfg).category(Category::Config)?;
    let build_s = started.elapsed().as_secs_f64();
    let schedule = solve_with(&model, backend, &inputs.options)
        .context("solving the power-energy model")
        .category(Category::Solve)?;
    let solve_s = started.elapsed().as_secs_f64() - build_s;
    let (audit, trace, audit_s) = audit("power-energy", &schedule, inputs)?;
    Ok(ModelRun {
        label: "power-energy",
        model,
        schedule,
        audit,
        trace,
        eta: Some(inputs.eta),
        warm_start: None,
        build_s,
        solve_s,
        audit_s,
    })
}

fn run_physics(inputs: &Inputs, backend: &dyn SolverBackend, warm_start: bool) -> Result<ModelRun, CliError> {
    let started = Instant::now();
    let outcome = solve_physics(&inputs.params, &inputs.prices, &inputs.physics, backend, &inputs.options, warm_start)
        .context("solving the physics-based model")
        .category(Category::Solve)?;
    let solve_s = started.elapsed().as_secs_f64();
    let (audit, trace, audit_s) = audit("physics", &outcome.schedule, inputs)?;
    Ok(ModelRun {
        label: "physics",
        model: outcome.model,
        schedule: outcome.schedule,
        audit,
        trace,
        eta: None,
        warm_start: outcome.warm_start,
        build_s: 0.0,
        solve_s,
        audit_s,
    })
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let inputs = validate(args).category(Category::Config)?;
    let backend = backend(args).category(Category::Config)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .category(Category::Io)?;

    let want_pe = args.model != ModelChoice::Physics;
    let want_phys = args.model != ModelChoice::PowerEnergy;
    let (pe, phys) = std::thread::scope(|scope| {
        let pe = want_pe.then(|| scope.spawn(|| run_power_energy(&inputs, backend.as_ref())));
        let phys = want_phys.then(|| scope.spawn(|| run_physics(&inputs, backend.as_ref(), !args.no_warm_start)));
        let join = |h: std::thread::ScopedJoinHandle<'_, Result<ModelRun, CliError>>| {
            h.join().unwrap_or_else(|_| Err(anyhow!("solver thread panicked")).category(Category::Solve))
        };
        (pe.map(join), phys.map(join))
    });
    let runs: Vec<ModelRun> = [pe, phys].into_iter().flatten().collect::<Result<_, _>>()?;

    for r in &runs {
        let dir = args.out.join(r.label);
        write_artifacts(&dir, r).category(Category::Io)?;
        if args.emit_mps {
            let path = dir.join("model.mps");
            write_mps(&r.model, &path)
                .with_context(|| format!("writing {}", path.display()))
                .category(Category::Io)?;
        }
    }
    let summary = write_reports(&args.out, args, &inputs, &runs).category(Category::Io)?;
    print!("{summary}");
    Ok(())
}
