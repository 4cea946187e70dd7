//! Artifact and report writers.
//!
//! Everything except `timing.json` is a function of the inputs and the
//! solver's answer only, so repeated runs produce identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use battery_arbitrage::milp::model::Dimensions;
use battery_arbitrage::milp::SolveStatus;
use serde::Serialize;

use crate::run::{Inputs, ModelRun};
use crate::RunArgs;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn opt(v: Option<&f64>) -> String {
    v.map(f64::to_string).unwrap_or_default()
}

/// Writes `schedule.csv`, `hourly.csv`, `audit.json` and `trace.csv` into `dir`.
pub fn write_artifacts(dir: &Path, run: &ModelRun) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let s = &run.schedule;

    let mut w = csv::Writer::from_writer(create(&dir.join("schedule.csv"))?);
    w.write_record([
        "hour",
        "subinterval",
        "price",
        "power_mw",
        "charge_mw",
        "discharge_mw",
        "state_mwh",
        "current_a",
        "voltage_v",
    ])?;
    for t in 0..s.hours() {
        for k in 0..s.subintervals {
            let pick = |grid: &Vec<Vec<f64>>| opt(grid.get(t).and_then(|h| h.get(k)));
            w.write_record([
                (t + 1).to_string(),
                (k + 1).to_string(),
                s.prices[t].to_string(),
                pick(&s.power),
                pick(&s.charge),
                pick(&s.discharge),
                pick(&s.state_mwh),
                pick(&s.current),
                pick(&s.voltage),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(&dir.join("hourly.csv"))?);
    w.write_record(["hour", "price", "energy_mwh", "degradation_usd", "state_mwh", "achieved_mwh"])?;
    for t in 0..s.hours() {
        w.write_record([
            (t + 1).to_string(),
            s.prices[t].to_string(),
            s.energy[t].to_string(),
            s.degradation[t].to_string(),
            opt(s.state_mwh.get(t).and_then(|h| h.last())),
            run.audit.hourly_achieved[t].to_string(),
        ])?;
    }
    w.flush()?;

    let audit = serde_json::to_string_pretty(&run.audit)?;
    std::fs::write(dir.join("audit.json"), audit + "\n").context("writing audit.json")?;
    let mut trace = create(&dir.join("trace.csv"))?;
    run.trace.write_csv(&mut trace).context("writing trace.csv")?;
    Ok(())
}

#[derive(Serialize)]
struct ConfigEcho {
    subintervals: usize,
    eta: f64,
    eta_calibrated: bool,
    pwl_ocp_segs: usize,
    pwl_ocp_segs_pos: usize,
    pwl_square_segs: usize,
    power_band: f64,
    solver: String,
    gap: f64,
    time_limit_s: f64,
    audit_counts_soc_window: bool,
}

#[derive(Serialize)]
struct ModelSummary {
    objective: f64,
    revenue: f64,
    degradation_cost: f64,
    status: SolveStatus,
    gap: Option<f64>,
    bound: Option<f64>,
    dimensions: Dimensions,
    violations_pct: f64,
    committed_profit: f64,
    achieved_profit: f64,
    max_hourly_energy_mismatch_mwh: f64,
    eta: Option<f64>,
    heuristic_value: Option<f64>,
    heuristic_incumbent: Option<f64>,
}

#[derive(Serialize)]
struct Comparison {
    /// Physics-based over power-energy objective, minus one, in percent.
    committed_profit_gain_pct: f64,
    /// Same for the profits achieved in the replay.
    achieved_profit_gain_pct: f64,
    /// Power-energy minus physics-based violation rate (percentage points).
    violation_reduction_pp: f64,
}

#[derive(Serialize)]
struct Report {
    config: ConfigEcho,
    models: BTreeMap<&'static str, ModelSummary>,
    comparison: Option<Comparison>,
}

#[derive(Serialize)]
struct Timing {
    build_s: f64,
    solve_s: f64,
    audit_s: f64,
    heuristic_s: Option<f64>,
}

fn summary(run: &ModelRun) -> ModelSummary {
    let s = &run.schedule;
    ModelSummary {
        objective: s.objective,
        revenue: s.revenue(),
        degradation_cost: s.degradation_cost(),
        status: s.status,
        gap: s.gap,
        bound: s.bound,
        dimensions: run.dimensions(),
        violations_pct: run.audit.violations_pct,
        committed_profit: run.audit.committed_profit,
        achieved_profit: run.audit.achieved_profit,
        max_hourly_energy_mismatch_mwh: run.audit.max_energy_mismatch(),
        eta: run.eta,
        heuristic_value: run.warm_start.as_ref().map(|w| w.dp_value),
        heuristic_incumbent: run.warm_start.as_ref().and_then(|w| w.incumbent_objective),
    }
}

fn gain_pct(new: f64, base: f64) -> f64 {
    100.0 * (new / base - 1.0)
}

/// Writes `report.json`, `report.txt` and `timing.json`, and returns a
/// console summary including solve times.
pub fn write_reports(out: &Path, args: &RunArgs, inputs: &Inputs, runs: &[ModelRun]) -> Result<String> {
    let models: BTreeMap<&'static str, ModelSummary> = runs.iter().map(|r| (r.label, summary(r))).collect();
    let comparison = match (models.get("power-energy"), models.get("physics")) {
        (Some(pe), Some(ph)) => Some(Comparison {
            committed_profit_gain_pct: gain_pct(ph.objective, pe.objective),
            achieved_profit_gain_pct: gain_pct(ph.achieved_profit, pe.achieved_profit),
            violation_reduction_pp: pe.violations_pct - ph.violations_pct,
        }),
        _ => None,
    };
    let report = Report {
        config: ConfigEcho {
            subintervals: inputs.physics.subintervals,
            eta: inputs.eta,
            eta_calibrated: inputs.eta_calibrated,
            pwl_ocp_segs: inputs.physics.ocp_segments_neg,
            pwl_ocp_segs_pos: inputs.physics.ocp_segments_pos,
            pwl_square_segs: inputs.physics.square_segments,
            power_band: inputs.physics.power_band,
            solver: format!("{:?}", args.solver).to_lowercase(),
            gap: args.gap,
            time_limit_s: args.time_limit,
            audit_counts_soc_window: inputs.audit.count_soc_window,
        },
        models,
        comparison,
    };
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")
        .context("writing report.json")?;

    let mut text = String::new();
    writeln!(text, "{:<34}{:>16}{:>16}", "", "power-energy", "physics")?;
    let cell = |name: &str, f: &dyn Fn(&ModelSummary) -> String| {
        let pe = report.models.get("power-energy").map(f).unwrap_or_else(|| "-".into());
        let ph = report.models.get("physics").map(f).unwrap_or_else(|| "-".into());
        format!("{name:<34}{pe:>16}{ph:>16}\n")
    };
    text += &cell("objective ($)", &|m| format!("{:.2}", m.objective));
    text += &cell("profit in replay ($)", &|m| format!("{:.2}", m.achieved_profit));
    text += &cell("violations in active hours (%)", &|m| format!("{:.2}", m.violations_pct));
    text += &cell("constraints", &|m| m.dimensions.constraints.to_string());
    text += &cell("continuous variables", &|m| m.dimensions.continuous.to_string());
    text += &cell("binary variables", &|m| m.dimensions.binary.to_string());
    text += &cell("solver status", &|m| m.status.to_string());
    text += &cell("gap (%)", &|m| m.gap.map(|g| format!("{:.3}", 100.0 * g)).unwrap_or_else(|| "-".into()));
    if let Some(c) = &report.comparison {
        writeln!(text, "physics vs power-energy objective: {:+.2}%", c.committed_profit_gain_pct)?;
        writeln!(text, "physics vs power-energy replay profit: {:+.2}%", c.achieved_profit_gain_pct)?;
    }
    std::fs::write(out.join("report.txt"), &text).context("writing report.txt")?;

    let timing: BTreeMap<&str, Timing> = runs
        .iter()
        .map(|r| {
            let t = Timing {
                build_s: r.build_s,
                solve_s: r.solve_s,
                audit_s: r.audit_s,
                heuristic_s: r.warm_start.as_ref().map(|w| w.dp_time_s + w.restricted_time_s),
            };
            (r.label, t)
        })
        .collect();
    std::fs::write(out.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")
        .context("writing timing.json")?;

    let mut console = text;
    for r in runs {
        writeln!(console, "{} solve time: {:.2} s", r.label, r.solve_s)?;
    }
    Ok(console)
}
