//! Inputs derived from the cell simulator and feasibility audits.
//!
//! The round-trip efficiency used by the power-energy model comes from a
//! constant-current charge and discharge of the particle model. The same
//! simulator replays optimized schedules at a fine time step to measure how
//! often the committed power would drive the cell out of its safe operating
//! regime.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{CalibrationError, SpmError};
use crate::milp::Schedule;
use crate::params::CellParams;
use crate::spm::{simulate, Segment, Setpoint, SimOptions, SimTrace, Simulator, Violations, DEFAULT_SHELLS};

/// Result of the round-trip protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    /// Discharged over charged energy.
    pub eta: f64,
    pub c_rate: f64,
    /// Energy put in per cell (Wh).
    pub charge_wh: f64,
    /// Energy taken out per cell (Wh).
    pub discharge_wh: f64,
    /// Steps whose terminal voltage left the rated window.
    pub voltage_excursion_steps: usize,
}

/// Charges an empty cell at `c_rate` times the rated current for `1 / c_rate`
/// hours, discharges it the same way and returns the energy ratio.
///
/// Voltage excursions are counted, not fatal. Any failure of the simulation
/// itself aborts the calibration.
pub fn round_trip_efficiency(params: &CellParams, c_rate: f64) -> Result<Efficiency, CalibrationError> {
    if !(c_rate > 0.0 && c_rate <= 1.0) {
        return Err(CalibrationError::CRate(c_rate));
    }
    let current = c_rate * params.i_max;
    let duration_s = 3600.0 / c_rate;
    let options = SimOptions {
        n_shells: DEFAULT_SHELLS,
        dt: 10.0,
        strict: true,
    };
    let charge = Segment {
        duration_s,
        setpoint: Setpoint::Current(-current),
    };
    let discharge = Segment {
        duration_s,
        setpoint: Setpoint::Current(current),
    };
    let trace = simulate(params, &[charge, discharge], 0.0, options)?;
    let n = f64::from(params.n_cells);
    let (mut charge_wh, mut discharge_wh) = (0.0, 0.0);
    for (s, dt) in trace.states.iter().zip(&trace.step_s) {
        let wh = s.p_cell / n * dt / 3600.0;
        if wh < 0.0 {
            charge_wh -= wh;
        } else {
            discharge_wh += wh;
        }
    }
    if charge_wh <= 0.0 {
        return Err(CalibrationError::NoCharge);
    }
    Ok(Efficiency {
        eta: discharge_wh / charge_wh,
        c_rate,
        charge_wh,
        discharge_wh,
        voltage_excursion_steps: trace.flags.iter().filter(|f| f.voltage).count(),
    })
}

/// Stored energy (MWh) implied by a negative surface concentration: zero at
/// the empty concentration, `q_max` at the full one, affine in between.
pub fn soc_map(c_surf_neg: f64, params: &CellParams) -> Result<f64, CalibrationError> {
    let (lo, hi) = (params.neg.c_empty, params.neg.c_full);
    let tol = 1e-9 * (hi - lo).abs();
    if !(c_surf_neg >= lo.min(hi) - tol && c_surf_neg <= lo.max(hi) + tol) {
        return Err(CalibrationError::Window {
            value: c_surf_neg,
            lo,
            hi,
        });
    }
    Ok((c_surf_neg - lo) / (hi - lo) * params.q_max)
}

/// Inverse of [`soc_map`].
pub fn soc_map_inverse(energy_mwh: f64, params: &CellParams) -> Result<f64, CalibrationError> {
    let q = params.q_max;
    if !(energy_mwh >= -1e-12 * q && energy_mwh <= q * (1.0 + 1e-12)) {
        return Err(CalibrationError::Energy {
            value: energy_mwh,
            q_max: q,
        });
    }
    let (lo, hi) = (params.neg.c_empty, params.neg.c_full);
    Ok(lo + energy_mwh / q * (hi - lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Simulation step (s).
    pub dt: f64,
    pub n_shells: usize,
    /// Also counts steps whose negative surface concentration left the
    /// empty-to-full window in the headline rate.
    pub count_soc_window: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            dt: 10.0,
            n_shells: DEFAULT_SHELLS,
            count_soc_window: false,
        }
    }
}

/// Outcome of replaying a schedule on the particle model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Violating steps as a percentage of the steps in active hours.
    pub violations_pct: f64,
    /// Steps inside hours with nonzero committed power.
    pub active_steps: usize,
    pub violating_steps: usize,
    /// Steps in active hours carrying each tag.
    pub by_category: BTreeMap<String, usize>,
    /// Tags that make a step count as violating.
    pub headline_categories: Vec<String>,
    /// Energy sold per hour as committed by the schedule (MWh).
    pub hourly_committed: Vec<f64>,
    /// Energy sold per hour as simulated (MWh).
    pub hourly_achieved: Vec<f64>,
    /// Revenue minus degradation as committed ($).
    pub committed_profit: f64,
    /// Revenue minus degradation as simulated ($).
    pub achieved_profit: f64,
}

impl AuditReport {
    /// Largest hourly gap between committed and simulated energy (MWh).
    pub fn max_energy_mismatch(&self) -> f64 {
        self.hourly_committed
            .iter()
            .zip(&self.hourly_achieved)
            .map(|(c, a)| (c - a).abs())
            .fold(0.0, f64::max)
    }
}

fn headline(flags: &Violations, cfg: &AuditConfig) -> bool {
    flags.voltage || flags.current || flags.unreachable || flags.ocp_range || (cfg.count_soc_window && flags.soc_window)
}

/// Replays a schedule from a full cell with the committed power of each
/// subinterval held constant, and reports violations and achieved energy.
pub fn audit_schedule(
    schedule: &Schedule,
    params: &CellParams,
    cfg: &AuditConfig,
) -> Result<(AuditReport, SimTrace), SpmError> {
    let steps_f = schedule.tau_h * 3600.0 / cfg.dt;
    let steps = steps_f.round() as usize;
    if !(cfg.dt > 0.0) || steps == 0 || (steps_f - steps as f64).abs() > 1e-9 {
        return Err(SpmError::Protocol(format!(
            "audit step {} s does not divide the subinterval of {} h",
            cfg.dt, schedule.tau_h
        )));
    }
    let deg = params.degradation_per_mwh();
    let mut sim = Simulator::new(params, 1.0, cfg.n_shells);
    let mut trace = SimTrace::default();
    let mut by_category: BTreeMap<String, usize> =
        ["voltage", "current", "unreachable", "ocp_range", "soc_window"].iter().map(|k| (k.to_string(), 0)).collect();
    let (mut active_steps, mut violating_steps) = (0, 0);
    let mut hourly_achieved = Vec::with_capacity(schedule.hours());
    let mut achieved_profit = 0.0;

    for (t, hour) in schedule.power.iter().enumerate() {
        let active = hour.iter().any(|p| p.abs() > 1e-9);
        let (mut sold, mut discharged) = (0.0, 0.0);
        for &p_mw in hour {
            let setpoint = Setpoint::Power(if p_mw.abs() > 1e-12 { p_mw * 1e6 } else { 0.0 });
            for _ in 0..steps {
                let (state, flags) = sim.step(setpoint, cfg.dt, false)?;
                let mwh = state.p_cell * cfg.dt / 3.6e9;
                sold += mwh;
                discharged += mwh.max(0.0);
                if active {
                    active_steps += 1;
                    for (tag, on) in [
                        ("voltage", flags.voltage),
                        ("current", flags.current),
                        ("unreachable", flags.unreachable),
                        ("ocp_range", flags.ocp_range),
                        ("soc_window", flags.soc_window),
                    ] {
                        if on {
                            *by_category.get_mut(tag).expect("known tag") += 1;
                        }
                    }
                    if headline(&flags, cfg) {
                        violating_steps += 1;
                    }
                }
                trace.states.push(state);
                trace.flags.push(flags);
                trace.step_s.push(cfg.dt);
            }
        }
        achieved_profit += schedule.prices[t] * sold - deg * discharged;
        hourly_achieved.push(sold);
    }

    let mut headline_categories: Vec<String> =
        ["voltage", "current", "unreachable", "ocp_range"].iter().map(|k| k.to_string()).collect();
    if cfg.count_soc_window {
        headline_categories.push("soc_window".into());
    }
    let violations_pct = if active_steps == 0 {
        0.0
    } else {
        100.0 * violating_steps as f64 / active_steps as f64
    };
    let report = AuditReport {
        violations_pct,
        active_steps,
        violating_steps,
        by_category,
        headline_categories,
        hourly_committed: schedule.energy.clone(),
        hourly_achieved,
        committed_profit: schedule.revenue() - schedule.degradation_cost(),
        achieved_profit,
    };
    Ok((report, trace))
}
