//! Starting schedules for the physics-based model.
//!
//! A dynamic program over the negative average stoichiometry picks one
//! constant power per hour, simulated on the same linear cell the model uses.
//! Fixing the hourly mode binaries and power references to that choice leaves
//! a small MILP whose solution is a complete, feasible starting point.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backend::{SolveOptions, SolveStatus, SolverBackend};
use super::model::MilpModel;
use super::physics::LinearCell;
use super::PriceSeries;
use crate::params::CellParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpOptions {
    /// State grid size over the negative stoichiometry window.
    pub grid_points: usize,
    /// Spacing of the hourly power levels (MW).
    pub power_step_mw: f64,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            grid_points: 3001,
            power_step_mw: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpResult {
    /// Predicted profit of the policy from the starting state ($).
    pub value: f64,
    /// Chosen power per hour (MW), positive when discharging.
    pub hourly_power: Vec<f64>,
    pub time_s: f64,
}

/// What the warm start produced, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartReport {
    pub dp_value: f64,
    pub dp_time_s: f64,
    pub hourly_power: Vec<f64>,
    /// Objective of the completed starting solution, if one was found.
    pub incumbent_objective: Option<f64>,
    pub restricted_time_s: f64,
}

/// Evenly spaced power levels from full charge to full discharge, including zero
/// when the limits allow it.
fn power_levels(p_ch: f64, p_dis: f64, step: f64) -> Vec<f64> {
    let n = ((p_ch + p_dis) / step).round().max(1.0) as usize;
    let mut levels: Vec<f64> = (0..=n).map(|k| -p_ch + (p_ch + p_dis) * k as f64 / n as f64).collect();
    if let Some(z) = levels.iter_mut().min_by(|a, b| a.abs().total_cmp(&b.abs())) {
        *z = 0.0;
    }
    levels
}

struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid {
    fn point(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.lo - 1e-12 && x <= self.hi + 1e-12
    }

    fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let s = ((x - self.lo) / (self.hi - self.lo) * (self.n - 1) as f64).clamp(0.0, (self.n - 1) as f64);
        let k = (s.floor() as usize).min(self.n - 2);
        let w = s - k as f64;
        let (a, b) = (values[k], values[k + 1]);
        if w == 0.0 {
            a
        } else if w == 1.0 {
            b
        } else {
            a + w * (b - a)
        }
    }
}

/// End-of-hour stoichiometry after holding `p_mw` for a whole hour, or
/// `None` if a cell limit is broken on the way.
fn hold_for_hour(cell: &LinearCell, subintervals: usize, p_mw: f64, mut x: f64) -> Option<f64> {
    let p_cell = p_mw * 1e6 / cell.n_cells;
    for _ in 0..subintervals {
        let point = cell.current_for_power(p_cell, x)?;
        if !cell.admissible(&point) {
            return None;
        }
        x = point.next_neg;
    }
    Some(x)
}

/// Best hourly-constant power policy on the linear cell.
pub fn dynamic_programming(cell: &LinearCell, prices: &PriceSeries, params: &CellParams, opts: &DpOptions) -> DpResult {
    let started = Instant::now();
    let m = (3600.0 / cell.tau_s).round() as usize;
    let levels = power_levels(params.p_max_ch, params.p_max_dis, opts.power_step_mw);
    let grid = Grid {
        lo: cell.window_neg.0,
        hi: cell.window_neg.1,
        n: opts.grid_points.max(2),
    };
    let deg = params.degradation_per_mwh();
    let reward = |price: f64, p: f64| price * p - deg * p.max(0.0);

    // Transitions do not depend on the hour, so they are computed once.
    let transitions: Vec<Vec<Option<f64>>> = levels
        .par_iter()
        .map(|&p| {
            (0..grid.n)
                .map(|k| hold_for_hour(cell, m, p, grid.point(k)).filter(|&x| grid.contains(x)))
                .collect()
        })
        .collect();

    let hours = prices.hours();
    let mut value = vec![vec![0.0; grid.n]; hours + 1];
    for t in (0..hours).rev() {
        let price = prices.values()[t];
        let next = &value[t + 1];
        let current: Vec<f64> = (0..grid.n)
            .into_par_iter()
            .map(|k| {
                levels
                    .iter()
                    .zip(&transitions)
                    .filter_map(|(&p, tr)| tr[k].map(|x| reward(price, p) + grid.interpolate(next, x)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        value[t] = current;
    }

    // Roll the policy forward from the exact starting state.
    let mut x = cell.start[0];
    let mut hourly_power = Vec::with_capacity(hours);
    let mut total = 0.0;
    for t in 0..hours {
        let price = prices.values()[t];
        let mut best = (f64::NEG_INFINITY, 0.0, x);
        for &p in &levels {
            if let Some(nx) = hold_for_hour(cell, m, p, x).filter(|&nx| grid.contains(nx)) {
                let v = reward(price, p) + grid.interpolate(&value[t + 1], nx);
                if v > best.0 {
                    best = (v, p, nx);
                }
            }
        }
        if best.0 == f64::NEG_INFINITY {
            // Only resting can be left; it is always admissible inside the window.
            best = (0.0, 0.0, x);
        }
        total += reward(price, best.1);
        hourly_power.push(best.1);
        x = best.2;
    }
    DpResult {
        value: total,
        hourly_power,
        time_s: started.elapsed().as_secs_f64(),
    }
}

/// Completes an hourly power choice into a full solution of `model` by
/// fixing the hourly mode and power reference and solving what is left.
/// Returns the values, their objective and the time spent.
pub fn restricted_incumbent(
    model: &MilpModel,
    hourly_power: &[f64],
    backend: &dyn SolverBackend,
    time_limit_s: f64,
    gap: f64,
) -> Option<(Vec<f64>, f64, f64)> {
    let started = Instant::now();
    let meta = &model.meta;
    if meta.mode.len() != hourly_power.len() || meta.band.len() != hourly_power.len() {
        return None;
    }
    for width in [1e-4, 1e-3, 1e-2] {
        let mut restricted = model.clone();
        for (t, &p) in hourly_power.iter().enumerate() {
            let u = &mut restricted.variables[meta.mode[t].0];
            let charging = if p < 0.0 { 1.0 } else { 0.0 };
            u.lower = charging;
            u.upper = charging;
            let band = &mut restricted.variables[meta.band[t].0];
            band.lower = (p - width).max(band.lower);
            band.upper = (p + width).min(band.upper);
        }
        let remaining = time_limit_s - started.elapsed().as_secs_f64();
        if remaining <= 0.0 {
            break;
        }
        let options = SolveOptions {
            gap,
            time_limit_s: remaining,
            ..SolveOptions::default()
        };
        match backend.solve(&restricted, &options) {
            Ok(s) if s.status != SolveStatus::Infeasible && !s.values.is_empty() => {
                return Some((s.values, s.objective, started.elapsed().as_secs_f64()));
            }
            Ok(_) => tracing::debug!(width, "restricted model infeasible"),
            Err(e) => tracing::debug!(width, error = %e, "restricted solve failed"),
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::physics::PhysicsConfig;
    use crate::reduced::ReducedState;
    use crate::test_support::reference_params;

    #[test]
    fn levels_are_symmetric_and_include_rest() {
        let levels = power_levels(0.182, 0.182, 0.002);
        assert_eq!(levels.len(), 183);
        assert!(levels.contains(&0.0));
        assert_eq!(levels[0], -0.182);
        assert!((levels[182] - 0.182).abs() < 1e-15);
    }

    #[test]
    fn grid_interpolation_is_exact_on_lines() {
        let g = Grid { lo: 1.0, hi: 2.0, n: 11 };
        let values: Vec<f64> = (0..11).map(|k| 3.0 * g.point(k)).collect();
        assert!((g.interpolate(&values, 1.234) - 3.702).abs() < 1e-12);
        assert_eq!(g.interpolate(&values, 2.0), 6.0);
    }

    #[test]
    fn policy_sells_stored_energy_at_the_price_peak() {
        let p = reference_params();
        let cell = LinearCell::new(&p, &PhysicsConfig::default(), &ReducedState::at_soc(&p, 1.0)).unwrap();
        let prices = PriceSeries::new(vec![0.0, 300.0, 0.0]).unwrap();
        let opts = DpOptions {
            grid_points: 401,
            power_step_mw: 0.01,
        };
        let dp = dynamic_programming(&cell, &prices, &p, &opts);
        assert!(dp.hourly_power[1] > 0.1, "{:?}", dp.hourly_power);
        assert!(dp.value > 0.0);
    }
}
