//! Energy-arbitrage optimization models and their solution.
//!
//! Two models are built here. The power-energy model tracks stored energy with
//! a constant round-trip efficiency. The physics-based model embeds the
//! linearized single-particle model so that every committed power is backed by
//! a current, a voltage and electrode concentrations. Both maximize market
//! revenue minus a cycle-based degradation cost over a day of hourly prices.

pub mod backend;
pub mod model;
pub mod mps;
pub mod physics;
pub mod power_energy;
pub mod warm_start;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, SolveError};
pub use backend::{HighsBackend, Solution, SolveOptions, SolveStatus, SolverBackend, SubprocessBackend};
pub use model::{Dimensions, MilpModel, ModelKind, RowSense, VarId, VarKind};
pub use physics::{build_physics_based, solve_physics, PhysicsConfig};
pub use power_energy::{build_power_energy, PowerEnergyConfig};

/// Hourly market prices ($/MWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries(Vec<f64>);

impl PriceSeries {
    /// Number of hours in a day-ahead series.
    pub const DAY: usize = 24;

    /// Any non-empty series of finite prices.
    pub fn new(prices: Vec<f64>) -> Result<Self, ModelError> {
        if prices.is_empty() {
            return Err(ModelError::input("prices", "at least one hour is required"));
        }
        if let Some(k) = prices.iter().position(|p| !p.is_finite()) {
            return Err(ModelError::input("prices", format!("hour {} is not finite", k + 1)));
        }
        Ok(PriceSeries(prices))
    }

    /// A day-ahead series of exactly 24 finite prices.
    pub fn day_ahead(prices: Vec<f64>) -> Result<Self, ModelError> {
        if prices.len() != Self::DAY {
            return Err(ModelError::input(
                "prices",
                format!("expected {} hourly prices, got {}", Self::DAY, prices.len()),
            ));
        }
        Self::new(prices)
    }

    pub fn hours(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Every price multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        PriceSeries(self.0.iter().map(|p| p * alpha).collect())
    }
}

/// Dispatch read back from a solved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ModelKind,
    pub subintervals: usize,
    /// Subinterval length (h).
    pub tau_h: f64,
    pub prices: Vec<f64>,
    /// Signed stack power per hour and subinterval (MW), positive when discharging.
    pub power: Vec<Vec<f64>>,
    /// Charging power (MW).
    pub charge: Vec<Vec<f64>>,
    /// Discharging power (MW).
    pub discharge: Vec<Vec<f64>>,
    /// Stored energy at the end of each subinterval (MWh).
    pub state_mwh: Vec<Vec<f64>>,
    /// Cell current (A); empty for the power-energy model.
    pub current: Vec<Vec<f64>>,
    /// Cell voltage (V); empty for the power-energy model.
    pub voltage: Vec<Vec<f64>>,
    /// Energy sold per hour (MWh).
    pub energy: Vec<f64>,
    /// Degradation cost per hour ($).
    pub degradation: Vec<f64>,
    /// Revenue minus degradation ($).
    pub objective: f64,
    pub status: SolveStatus,
    pub gap: Option<f64>,
    pub bound: Option<f64>,
    pub solve_time_s: f64,
    /// Complete variable assignment of the model the schedule came from.
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl Schedule {
    pub fn hours(&self) -> usize {
        self.prices.len()
    }

    /// Schedule holding a fixed power profile, e.g. for replaying a dispatch
    /// that did not come from a solver.
    pub fn from_power(prices: &[f64], power: Vec<Vec<f64>>, degradation_per_mwh: f64) -> Self {
        let m = power.first().map_or(1, Vec::len);
        let tau_h = 1.0 / m as f64;
        let charge: Vec<Vec<f64>> = power.iter().map(|h| h.iter().map(|p| (-p).max(0.0)).collect()).collect();
        let discharge: Vec<Vec<f64>> = power.iter().map(|h| h.iter().map(|p| p.max(0.0)).collect()).collect();
        let energy: Vec<f64> = power.iter().map(|h| h.iter().sum::<f64>() * tau_h).collect();
        let degradation: Vec<f64> = discharge
            .iter()
            .map(|h| h.iter().sum::<f64>() * tau_h * degradation_per_mwh)
            .collect();
        let objective = prices.iter().zip(&energy).map(|(l, e)| l * e).sum::<f64>()
            - degradation.iter().sum::<f64>();
        Schedule {
            kind: ModelKind::Generic,
            subintervals: m,
            tau_h,
            prices: prices.to_vec(),
            state_mwh: vec![Vec::new(); power.len()],
            power,
            charge,
            discharge,
            current: Vec::new(),
            voltage: Vec::new(),
            energy,
            degradation,
            objective,
            status: SolveStatus::Optimal,
            gap: None,
            bound: None,
            solve_time_s: 0.0,
            values: Vec::new(),
        }
    }

    /// All-idle schedule.
    pub fn idle(prices: &[f64], subintervals: usize) -> Self {
        Self::from_power(prices, vec![vec![0.0; subintervals]; prices.len()], 0.0)
    }

    /// Market revenue ($).
    pub fn revenue(&self) -> f64 {
        self.prices.iter().zip(&self.energy).map(|(l, e)| l * e).sum()
    }

    /// Total degradation cost ($).
    pub fn degradation_cost(&self) -> f64 {
        self.degradation.iter().sum()
    }
}

/// Reads a schedule from a solution using the model's metadata.
pub fn extract_schedule(model: &MilpModel, solution: &Solution) -> Schedule {
    let meta = &model.meta;
    let x = &solution.values;
    let grid = |ids: &Vec<Vec<VarId>>| -> Vec<Vec<f64>> {
        ids.iter().map(|h| h.iter().map(|v| x[v.0]).collect()).collect()
    };
    let charge = grid(&meta.charge);
    let discharge = grid(&meta.discharge);
    let power = match meta.kind {
        ModelKind::PhysicsBased => grid(&meta.power),
        _ => charge
            .iter()
            .zip(&discharge)
            .map(|(c, d)| c.iter().zip(d).map(|(c, d)| d - c).collect())
            .collect(),
    };
    let charge = if meta.charge.is_empty() {
        power.iter().map(|h| h.iter().map(|p| (-p).max(0.0)).collect()).collect()
    } else {
        charge
    };
    let (a, b) = meta.state_to_mwh;
    let state_mwh = grid(&meta.state)
        .into_iter()
        .map(|h| h.into_iter().map(|s| a * s + b).collect())
        .collect();
    Schedule {
        kind: meta.kind,
        subintervals: meta.subintervals,
        tau_h: meta.tau_h,
        prices: meta.prices.clone(),
        power,
        charge,
        discharge,
        state_mwh,
        current: grid(&meta.current),
        voltage: grid(&meta.voltage),
        energy: meta.energy.iter().map(|v| x[v.0]).collect(),
        degradation: meta.degradation.iter().map(|v| x[v.0]).collect(),
        objective: solution.objective,
        status: solution.status,
        gap: solution.gap,
        bound: solution.bound,
        solve_time_s: solution.time_s,
        values: x.clone(),
    }
}

/// Solves a model and reads back its schedule.
pub fn solve(
    model: &MilpModel,
    backend: &dyn SolverBackend,
    gap: f64,
    time_limit_s: f64,
) -> Result<Schedule, SolveError> {
    let options = SolveOptions {
        gap,
        time_limit_s,
        ..SolveOptions::default()
    };
    solve_with(model, backend, &options)
}

/// Like [`solve`] with full control over the options.
pub fn solve_with(
    model: &MilpModel,
    backend: &dyn SolverBackend,
    options: &SolveOptions,
) -> Result<Schedule, SolveError> {
    let solution = backend.solve(model, options)?;
    if solution.status == SolveStatus::Infeasible {
        return Err(SolveError::Infeasible);
    }
    Ok(extract_schedule(model, &solution))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn price_series_validation() {
        assert!(PriceSeries::day_ahead(vec![1.0; 23]).is_err());
        assert!(PriceSeries::day_ahead(vec![1.0; 24]).is_ok());
        assert!(PriceSeries::new(vec![]).is_err());
        assert!(PriceSeries::new(vec![f64::NAN]).is_err());
        assert_eq!(PriceSeries::new(vec![1.0, 2.0]).unwrap().scaled(3.0).values(), &[3.0, 6.0]);
    }

    #[test]
    fn fixed_power_schedule_accounts_energy_and_cost() {
        let s = Schedule::from_power(&[10.0, 20.0], vec![vec![-1.0, -1.0], vec![2.0, 0.0]], 5.0);
        assert_eq!(s.energy, vec![-1.0, 1.0]);
        assert_eq!(s.degradation, vec![0.0, 5.0]);
        assert_eq!(s.objective, -10.0 + 20.0 - 5.0);
        let idle = Schedule::idle(&[1.0; 3], 5);
        assert_eq!(idle.objective, 0.0);
    }
}
