//! Power-energy arbitrage model.
//!
//! Stored energy changes by `eta * charge * tau - discharge * tau` per
//! subinterval, where `eta` is a constant round-trip efficiency charged on the
//! way in. A binary per hour forbids charging and discharging in the same hour.

use serde::{Deserialize, Serialize};

use super::model::{MilpModel, ModelKind, ModelMeta, RowSense};
use super::PriceSeries;
use crate::error::ModelError;
use crate::params::CellParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEnergyConfig {
    /// Energy capacity (MWh).
    pub q_max: f64,
    /// Charging power limit (MW).
    pub p_max_ch: f64,
    /// Discharging power limit (MW).
    pub p_max_dis: f64,
    /// Lowest admissible stored energy as a fraction of `q_max`.
    pub soc_floor: f64,
    /// Round-trip efficiency.
    pub eta_rt: f64,
    /// Stored energy at the start of the day (MWh).
    pub soe0: f64,
    /// Subintervals per hour.
    pub subintervals: usize,
    /// Degradation cost per MWh discharged ($/MWh).
    pub degradation_per_mwh: f64,
}

impl PowerEnergyConfig {
    /// Configuration for a full battery with the given efficiency.
    pub fn from_params(params: &CellParams, eta_rt: f64, subintervals: usize) -> Self {
        PowerEnergyConfig {
            q_max: params.q_max,
            p_max_ch: params.p_max_ch,
            p_max_dis: params.p_max_dis,
            soc_floor: params.soc_floor,
            eta_rt,
            soe0: params.q_max,
            subintervals,
            degradation_per_mwh: params.degradation_per_mwh(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.eta_rt > 0.0 && self.eta_rt <= 1.0) {
            return Err(ModelError::input("eta", format!("{} outside (0, 1]", self.eta_rt)));
        }
        if self.subintervals == 0 {
            return Err(ModelError::input("subintervals", "must be at least 1"));
        }
        if !(self.q_max > 0.0 && self.p_max_ch >= 0.0 && self.p_max_dis >= 0.0) {
            return Err(ModelError::input("economics", "capacity and power limits must be positive"));
        }
        if !(0.0..1.0).contains(&self.soc_floor) {
            return Err(ModelError::input("soc_floor", format!("{} outside [0, 1)", self.soc_floor)));
        }
        let lo = self.soc_floor * self.q_max;
        if !(lo..=self.q_max).contains(&self.soe0) {
            return Err(ModelError::input(
                "initial energy",
                format!("{} MWh outside [{lo}, {}]", self.soe0, self.q_max),
            ));
        }
        Ok(())
    }
}

/// Builds the power-energy model for a price series.
pub fn build_power_energy(prices: &PriceSeries, cfg: &PowerEnergyConfig) -> Result<MilpModel, ModelError> {
    cfg.validate()?;
    let m = cfg.subintervals;
    let tau = 1.0 / m as f64;
    let mut model = MilpModel::new("power_energy");
    let mut meta = ModelMeta {
        kind: ModelKind::PowerEnergy,
        hours: prices.hours(),
        subintervals: m,
        tau_h: tau,
        prices: prices.values().to_vec(),
        state_to_mwh: (1.0, 0.0),
        ..ModelMeta::default()
    };

    let mut prev = None;
    for (t, &price) in prices.values().iter().enumerate() {
        let h = t + 1;
        let u = model.binary(format!("u_{h}"))?;
        let e = model.continuous(format!("e_{h}"), -cfg.p_max_ch, cfg.p_max_dis)?;
        let c = model.continuous(format!("c_{h}"), 0.0, cfg.degradation_per_mwh * cfg.p_max_dis)?;
        model.set_objective(e, price);
        model.set_objective(c, -1.0);

        let (mut ch_row, mut dis_row, mut soe_row) = (Vec::new(), Vec::new(), Vec::new());
        let mut energy_terms = vec![(e, -1.0)];
        let mut cost_terms = vec![(c, -1.0)];
        for k in 1..=m {
            let ch = model.continuous(format!("ch_{h}_{k}"), 0.0, cfg.p_max_ch)?;
            let dis = model.continuous(format!("dis_{h}_{k}"), 0.0, cfg.p_max_dis)?;
            let soe = model.continuous(format!("soe_{h}_{k}"), cfg.soc_floor * cfg.q_max, cfg.q_max)?;
            model.add_constraint(format!("chmode_{h}_{k}"), &[(ch, 1.0), (u, -cfg.p_max_ch)], RowSense::Le, 0.0)?;
            model.add_constraint(
                format!("dismode_{h}_{k}"),
                &[(dis, 1.0), (u, cfg.p_max_dis)],
                RowSense::Le,
                cfg.p_max_dis,
            )?;
            let mut terms = vec![(soe, 1.0), (ch, -cfg.eta_rt * tau), (dis, tau)];
            let rhs = match prev {
                Some(p) => {
                    terms.push((p, -1.0));
                    0.0
                }
                None => cfg.soe0,
            };
            model.add_constraint(format!("soe_{h}_{k}"), &terms, RowSense::Eq, rhs)?;
            energy_terms.extend([(dis, tau), (ch, -tau)]);
            cost_terms.push((dis, cfg.degradation_per_mwh * tau));
            prev = Some(soe);
            ch_row.push(ch);
            dis_row.push(dis);
            soe_row.push(soe);
        }
        model.add_constraint(format!("energy_{h}"), &energy_terms, RowSense::Eq, 0.0)?;
        model.add_constraint(format!("degr_{h}"), &cost_terms, RowSense::Eq, 0.0)?;
        meta.charge.push(ch_row);
        meta.discharge.push(dis_row);
        meta.state.push(soe_row);
        meta.energy.push(e);
        meta.degradation.push(c);
        meta.mode.push(u);
    }
    model.meta = meta;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve, HighsBackend};

    fn config(eta: f64) -> PowerEnergyConfig {
        PowerEnergyConfig {
            q_max: 1.0,
            p_max_ch: 1.0,
            p_max_dis: 1.0,
            soc_floor: 0.0,
            eta_rt: eta,
            soe0: 0.0,
            subintervals: 1,
            degradation_per_mwh: 0.0,
        }
    }

    #[test]
    fn buy_low_sell_high() {
        let prices = PriceSeries::new(vec![10.0, 50.0]).unwrap();
        let model = build_power_energy(&prices, &config(0.8)).unwrap();
        let s = solve(&model, &HighsBackend::default(), 1e-9, 10.0).unwrap();
        // Charge 1 MWh at 10 $/MWh, store 0.8 MWh, sell it at 50 $/MWh.
        assert!((s.objective - (0.8 * 50.0 - 10.0)).abs() < 1e-6);
        assert!((s.power[0][0] + 1.0).abs() < 1e-6);
        assert!((s.power[1][0] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn losses_can_make_arbitrage_unprofitable() {
        let prices = PriceSeries::new(vec![10.0, 11.0]).unwrap();
        let model = build_power_energy(&prices, &config(0.5)).unwrap();
        let s = solve(&model, &HighsBackend::default(), 1e-9, 10.0).unwrap();
        assert!(s.objective.abs() < 1e-9);
    }

    #[test]
    fn dimensions_scale_with_horizon() {
        let prices = PriceSeries::new(vec![1.0; 24]).unwrap();
        let mut cfg = config(0.9);
        cfg.subintervals = 5;
        let d = build_power_energy(&prices, &cfg).unwrap().dimensions();
        assert_eq!(d.binary, 24);
        assert_eq!(d.continuous, 24 * (2 + 3 * 5));
        assert_eq!(d.constraints, 24 * (2 + 3 * 5));
    }

    #[test]
    fn invalid_efficiency_is_rejected() {
        let prices = PriceSeries::new(vec![1.0]).unwrap();
        assert!(build_power_energy(&prices, &config(1.2)).is_err());
        assert!(build_power_energy(&prices, &config(0.0)).is_err());
    }
}
