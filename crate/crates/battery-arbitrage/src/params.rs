//! Physical and economic parameters of a cell and of the stack built from it.
//!
//! A parameter file is JSON with four sections: `cell`, `negative_electrode`,
//! `positive_electrode` and `economics`. Open-circuit potentials are tabulated
//! as `[stoichiometry, volts]` pairs and interpolated linearly. Every section
//! may carry a `sources` map that annotates where each value comes from.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Which electrode a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Electrode {
    Negative,
    Positive,
}

impl fmt::Display for Electrode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Electrode::Negative => "negative",
            Electrode::Positive => "positive",
        })
    }
}

/// Open-circuit potential tabulated against surface stoichiometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct OcpCurve {
    x: Vec<f64>,
    v: Vec<f64>,
}

impl OcpCurve {
    /// Builds a curve from `(stoichiometry, volts)` pairs with strictly
    /// ascending stoichiometry inside `[0, 1]`.
    pub fn new(points: &[[f64; 2]]) -> Result<Self, ParamError> {
        if points.len() < 2 {
            return Err(ParamError::invalid("ocp", "needs at least two points"));
        }
        let x: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let v: Vec<f64> = points.iter().map(|p| p[1]).collect();
        if x.iter().chain(&v).any(|a| !a.is_finite()) {
            return Err(ParamError::invalid("ocp", "contains non-finite values"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ParamError::invalid("ocp", "stoichiometry must be strictly ascending"));
        }
        if x[0] < 0.0 || x[x.len() - 1] > 1.0 {
            return Err(ParamError::invalid("ocp", "stoichiometry must lie in [0, 1]"));
        }
        Ok(OcpCurve { x, v })
    }

    /// Tabulated stoichiometries.
    pub fn stoichiometries(&self) -> &[f64] {
        &self.x
    }

    /// Tabulated potentials.
    pub fn potentials(&self) -> &[f64] {
        &self.v
    }

    /// Smallest and largest tabulated stoichiometry.
    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    /// Whether `x` lies inside the tabulated window.
    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        (lo..=hi).contains(&x)
    }

    /// Linear interpolation, or `None` outside the tabulated window.
    pub fn eval(&self, x: f64) -> Option<f64> {
        self.contains(x).then(|| self.eval_clamped(x))
    }

    /// Linear interpolation that holds the end values outside the table.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.v[0];
        }
        if x >= self.x[n - 1] {
            return self.v[n - 1];
        }
        let k = self.x.partition_point(|&xi| xi <= x);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        if x == x0 {
            return self.v[k - 1];
        }
        let w = (x - x0) / (x1 - x0);
        self.v[k - 1] + w * (self.v[k] - self.v[k - 1])
    }

    /// True when the interpolant is monotone and not constant on `[lo, hi]`.
    /// Flat stretches are allowed; tabulated graphite curves have plateaus.
    pub fn monotone_on(&self, lo: f64, hi: f64) -> bool {
        let mut pts = vec![self.eval_clamped(lo)];
        pts.extend(
            self.x
                .iter()
                .zip(&self.v)
                .filter(|(x, _)| **x > lo && **x < hi)
                .map(|(_, v)| *v),
        );
        pts.push(self.eval_clamped(hi));
        let inc = pts.windows(2).all(|w| w[1] >= w[0]);
        let dec = pts.windows(2).all(|w| w[1] <= w[0]);
        (inc || dec) && pts[0] != pts[pts.len() - 1]
    }
}

impl TryFrom<Vec<[f64; 2]>> for OcpCurve {
    type Error = ParamError;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        OcpCurve::new(&points)
    }
}

impl From<OcpCurve> for Vec<[f64; 2]> {
    fn from(c: OcpCurve) -> Self {
        c.x.into_iter().zip(c.v).map(|(x, v)| [x, v]).collect()
    }
}

/// Constants of one porous electrode, represented by a single spherical particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeParams {
    /// Particle radius (m).
    pub radius: f64,
    /// Solid-phase diffusivity (m^2/s).
    pub diffusivity: f64,
    /// Reaction rate constant; `k * sqrt(c_e c (c_max - c))` is in A/m^2.
    pub rate_constant: f64,
    /// Active material volume fraction.
    pub active_fraction: f64,
    /// Electrode volume (m^3).
    pub volume: f64,
    /// Saturation concentration (mol/m^3).
    pub c_max: f64,
    /// Concentration at 0% state of charge (mol/m^3).
    #[serde(rename = "c_min", alias = "c_empty")]
    pub c_empty: f64,
    /// Concentration at 100% state of charge (mol/m^3).
    pub c_full: f64,
    /// Constant of the linearized overpotential (A/m^2); `None` selects
    /// [`CellParams::bv_constant`]'s default.
    #[serde(default)]
    pub bv_linear_a: Option<f64>,
    /// Open-circuit potential against surface stoichiometry.
    pub ocp: OcpCurve,
    /// Free-form provenance notes keyed by field name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sources: BTreeMap<String, String>,
}

impl ElectrodeParams {
    /// Surface stoichiometry `c / c_max`.
    pub fn stoichiometry(&self, c_surf: f64, which: Electrode) -> Result<f64, ParamError> {
        if !(0.0..=self.c_max).contains(&c_surf) {
            return Err(ParamError::ConcentrationRange {
                electrode: which,
                value: c_surf,
                c_max: self.c_max,
            });
        }
        Ok(c_surf / self.c_max)
    }

    /// Exchange current density (A/m^2) at the given surface concentration.
    pub fn exchange_current_density(&self, c_surf: f64, electrolyte_conc: f64) -> f64 {
        self.rate_constant * (electrolyte_conc * c_surf * (self.c_max - c_surf)).max(0.0).sqrt()
    }

    /// Uniform concentration corresponding to a state-of-charge fraction.
    pub fn concentration_at_soc(&self, soc: f64) -> f64 {
        self.c_empty + soc * (self.c_full - self.c_empty)
    }

    /// Lithium capacity of the electrode in mol per unit stoichiometry.
    pub fn capacity_mol(&self) -> f64 {
        self.volume * self.active_fraction * self.c_max
    }

    fn validate(&self, section: &str, which: Electrode) -> Result<(), ParamError> {
        let f = |name: &str| format!("{section}.{name}");
        positive(&f("radius"), self.radius)?;
        positive(&f("diffusivity"), self.diffusivity)?;
        positive(&f("rate_constant"), self.rate_constant)?;
        positive(&f("volume"), self.volume)?;
        positive(&f("c_max"), self.c_max)?;
        if !(self.active_fraction > 0.0 && self.active_fraction <= 1.0) {
            return Err(ParamError::invalid(f("active_fraction"), "must lie in (0, 1]"));
        }
        for (name, c) in [("c_min", self.c_empty), ("c_full", self.c_full)] {
            if !(c > 0.0 && c < self.c_max) {
                return Err(ParamError::invalid(
                    f(name),
                    format!("{c} must lie strictly between 0 and c_max = {}", self.c_max),
                ));
            }
        }
        let charged_direction_ok = match which {
            Electrode::Negative => self.c_full > self.c_empty,
            Electrode::Positive => self.c_full < self.c_empty,
        };
        if !charged_direction_ok {
            return Err(ParamError::invalid(
                f("c_full"),
                "charging must move lithium from the positive into the negative electrode",
            ));
        }
        if let Some(a) = self.bv_linear_a {
            positive(&f("bv_linear_a"), a)?;
        }
        Ok(())
    }
}

/// Cell, stack and economic data plus both electrodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    /// Number of identical cells in the stack.
    pub n_cells: u32,
    /// Temperature (K).
    pub temperature: f64,
    /// Faraday constant (C/mol).
    pub faraday: f64,
    /// Gas constant (J/(mol K)).
    pub gas_constant: f64,
    /// Electrolyte concentration (mol/m^3), constant.
    pub electrolyte_conc: f64,
    /// Cell current limit (A), the 1C current.
    pub i_max: f64,
    /// Lower cell voltage limit (V).
    pub v_min: f64,
    /// Upper cell voltage limit (V).
    pub v_max: f64,
    /// Nominal stack energy (MWh).
    pub q_max: f64,
    /// Stack charging power limit (MW).
    pub p_max_ch: f64,
    /// Stack discharging power limit (MW).
    pub p_max_dis: f64,
    /// Capital cost of storage capacity ($/MWh).
    pub capital_cost: f64,
    /// Full cycles to end of life.
    pub cycle_life: f64,
    /// Minimum state of charge as a fraction of `q_max`.
    pub soc_floor: f64,
    pub neg: ElectrodeParams,
    pub pos: ElectrodeParams,
    pub cell_sources: BTreeMap<String, String>,
    pub economics_sources: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSection {
    n_cells: u32,
    temperature: f64,
    faraday: f64,
    gas_constant: f64,
    electrolyte_conc: f64,
    i_max: f64,
    v_min: f64,
    v_max: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    sources: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EconomicsSection {
    q_max: f64,
    p_max_ch: f64,
    p_max_dis: f64,
    capital_cost: f64,
    cycle_life: f64,
    soc_floor: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    sources: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFile {
    cell: CellSection,
    negative_electrode: ElectrodeParams,
    positive_electrode: ElectrodeParams,
    economics: EconomicsSection,
}

impl From<ParamFile> for CellParams {
    fn from(p: ParamFile) -> Self {
        CellParams {
            n_cells: p.cell.n_cells,
            temperature: p.cell.temperature,
            faraday: p.cell.faraday,
            gas_constant: p.cell.gas_constant,
            electrolyte_conc: p.cell.electrolyte_conc,
            i_max: p.cell.i_max,
            v_min: p.cell.v_min,
            v_max: p.cell.v_max,
            q_max: p.economics.q_max,
            p_max_ch: p.economics.p_max_ch,
            p_max_dis: p.economics.p_max_dis,
            capital_cost: p.economics.capital_cost,
            cycle_life: p.economics.cycle_life,
            soc_floor: p.economics.soc_floor,
            neg: p.negative_electrode,
            pos: p.positive_electrode,
            cell_sources: p.cell.sources,
            economics_sources: p.economics.sources,
        }
    }
}

impl From<&CellParams> for ParamFile {
    fn from(c: &CellParams) -> Self {
        ParamFile {
            cell: CellSection {
                n_cells: c.n_cells,
                temperature: c.temperature,
                faraday: c.faraday,
                gas_constant: c.gas_constant,
                electrolyte_conc: c.electrolyte_conc,
                i_max: c.i_max,
                v_min: c.v_min,
                v_max: c.v_max,
                sources: c.cell_sources.clone(),
            },
            negative_electrode: c.neg.clone(),
            positive_electrode: c.pos.clone(),
            economics: EconomicsSection {
                q_max: c.q_max,
                p_max_ch: c.p_max_ch,
                p_max_dis: c.p_max_dis,
                capital_cost: c.capital_cost,
                cycle_life: c.cycle_life,
                soc_floor: c.soc_floor,
                sources: c.economics_sources.clone(),
            },
        }
    }
}

/// Reads and validates a parameter file.
pub fn load_params(path: impl AsRef<Path>) -> Result<CellParams, ParamError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ParamError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    CellParams::from_json(&text)
}

fn positive(field: &str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::invalid(field, format!("{value} must be positive and finite")))
    }
}

/// Bundled LG M50 parameter file.
pub const REFERENCE_JSON: &str = include_str!("../../../data/lgm50.json");

impl CellParams {
    /// The bundled LG M50 parameter set scaled to the case-study stack.
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_JSON).expect("bundled parameter file is valid")
    }

    /// Parses and validates the JSON parameter schema.
    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        let file: ParamFile = serde_json::from_str(text)?;
        let params = CellParams::from(file);
        params.validate()?;
        Ok(params)
    }

    /// Serializes back into the JSON parameter schema.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ParamFile::from(self)).expect("parameters serialize")
    }

    /// Checks every invariant, naming the first offending field.
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n_cells == 0 {
            return Err(ParamError::invalid("cell.n_cells", "must be at least 1"));
        }
        positive("cell.temperature", self.temperature)?;
        positive("cell.faraday", self.faraday)?;
        positive("cell.gas_constant", self.gas_constant)?;
        positive("cell.electrolyte_conc", self.electrolyte_conc)?;
        positive("cell.i_max", self.i_max)?;
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_min < self.v_max) {
            return Err(ParamError::invalid("cell.v_min", "must be below v_max"));
        }
        positive("economics.q_max", self.q_max)?;
        positive("economics.p_max_ch", self.p_max_ch)?;
        positive("economics.p_max_dis", self.p_max_dis)?;
        positive("economics.cycle_life", self.cycle_life)?;
        if !(self.capital_cost.is_finite() && self.capital_cost >= 0.0) {
            return Err(ParamError::invalid("economics.capital_cost", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.soc_floor) {
            return Err(ParamError::invalid("economics.soc_floor", "must lie in [0, 1)"));
        }
        self.neg.validate("negative_electrode", Electrode::Negative)?;
        self.pos.validate("positive_electrode", Electrode::Positive)?;
        let lo = self.neg.c_empty.min(self.neg.c_full) / self.neg.c_max;
        let hi = self.neg.c_empty.max(self.neg.c_full) / self.neg.c_max;
        if !self.neg.ocp.monotone_on(lo, hi) {
            return Err(ParamError::invalid(
                "negative_electrode.ocp",
                "must be monotone and not constant over the operating window",
            ));
        }
        Ok(())
    }

    pub fn electrode(&self, which: Electrode) -> &ElectrodeParams {
        match which {
            Electrode::Negative => &self.neg,
            Electrode::Positive => &self.pos,
        }
    }

    /// `R T / F` in volts.
    pub fn thermal_voltage(&self) -> f64 {
        self.gas_constant * self.temperature / self.faraday
    }

    /// Molar flux (mol/(m^2 s)) across the particle surface for cell current
    /// `i_app` (A, positive on discharge). Lithium leaves the negative particle
    /// and enters the positive one on discharge.
    pub fn molar_flux(&self, i_app: f64, which: Electrode) -> f64 {
        let e = self.electrode(which);
        let magnitude = i_app * e.radius / (3.0 * e.volume * e.active_fraction * self.faraday);
        match which {
            Electrode::Negative => magnitude,
            Electrode::Positive => -magnitude,
        }
    }

    /// Constant `A` of the linear overpotential `eta = R T J / A`.
    ///
    /// Unless overridden in the parameter file, `A` is the secant value that
    /// makes the linear law reproduce the exact Butler-Volmer overpotential at
    /// the 1C flux and half stoichiometry. It tends to the exchange current
    /// density there as the current goes to zero.
    pub fn bv_constant(&self, which: Electrode) -> f64 {
        let e = self.electrode(which);
        if let Some(a) = e.bv_linear_a {
            return a;
        }
        let j0 = e.exchange_current_density(0.5 * e.c_max, self.electrolyte_conc);
        let flux = self.molar_flux(self.i_max, which).abs();
        let arg = self.faraday * flux / (2.0 * j0);
        self.faraday * flux / (2.0 * arg.asinh())
    }

    /// Negative-electrode concentration at the state-of-charge floor.
    pub fn neg_floor_concentration(&self) -> f64 {
        self.neg.concentration_at_soc(self.soc_floor)
    }

    /// Degradation cost per MWh discharged ($/MWh).
    pub fn degradation_per_mwh(&self) -> f64 {
        self.capital_cost / self.cycle_life
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_json() -> String {
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/lgm50.json"))
            .unwrap()
    }

    #[test]
    fn reference_file_loads_with_case_study_values() {
        let p = CellParams::from_json(&reference_json()).unwrap();
        assert_eq!(p.n_cells, 10_000);
        assert_eq!(p.q_max, 0.182);
        assert_eq!(p.p_max_ch, 0.182);
        assert_eq!(p.p_max_dis, 0.182);
        assert_eq!(p.soc_floor, 0.14);
        assert!(p.neg.ocp.stoichiometries().len() >= 50);
        assert!(p.pos.ocp.stoichiometries().len() >= 50);
    }

    #[test]
    fn swapped_concentration_limits_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&reference_json()).unwrap();
        v["negative_electrode"]["c_min"] = serde_json::json!(40000.0);
        let err = CellParams::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("negative_electrode.c_min"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(&reference_json()).unwrap();
        v["economics"].as_object_mut().unwrap().remove("cycle_life");
        let err = CellParams::from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("cycle_life"), "{err}");
    }

    #[test]
    fn serialization_round_trips() {
        let p = CellParams::from_json(&reference_json()).unwrap();
        let back = CellParams::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn stoichiometry_normalizes_and_checks_range() {
        let p = CellParams::from_json(&reference_json()).unwrap();
        let e = &p.neg;
        assert_eq!(e.stoichiometry(e.c_max, Electrode::Negative).unwrap(), 1.0);
        assert_eq!(e.stoichiometry(0.0, Electrode::Negative).unwrap(), 0.0);
        assert_eq!(e.stoichiometry(e.c_max / 2.0, Electrode::Negative).unwrap(), 0.5);
        assert!(e.stoichiometry(e.c_max * 1.01, Electrode::Negative).is_err());
        assert!(e.stoichiometry(-1.0, Electrode::Negative).is_err());
    }

    #[test]
    fn ocp_interpolation_is_exact_at_table_points() {
        let c = OcpCurve::new(&[[0.0, 1.0], [0.5, 0.0], [1.0, 2.0]]).unwrap();
        assert_eq!(c.eval(0.5), Some(0.0));
        assert_eq!(c.eval(0.25), Some(0.5));
        assert_eq!(c.eval(1.1), None);
        assert_eq!(c.eval_clamped(1.1), 2.0);
        assert!(!c.monotone_on(0.0, 1.0));
        assert!(c.monotone_on(0.0, 0.5));
        let flat = OcpCurve::new(&[[0.0, 1.0], [0.5, 1.0], [1.0, 1.0]]).unwrap();
        assert!(!flat.monotone_on(0.0, 1.0));
    }

    #[test]
    fn unordered_ocp_is_rejected() {
        assert!(OcpCurve::new(&[[0.5, 1.0], [0.2, 0.0]]).is_err());
    }

    #[test]
    fn default_bv_constant_approaches_j0_for_small_currents() {
        let mut p = CellParams::from_json(&reference_json()).unwrap();
        let j0 = p.neg.exchange_current_density(0.5 * p.neg.c_max, p.electrolyte_conc);
        let a_1c = p.bv_constant(Electrode::Negative);
        assert!(a_1c > j0);
        p.i_max *= 1e-6;
        let a_small = p.bv_constant(Electrode::Negative);
        assert!((a_small - j0).abs() / j0 < 1e-9);
    }
}
