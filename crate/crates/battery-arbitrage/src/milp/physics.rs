//! Physics-based arbitrage model.
//!
//! Every subinterval carries the cell current and voltage, both electrode
//! fluxes, average and surface stoichiometries, overpotentials and electrode
//! potentials. Open-circuit potentials enter as piecewise-linear functions.
//! Stack power is the product of current and voltage, written as the
//! difference of two squares `((V + I) / 2)^2 - ((V - I) / 2)^2`, each square
//! replaced by its chord interpolation.
//!
//! Quantities are scaled for the solver: fluxes in umol/(m^2 s), concentrations
//! as stoichiometries, power in MW.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::backend::{SolveOptions, SolveStatus, SolverBackend};
use super::model::{MilpModel, ModelKind, ModelMeta, NamedPwl, RowSense, VarId};
use super::warm_start::{dynamic_programming, restricted_incumbent, DpOptions, WarmStartReport};
use super::{extract_schedule, PriceSeries, Schedule};
use crate::error::{ModelError, SolveError};
use crate::linearize::{fit_pwl, pwl_square, square_chord_error, PiecewiseLinearFn};
use crate::params::{CellParams, Electrode};
use crate::reduced::ReducedState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    /// Subintervals per hour.
    pub subintervals: usize,
    /// Segments of the negative open-circuit potential.
    pub ocp_segments_neg: usize,
    /// Segments of the positive open-circuit potential.
    pub ocp_segments_pos: usize,
    /// Segments of each square in the power product.
    pub square_segments: usize,
    /// Width of the hourly power band as a fraction of the power rating.
    pub power_band: f64,
    /// Adds McCormick rows on `V * I` that tighten the relaxation without
    /// removing any feasible point.
    pub valid_cuts: bool,
    /// Stoichiometry interval over which the positive open-circuit potential
    /// is linearized. Defaults to the reachable range.
    pub ocp_domain_pos: Option<(f64, f64)>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            subintervals: 5,
            ocp_segments_neg: 1,
            ocp_segments_pos: 3,
            square_segments: 6,
            power_band: 0.01,
            valid_cuts: true,
            ocp_domain_pos: None,
        }
    }
}

impl PhysicsConfig {
    fn validate(&self) -> Result<(), ModelError> {
        let counts = [
            ("subintervals", self.subintervals),
            ("ocp segments (negative)", self.ocp_segments_neg),
            ("ocp segments (positive)", self.ocp_segments_pos),
            ("square segments", self.square_segments),
        ];
        for (what, n) in counts {
            if n == 0 {
                return Err(ModelError::input(what, "must be at least 1"));
            }
        }
        if !(self.power_band >= 0.0 && self.power_band.is_finite()) {
            return Err(ModelError::input("power band", format!("{} is not a non-negative fraction", self.power_band)));
        }
        Ok(())
    }
}

/// The linearized cell shared by the optimization model and the dynamic
/// programming heuristic. Stoichiometries are fractions of saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCell {
    /// Subinterval length (s).
    pub tau_s: f64,
    pub n_cells: f64,
    pub i_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Flux per ampere (umol/(m^2 s)/A), negative then positive electrode.
    pub flux_gain: [f64; 2],
    /// Average stoichiometry change per unit scaled flux over one subinterval.
    pub dynamics_gain: [f64; 2],
    /// Surface offset per unit scaled flux.
    pub surface_gain: [f64; 2],
    /// Overpotential per unit scaled flux (V).
    pub eta_gain: [f64; 2],
    pub ocp_neg: PiecewiseLinearFn,
    pub ocp_pos: PiecewiseLinearFn,
    /// Admissible negative surface stoichiometry: SoC floor to full.
    pub window_neg: (f64, f64),
    /// Initial average stoichiometries.
    pub start: [f64; 2],
}

/// Operating point of the linear cell over one subinterval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPoint {
    pub current: f64,
    pub voltage: f64,
    pub surf_neg: f64,
    pub surf_pos: f64,
    /// Negative average stoichiometry at the end of the subinterval.
    pub next_neg: f64,
}

impl LinearCell {
    /// Builds the cell for a subinterval count, OCP segment counts and
    /// starting state.
    pub fn new(params: &CellParams, cfg: &PhysicsConfig, state0: &ReducedState) -> Result<Self, ModelError> {
        cfg.validate()?;
        let tau_s = 3600.0 / cfg.subintervals as f64;
        let mut flux_gain = [0.0; 2];
        let mut dynamics_gain = [0.0; 2];
        let mut surface_gain = [0.0; 2];
        let mut eta_gain = [0.0; 2];
        let rt = params.gas_constant * params.temperature;
        for (k, which) in [Electrode::Negative, Electrode::Positive].into_iter().enumerate() {
            let e = params.electrode(which);
            flux_gain[k] = 1e6 * params.molar_flux(1.0, which).abs();
            dynamics_gain[k] = 3.0 * tau_s * 1e-6 / (e.radius * e.c_max);
            surface_gain[k] = 1e-6 * e.radius / (5.0 * e.diffusivity * e.c_max);
            eta_gain[k] = rt * 1e-6 / params.bv_constant(which);
        }
        let full_neg = params.neg.c_full / params.neg.c_max;
        let floor_neg = params.neg_floor_concentration() / params.neg.c_max;
        let window_neg = (floor_neg, full_neg);
        let start = [state0.c_avg_neg / params.neg.c_max, state0.c_avg_pos / params.pos.c_max];
        if !(floor_neg - 1e-12..=full_neg + 1e-12).contains(&start[0]) {
            return Err(ModelError::input(
                "initial state",
                format!("negative stoichiometry {} outside the window [{floor_neg}, {full_neg}]", start[0]),
            ));
        }

        let neg_fit = fit_pwl(&params.neg.ocp, cfg.ocp_segments_neg, window_neg)?;

        let mut cell = LinearCell {
            tau_s,
            n_cells: f64::from(params.n_cells),
            i_max: params.i_max,
            v_min: params.v_min,
            v_max: params.v_max,
            flux_gain,
            dynamics_gain,
            surface_gain,
            eta_gain,
            ocp_neg: neg_fit.pwl.clone(),
            ocp_pos: neg_fit.pwl,
            window_neg,
            start,
        };
        let reach = cell.reachable_pos();
        let table = params.pos.ocp.domain();
        let domain = cfg.ocp_domain_pos.unwrap_or((reach.0.max(table.0), reach.1.min(table.1)));
        if domain.0 > reach.0 || domain.1 < reach.1 {
            return Err(ModelError::PwlDomain {
                variable: "positive surface stoichiometry".into(),
                lo: reach.0,
                hi: reach.1,
                domain_lo: domain.0,
                domain_hi: domain.1,
            });
        }
        cell.ocp_pos = fit_pwl(&params.pos.ocp, cfg.ocp_segments_pos, domain)?.pwl;
        Ok(cell)
    }

    /// Positive average stoichiometry matching a negative one, by lithium
    /// conservation from the starting state.
    pub fn pos_of(&self, avg_neg: f64) -> f64 {
        let ratio = (self.dynamics_gain[1] * self.flux_gain[1]) / (self.dynamics_gain[0] * self.flux_gain[0]);
        self.start[1] + ratio * (self.start[0] - avg_neg)
    }

    /// Surface offsets at the current limit, negative then positive.
    fn max_offsets(&self) -> [f64; 2] {
        [0, 1].map(|k| self.surface_gain[k] * self.flux_gain[k] * self.i_max)
    }

    /// Range the positive surface stoichiometry can reach while the negative
    /// surface stays inside its window at admissible current.
    pub fn reachable_pos(&self) -> (f64, f64) {
        let [off_n, off_p] = self.max_offsets();
        let lo = self.pos_of(self.window_neg.1 + off_n) - off_p;
        let hi = self.pos_of(self.window_neg.0 - off_n) + off_p;
        (lo, hi)
    }

    /// Ohmic-like slope of the voltage in the current (V/A).
    pub fn resistance(&self) -> f64 {
        self.eta_gain[0] * self.flux_gain[0] + self.eta_gain[1] * self.flux_gain[1]
    }

    /// Cell behaviour when holding `current` for one subinterval from the
    /// negative average stoichiometry `avg_neg`.
    pub fn evaluate(&self, current: f64, avg_neg: f64) -> CellPoint {
        let step_neg = self.dynamics_gain[0] * self.flux_gain[0] * current;
        let next_neg = avg_neg - step_neg;
        let mid_neg = avg_neg - 0.5 * step_neg;
        let surf_neg = mid_neg - self.surface_gain[0] * self.flux_gain[0] * current;
        let surf_pos = self.pos_of(mid_neg) + self.surface_gain[1] * self.flux_gain[1] * current;
        let voltage = self.ocp_pos.eval_extended(surf_pos) - self.ocp_neg.eval_extended(surf_neg)
            - self.resistance() * current;
        CellPoint {
            current,
            voltage,
            surf_neg,
            surf_pos,
            next_neg,
        }
    }

    /// Whether an operating point satisfies every cell limit of the model.
    pub fn admissible(&self, p: &CellPoint) -> bool {
        let (lo_p, hi_p) = self.ocp_pos.domain();
        p.current.abs() <= self.i_max + 1e-12
            && (self.v_min..=self.v_max).contains(&p.voltage)
            && (self.window_neg.0 - 1e-12..=self.window_neg.1 + 1e-12).contains(&p.surf_neg)
            && (lo_p..=hi_p).contains(&p.surf_pos)
    }

    /// Current that delivers `p_cell_w` watts per cell, found by bisection
    /// within the current limit. `None` if the power is out of reach.
    pub fn current_for_power(&self, p_cell_w: f64, avg_neg: f64) -> Option<CellPoint> {
        if p_cell_w == 0.0 {
            return Some(self.evaluate(0.0, avg_neg));
        }
        let residual = |i: f64| i * self.evaluate(i, avg_neg).voltage - p_cell_w;
        let (mut lo, mut hi) = if p_cell_w > 0.0 { (0.0, self.i_max) } else { (-self.i_max, 0.0) };
        if residual(lo).signum() == residual(hi).signum() {
            return None;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if residual(mid).signum() == residual(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = self.evaluate(0.5 * (lo + hi), avg_neg);
        ((p.current * p.voltage - p_cell_w).abs() <= 1e-9 * p_cell_w.abs().max(1.0)).then_some(p)
    }
}

/// Adds `f = pwl(x)` with the incremental formulation and returns `f`.
/// Segment fill variables `d_s` run from zero to the segment width, and the
/// binary `z_s` forces segment `s` full before segment `s + 1` may start.
pub fn add_pwl(model: &mut MilpModel, x: VarId, pwl: &PiecewiseLinearFn, tag: &str) -> Result<VarId, ModelError> {
    let bp = pwl.breakpoints();
    let values = pwl.values();
    let slopes = pwl.slopes();
    let n = pwl.n_seg();
    let mut fills = Vec::with_capacity(n);
    for s in 0..n {
        fills.push(model.continuous(format!("{tag}_d{s}"), 0.0, bp[s + 1] - bp[s])?);
    }
    for s in 0..n.saturating_sub(1) {
        let z = model.binary(format!("{tag}_z{s}"))?;
        let (w, w_next) = (bp[s + 1] - bp[s], bp[s + 2] - bp[s + 1]);
        model.add_constraint(format!("{tag}_n{s}"), &[(fills[s + 1], 1.0), (z, -w_next)], RowSense::Le, 0.0)?;
        model.add_constraint(format!("{tag}_f{s}"), &[(fills[s], 1.0), (z, -w)], RowSense::Ge, 0.0)?;
    }
    let mut link = vec![(x, 1.0)];
    link.extend(fills.iter().map(|&d| (d, -1.0)));
    model.add_constraint(format!("{tag}_x"), &link, RowSense::Eq, bp[0])?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f = model.continuous(format!("{tag}_v"), lo, hi)?;
    let mut def = vec![(f, 1.0)];
    def.extend(fills.iter().zip(&slopes).map(|(&d, &k)| (d, -k)));
    model.add_constraint(format!("{tag}_y"), &def, RowSense::Eq, values[0])?;
    Ok(f)
}

/// Builds the physics-based model starting from `state0`.
pub fn build_physics_based(
    params: &CellParams,
    prices: &PriceSeries,
    cfg: &PhysicsConfig,
    state0: &ReducedState,
) -> Result<MilpModel, ModelError> {
    let cell = LinearCell::new(params, cfg, state0)?;
    build_with_cell(params, prices, cfg, &cell)
}

fn build_with_cell(
    params: &CellParams,
    prices: &PriceSeries,
    cfg: &PhysicsConfig,
    cell: &LinearCell,
) -> Result<MilpModel, ModelError> {
    let m = cfg.subintervals;
    let tau_h = 1.0 / m as f64;
    let (i_max, v_min, v_max) = (cell.i_max, cell.v_min, cell.v_max);
    let g = cell.n_cells * 1e-6;
    let (p_ch, p_dis) = (params.p_max_ch, params.p_max_dis);
    let half_band = 0.5 * cfg.power_band * p_ch.max(p_dis);
    let deg = params.degradation_per_mwh();
    let square = pwl_square((0.5 * (v_min - i_max), 0.5 * (v_max + i_max)), cfg.square_segments)?;
    let (y_lo, y_hi) = square.domain();
    let square_err = square_chord_error((y_hi - y_lo) / cfg.square_segments as f64);
    let (pos_lo, pos_hi) = cell.ocp_pos.domain();

    let mut model = MilpModel::new("physics_based");
    model.pwl = vec![
        NamedPwl { name: "ocp_neg".into(), function: cell.ocp_neg.clone() },
        NamedPwl { name: "ocp_pos".into(), function: cell.ocp_pos.clone() },
        NamedPwl { name: "square".into(), function: square.clone() },
    ];
    let n_c = params.neg.c_max;
    let span = params.neg.c_full - params.neg.c_empty;
    let mut meta = ModelMeta {
        kind: ModelKind::PhysicsBased,
        hours: prices.hours(),
        subintervals: m,
        tau_h,
        prices: prices.values().to_vec(),
        state_to_mwh: (params.q_max * n_c / span, -params.q_max * params.neg.c_empty / span),
        ..ModelMeta::default()
    };

    let [kn, kp] = cell.flux_gain;
    let mut prev: Option<(VarId, VarId)> = None;
    for (t, &price) in prices.values().iter().enumerate() {
        let h = t + 1;
        let u = model.binary(format!("u_{h}"))?;
        let pbar = model.continuous(format!("pb_{h}"), -p_ch, p_dis)?;
        let e = model.continuous(format!("e_{h}"), -p_ch, p_dis)?;
        let c = model.continuous(format!("c_{h}"), 0.0, deg * p_dis)?;
        model.set_objective(e, price);
        model.set_objective(c, -1.0);
        let mut energy_terms = vec![(e, -1.0)];
        let mut cost_terms = vec![(c, -1.0)];
        let mut rows: [Vec<VarId>; 5] = Default::default();

        for k in 1..=m {
            let id = format!("{h}_{k}");
            let i = model.continuous(format!("i_{id}"), -i_max, i_max)?;
            let ip = model.continuous(format!("ip_{id}"), 0.0, i_max)?;
            let im = model.continuous(format!("im_{id}"), 0.0, i_max)?;
            model.add_constraint(format!("isp_{id}"), &[(i, 1.0), (ip, -1.0), (im, 1.0)], RowSense::Eq, 0.0)?;
            model.add_constraint(format!("idis_{id}"), &[(ip, 1.0), (u, i_max)], RowSense::Le, i_max)?;
            model.add_constraint(format!("ich_{id}"), &[(im, 1.0), (u, -i_max)], RowSense::Le, 0.0)?;

            let jn = model.continuous(format!("jn_{id}"), -kn * i_max, kn * i_max)?;
            let jp = model.continuous(format!("jp_{id}"), -kp * i_max, kp * i_max)?;
            model.add_constraint(format!("fxn_{id}"), &[(jn, 1.0), (i, -kn)], RowSense::Eq, 0.0)?;
            model.add_constraint(format!("fxp_{id}"), &[(jp, 1.0), (i, kp)], RowSense::Eq, 0.0)?;

            let an = model.continuous(format!("an_{id}"), 0.0, 1.0)?;
            let ap = model.continuous(format!("ap_{id}"), 0.0, 1.0)?;
            let sn = model.continuous(format!("sn_{id}"), cell.window_neg.0, cell.window_neg.1)?;
            let sp = model.continuous(format!("sp_{id}"), pos_lo, pos_hi)?;
            for (avg, surf, flux, idx, tag) in [(an, sn, jn, 0, 'n'), (ap, sp, jp, 1, 'p')] {
                let mut dynamics = vec![(avg, 1.0), (flux, cell.dynamics_gain[idx])];
                let mut surface = vec![(surf, 1.0), (avg, -0.5), (flux, cell.surface_gain[idx])];
                let rhs = match prev {
                    Some(p) => {
                        let before = if idx == 0 { p.0 } else { p.1 };
                        dynamics.push((before, -1.0));
                        surface.push((before, -0.5));
                        (0.0, 0.0)
                    }
                    None => (cell.start[idx], 0.5 * cell.start[idx]),
                };
                model.add_constraint(format!("dyn{tag}_{id}"), &dynamics, RowSense::Eq, rhs.0)?;
                model.add_constraint(format!("srf{tag}_{id}"), &surface, RowSense::Eq, rhs.1)?;
            }

            let un = add_pwl(&mut model, sn, &cell.ocp_neg, &format!("on_{id}"))?;
            let up = add_pwl(&mut model, sp, &cell.ocp_pos, &format!("op_{id}"))?;
            let eta_bound = |idx: usize| cell.eta_gain[idx] * cell.flux_gain[idx] * i_max;
            let etan = model.continuous(format!("hn_{id}"), -eta_bound(0), eta_bound(0))?;
            let etap = model.continuous(format!("hp_{id}"), -eta_bound(1), eta_bound(1))?;
            model.add_constraint(format!("etn_{id}"), &[(etan, 1.0), (jn, -cell.eta_gain[0])], RowSense::Eq, 0.0)?;
            model.add_constraint(format!("etp_{id}"), &[(etap, 1.0), (jp, -cell.eta_gain[1])], RowSense::Eq, 0.0)?;
            let phi_bounds = |f: &PiecewiseLinearFn, b: f64| {
                let lo = f.values().iter().copied().fold(f64::INFINITY, f64::min);
                let hi = f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo - b, hi + b)
            };
            let (lo, hi) = phi_bounds(&cell.ocp_neg, eta_bound(0));
            let phin = model.continuous(format!("gn_{id}"), lo, hi)?;
            let (lo, hi) = phi_bounds(&cell.ocp_pos, eta_bound(1));
            let phip = model.continuous(format!("gp_{id}"), lo, hi)?;
            model.add_constraint(format!("phn_{id}"), &[(phin, 1.0), (un, -1.0), (etan, -1.0)], RowSense::Eq, 0.0)?;
            model.add_constraint(format!("php_{id}"), &[(phip, 1.0), (up, -1.0), (etap, -1.0)], RowSense::Eq, 0.0)?;
            let v = model.continuous(format!("v_{id}"), v_min, v_max)?;
            model.add_constraint(format!("vc_{id}"), &[(v, 1.0), (phip, -1.0), (phin, 1.0)], RowSense::Eq, 0.0)?;

            let y1 = model.continuous(format!("ya_{id}"), y_lo, y_hi)?;
            let y2 = model.continuous(format!("yb_{id}"), y_lo, y_hi)?;
            model.add_constraint(format!("ysa_{id}"), &[(y1, 1.0), (v, -0.5), (i, -0.5)], RowSense::Eq, 0.0)?;
            model.add_constraint(format!("ysb_{id}"), &[(y2, 1.0), (v, -0.5), (i, 0.5)], RowSense::Eq, 0.0)?;
            let s1 = add_pwl(&mut model, y1, &square, &format!("qa_{id}"))?;
            let s2 = add_pwl(&mut model, y2, &square, &format!("qb_{id}"))?;
            let p = model.continuous(format!("p_{id}"), -p_ch, p_dis)?;
            model.add_constraint(format!("pw_{id}"), &[(p, 1.0), (s1, -g), (s2, g)], RowSense::Eq, 0.0)?;
            model.add_constraint(format!("bdu_{id}"), &[(p, 1.0), (pbar, -1.0)], RowSense::Le, half_band)?;
            model.add_constraint(format!("bdl_{id}"), &[(p, 1.0), (pbar, -1.0)], RowSense::Ge, -half_band)?;
            let dis = model.continuous(format!("ds_{id}"), 0.0, p_dis)?;
            model.add_constraint(format!("dsp_{id}"), &[(dis, 1.0), (p, -1.0)], RowSense::Ge, 0.0)?;

            if cfg.valid_cuts {
                let wp = model.continuous(format!("wp_{id}"), 0.0, v_max * i_max)?;
                let wm = model.continuous(format!("wm_{id}"), 0.0, v_max * i_max)?;
                for (w, x, tag) in [(wp, ip, "p"), (wm, im, "m")] {
                    model.add_constraint(format!("m{tag}1_{id}"), &[(w, 1.0), (x, -v_min)], RowSense::Ge, 0.0)?;
                    model.add_constraint(
                        format!("m{tag}2_{id}"),
                        &[(w, 1.0), (x, -v_max), (v, -i_max)],
                        RowSense::Ge,
                        -i_max * v_max,
                    )?;
                    model.add_constraint(format!("m{tag}3_{id}"), &[(w, 1.0), (x, -v_max)], RowSense::Le, 0.0)?;
                    model.add_constraint(
                        format!("m{tag}4_{id}"),
                        &[(w, 1.0), (x, -v_min), (v, -i_max)],
                        RowSense::Le,
                        -i_max * v_min,
                    )?;
                }
                let link = [(p, 1.0), (wp, -g), (wm, g)];
                model.add_constraint(format!("mcu_{id}"), &link, RowSense::Le, g * square_err)?;
                model.add_constraint(format!("mcl_{id}"), &link, RowSense::Ge, -g * square_err)?;
            }

            energy_terms.push((p, tau_h));
            cost_terms.push((dis, deg * tau_h));
            prev = Some((an, ap));
            for (row, var) in rows.iter_mut().zip([p, dis, an, i, v]) {
                row.push(var);
            }
        }
        model.add_constraint(format!("energy_{h}"), &energy_terms, RowSense::Eq, 0.0)?;
        model.add_constraint(format!("degr_{h}"), &cost_terms, RowSense::Eq, 0.0)?;
        let [power, discharge, state, current, voltage] = rows;
        meta.power.push(power);
        meta.discharge.push(discharge);
        meta.state.push(state);
        meta.current.push(current);
        meta.voltage.push(voltage);
        meta.energy.push(e);
        meta.degradation.push(c);
        meta.mode.push(u);
        meta.band.push(pbar);
    }
    model.meta = meta;
    Ok(model)
}

/// Outcome of the full physics-based pipeline.
#[derive(Debug, Clone)]
pub struct PhysicsOutcome {
    pub model: MilpModel,
    pub schedule: Schedule,
    pub warm_start: Option<WarmStartReport>,
}

/// Builds the physics-based model from a full battery, seeds the solver with
/// a heuristic schedule and solves it within `options.time_limit_s` overall.
///
/// The heuristic is a dynamic program over hourly-constant power on the
/// linear cell, completed into a feasible model solution by a small MILP with
/// the hourly decisions fixed. Backends that ignore starting points still
/// work, they only lose the head start.
pub fn solve_physics(
    params: &CellParams,
    prices: &PriceSeries,
    cfg: &PhysicsConfig,
    backend: &dyn SolverBackend,
    options: &SolveOptions,
    warm_start: bool,
) -> Result<PhysicsOutcome, SolveError> {
    let started = Instant::now();
    let state0 = ReducedState::at_soc(params, 1.0);
    let cell = LinearCell::new(params, cfg, &state0)?;
    let model = build_with_cell(params, prices, cfg, &cell)?;

    let mut report = None;
    let mut options = options.clone();
    if warm_start && options.initial.is_none() {
        let dp = dynamic_programming(&cell, prices, params, &DpOptions::default());
        let budget = (0.25 * options.time_limit_s).clamp(1.0, 30.0);
        let incumbent = restricted_incumbent(&model, &dp.hourly_power, backend, budget, options.gap);
        let mut r = WarmStartReport {
            dp_value: dp.value,
            dp_time_s: dp.time_s,
            hourly_power: dp.hourly_power,
            incumbent_objective: None,
            restricted_time_s: 0.0,
        };
        if let Some((values, objective, time_s)) = incumbent {
            r.incumbent_objective = Some(objective);
            r.restricted_time_s = time_s;
            options.initial = Some(values);
        }
        tracing::info!(dp_value = r.dp_value, incumbent = ?r.incumbent_objective, "warm start ready");
        report = Some(r);
    }
    options.time_limit_s = (options.time_limit_s - started.elapsed().as_secs_f64()).max(1.0);
    let solution = backend.solve(&model, &options)?;
    if solution.status == SolveStatus::Infeasible {
        return Err(SolveError::Infeasible);
    }
    let mut schedule = extract_schedule(&model, &solution);
    schedule.solve_time_s = started.elapsed().as_secs_f64();
    Ok(PhysicsOutcome {
        model,
        schedule,
        warm_start: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve, HighsBackend};
    use crate::test_support::reference_params;

    fn full(params: &CellParams) -> ReducedState {
        ReducedState::at_soc(params, 1.0)
    }

    #[test]
    fn default_dimensions() {
        let p = reference_params();
        let prices = PriceSeries::day_ahead(vec![50.0; 24]).unwrap();
        let model = build_physics_based(&p, &prices, &PhysicsConfig::default(), &full(&p)).unwrap();
        model.validate().unwrap();
        let d = model.dimensions();
        assert_eq!(d.binary, 24 + 120 * (2 + 2 * 5));
        assert_eq!(d.constraints, 48 + 120 * 62);
        assert_eq!(d.continuous, 72 + 120 * 40);
    }

    #[test]
    fn narrow_domain_is_reported() {
        let p = reference_params();
        let prices = PriceSeries::new(vec![1.0]).unwrap();
        let cfg = PhysicsConfig {
            ocp_domain_pos: Some((0.4, 0.6)),
            ..PhysicsConfig::default()
        };
        let err = build_physics_based(&p, &prices, &cfg, &full(&p)).unwrap_err();
        assert!(matches!(err, ModelError::PwlDomain { .. }), "{err}");
    }

    #[test]
    fn start_outside_window_is_rejected() {
        let p = reference_params();
        let prices = PriceSeries::new(vec![1.0]).unwrap();
        let empty = ReducedState::at_soc(&p, 0.0);
        assert!(build_physics_based(&p, &prices, &PhysicsConfig::default(), &empty).is_err());
    }

    #[test]
    fn zero_prices_keep_the_battery_idle() {
        let p = reference_params();
        let prices = PriceSeries::new(vec![0.0; 3]).unwrap();
        let model = build_physics_based(&p, &prices, &PhysicsConfig::default(), &full(&p)).unwrap();
        let s = solve(&model, &HighsBackend::default(), 1e-6, 60.0).unwrap();
        assert!(s.objective.abs() < 1e-6, "{}", s.objective);
    }

    #[test]
    fn selling_at_a_high_price_discharges() {
        let p = reference_params();
        let prices = PriceSeries::new(vec![200.0, 0.0]).unwrap();
        let model = build_physics_based(&p, &prices, &PhysicsConfig::default(), &full(&p)).unwrap();
        let s = solve(&model, &HighsBackend::default(), 1e-6, 60.0).unwrap();
        assert!(s.objective > 0.0);
        assert!(s.power[0].iter().all(|&x| x > 0.0));
        let (worst, row) = model.max_violation(&s.values);
        assert!(worst <= 1e-6, "{worst} at {row:?}");
        let spread = s.power[0].iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - s.power[0].iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(spread <= 0.01 * p.p_max_dis + 1e-9);
    }

    #[test]
    fn linear_cell_power_inversion() {
        let p = reference_params();
        let cell = LinearCell::new(&p, &PhysicsConfig::default(), &full(&p)).unwrap();
        let x = 0.6;
        let point = cell.current_for_power(10.0, x).unwrap();
        assert!((point.current * point.voltage - 10.0).abs() < 1e-8);
        assert!(point.next_neg < x);
        let charge = cell.current_for_power(-10.0, x).unwrap();
        assert!(charge.current < 0.0 && charge.voltage > point.voltage);
        assert!(cell.current_for_power(1e4, x).is_none());
    }
}
