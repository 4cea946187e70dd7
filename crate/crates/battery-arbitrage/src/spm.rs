//! Nonlinear single-particle model used as the reference simulator.
//!
//! Each electrode is a sphere whose radial lithium profile follows Fick's law
//! in spherical coordinates, discretized with a conservative finite-volume
//! scheme on uniform shells and advanced with explicit Euler sub-steps that
//! respect the scheme's stability limit. The surface reaction follows
//! Butler-Volmer kinetics and the terminal voltage is the difference of the
//! two electrode potentials. Current is positive on discharge.

use std::io::Write;

use serde::Serialize;

use crate::error::SpmError;
use crate::params::{CellParams, Electrode, ElectrodeParams};

/// Default number of radial shells per particle.
pub const DEFAULT_SHELLS: usize = 30;

/// Fraction of the explicit stability limit used for automatic sub-stepping.
const STABILITY_SAFETY: f64 = 0.9;

/// Molar flux (mol/(m^2 s)) through the particle surface for cell current
/// `i_app` (A). Positive flux removes lithium from the particle.
pub fn molar_flux(params: &CellParams, i_app: f64, which: Electrode) -> f64 {
    params.molar_flux(i_app, which)
}

/// Exact Butler-Volmer overpotential (V) for a given flux and surface
/// concentration.
pub fn butler_volmer_eta(
    flux: f64,
    c_surf: f64,
    which: Electrode,
    params: &CellParams,
) -> Result<f64, SpmError> {
    let e = params.electrode(which);
    if !(c_surf > 0.0 && c_surf < e.c_max) {
        return Err(SpmError::Kinetics {
            electrode: which,
            value: c_surf,
        });
    }
    let j0 = e.exchange_current_density(c_surf, params.electrolyte_conc);
    Ok(2.0 * params.thermal_voltage() * (params.faraday * flux / (2.0 * j0)).asinh())
}

/// Radial concentration profile of one spherical particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    which: Electrode,
    radius: f64,
    diffusivity: f64,
    c_max: f64,
    dr: f64,
    c: Vec<f64>,
    /// Shell volumes per steradian, `(r_out^3 - r_in^3) / 3`.
    volume: Vec<f64>,
}

impl Particle {
    /// Particle with a uniform profile at concentration `c0`.
    pub fn uniform(e: &ElectrodeParams, which: Electrode, n_shells: usize, c0: f64) -> Self {
        Self::from_profile(e, which, vec![c0; n_shells.max(1)])
    }

    /// Particle with an arbitrary shell-averaged profile, innermost shell first.
    pub fn from_profile(e: &ElectrodeParams, which: Electrode, profile: Vec<f64>) -> Self {
        let n = profile.len();
        let dr = e.radius / n as f64;
        let volume = (0..n)
            .map(|k| {
                let (r0, r1) = (k as f64 * dr, (k + 1) as f64 * dr);
                (r1.powi(3) - r0.powi(3)) / 3.0
            })
            .collect();
        Particle {
            which,
            radius: e.radius,
            diffusivity: e.diffusivity,
            c_max: e.c_max,
            dr,
            c: profile,
            volume,
        }
    }

    pub fn electrode(&self) -> Electrode {
        self.which
    }

    /// Shell-averaged concentrations (mol/m^3), innermost first.
    pub fn profile(&self) -> &[f64] {
        &self.c
    }

    /// Total lithium per steradian (mol/sr), `sum c r^2 dr`.
    pub fn total_lithium(&self) -> f64 {
        self.c.iter().zip(&self.volume).map(|(c, v)| c * v).sum()
    }

    /// Volume-averaged concentration (mol/m^3).
    pub fn average(&self) -> f64 {
        self.total_lithium() / (self.radius.powi(3) / 3.0)
    }

    /// Surface concentration extrapolated from the outer shell with the
    /// boundary gradient imposed by `flux`.
    pub fn surface(&self, flux: f64) -> f64 {
        self.c[self.c.len() - 1] - flux * 0.5 * self.dr / self.diffusivity
    }

    /// Largest stable explicit step (s).
    pub fn stability_limit(&self) -> f64 {
        let n = self.c.len();
        (0..n)
            .map(|k| {
                let inner = (k as f64 * self.dr).powi(2);
                let outer = if k + 1 < n { ((k + 1) as f64 * self.dr).powi(2) } else { 0.0 };
                let coupling = self.diffusivity * (inner + outer) / self.dr;
                if coupling > 0.0 { self.volume[k] / coupling } else { f64::INFINITY }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// One explicit step of length `dt` under a constant surface flux.
    pub fn step(&mut self, flux: f64, dt: f64) -> Result<(), SpmError> {
        let limit = self.stability_limit();
        if !(dt > 0.0) || dt > limit {
            return Err(SpmError::Stability {
                electrode: self.which,
                dt,
                limit,
            });
        }
        let n = self.c.len();
        // Outward flow through each face per steradian; face k sits at r = k dr.
        let mut outward = vec![0.0; n + 1];
        for (k, flow) in outward.iter_mut().enumerate().take(n).skip(1) {
            let r = k as f64 * self.dr;
            *flow = -self.diffusivity * (self.c[k] - self.c[k - 1]) / self.dr * r * r;
        }
        outward[n] = flux * self.radius * self.radius;
        for k in 0..n {
            self.c[k] += dt * (outward[k] - outward[k + 1]) / self.volume[k];
        }
        for (shell, &value) in self.c.iter().enumerate() {
            if !(0.0..=self.c_max).contains(&value) {
                return Err(SpmError::Concentration {
                    electrode: self.which,
                    shell,
                    value,
                    c_max: self.c_max,
                });
            }
        }
        Ok(())
    }

    /// Advances by `dt` with as many equal stable sub-steps as needed.
    pub fn advance(&mut self, flux: f64, dt: f64) -> Result<(), SpmError> {
        let h = STABILITY_SAFETY * self.stability_limit();
        let n = (dt / h).ceil().max(1.0) as usize;
        let sub = dt / n as f64;
        for _ in 0..n {
            self.step(flux, sub)?;
        }
        Ok(())
    }
}

/// Per-step violation tags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Violations {
    /// Terminal voltage outside `[v_min, v_max]`.
    pub voltage: bool,
    /// Applied current magnitude above `i_max`.
    pub current: bool,
    /// Requested power not reachable within `[-i_max, i_max]`.
    pub unreachable: bool,
    /// A surface stoichiometry outside its tabulated OCP window.
    pub ocp_range: bool,
    /// Negative surface concentration outside the operating window between
    /// the state-of-charge floor and full charge.
    pub soc_window: bool,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.voltage || self.current || self.unreachable || self.ocp_range || self.soc_window
    }

    /// Semicolon-joined tag list, empty when clean.
    pub fn tags(&self) -> String {
        let mut tags = Vec::new();
        for (on, tag) in [
            (self.voltage, "voltage"),
            (self.current, "current"),
            (self.unreachable, "unreachable"),
            (self.ocp_range, "ocp_range"),
            (self.soc_window, "soc_window"),
        ] {
            if on {
                tags.push(tag);
            }
        }
        tags.join(";")
    }
}

/// Electrochemical state at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub t_s: f64,
    pub c_profile_neg: Vec<f64>,
    pub c_profile_pos: Vec<f64>,
    pub c_surf_neg: f64,
    pub c_surf_pos: f64,
    pub eta_neg: f64,
    pub eta_pos: f64,
    pub phi_neg: f64,
    pub phi_pos: f64,
    pub v_cell: f64,
    /// Cell current (A), positive on discharge.
    pub i_app: f64,
    /// Stack power (W), `n_cells * i_app * v_cell`.
    pub p_cell: f64,
    /// State of charge from the negative surface concentration, as a fraction.
    pub soc: f64,
}

/// Operating point for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setpoint {
    /// Cell current (A).
    Current(f64),
    /// Stack power (W).
    Power(f64),
}

/// Piece of a protocol held for `duration_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration_s: f64,
    pub setpoint: Setpoint,
}

/// Options of [`simulate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub n_shells: usize,
    /// Reporting step (s); diffusion sub-steps are chosen automatically.
    pub dt: f64,
    /// Reject setpoints beyond the ratings and abort when the kinetics
    /// become singular. Otherwise such steps are clamped and flagged.
    pub strict: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            n_shells: DEFAULT_SHELLS,
            dt: 10.0,
            strict: false,
        }
    }
}

/// Simulated trajectory: one state and one set of tags per step.
#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub states: Vec<CellState>,
    /// Length of each step (s).
    pub step_s: Vec<f64>,
    pub flags: Vec<Violations>,
}

impl SimTrace {
    /// Energy delivered by the stack (Wh), negative when charging.
    pub fn energy_wh(&self) -> f64 {
        self.states
            .iter()
            .zip(&self.step_s)
            .map(|(s, dt)| s.p_cell * dt / 3600.0)
            .sum()
    }

    /// Writes the trace as CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_s,i_A,v_V,p_W,soc,c_surf_n,c_surf_p,violation_flags")?;
        for (s, f) in self.states.iter().zip(&self.flags) {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.t_s,
                s.i_app,
                s.v_cell,
                s.p_cell,
                s.soc,
                s.c_surf_neg,
                s.c_surf_pos,
                f.tags()
            )?;
        }
        Ok(())
    }
}

/// Stateful simulator of one cell.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    params: &'a CellParams,
    neg: Particle,
    pos: Particle,
    t: f64,
}

/// Quasi-static terminal quantities for a candidate current.
#[derive(Debug, Clone, Copy)]
struct Terminal {
    c_surf_neg: f64,
    c_surf_pos: f64,
    eta_neg: f64,
    eta_pos: f64,
    phi_neg: f64,
    phi_pos: f64,
    v_cell: f64,
    flags: Violations,
}

impl<'a> Simulator<'a> {
    /// Starts from uniform profiles at the given state-of-charge fraction.
    pub fn new(params: &'a CellParams, initial_soc: f64, n_shells: usize) -> Self {
        let neg = Particle::uniform(
            &params.neg,
            Electrode::Negative,
            n_shells,
            params.neg.concentration_at_soc(initial_soc),
        );
        let pos = Particle::uniform(
            &params.pos,
            Electrode::Positive,
            n_shells,
            params.pos.concentration_at_soc(initial_soc),
        );
        Simulator {
            params,
            neg,
            pos,
            t: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn particle(&self, which: Electrode) -> &Particle {
        match which {
            Electrode::Negative => &self.neg,
            Electrode::Positive => &self.pos,
        }
    }

    /// Terminal voltage (V) the cell would show at current `i_app`.
    pub fn voltage_at(&self, i_app: f64) -> f64 {
        self.terminal(i_app, false).map(|t| t.v_cell).unwrap_or(f64::NAN)
    }

    fn electrode_terms(
        &self,
        i_app: f64,
        which: Electrode,
        strict: bool,
        flags: &mut Violations,
    ) -> Result<(f64, f64, f64), SpmError> {
        let p = self.params;
        let e = p.electrode(which);
        let flux = p.molar_flux(i_app, which);
        let c_surf = self.particle(which).surface(flux);
        let kinetic_c = if c_surf > 0.0 && c_surf < e.c_max {
            c_surf
        } else if strict {
            return Err(SpmError::Kinetics {
                electrode: which,
                value: c_surf,
            });
        } else {
            flags.ocp_range = true;
            c_surf.clamp(1e-9 * e.c_max, (1.0 - 1e-9) * e.c_max)
        };
        let x = kinetic_c / e.c_max;
        if !e.ocp.contains(x) {
            flags.ocp_range = true;
        }
        let eta = butler_volmer_eta(flux, kinetic_c, which, p)?;
        let phi = e.ocp.eval_clamped(x) + eta;
        Ok((c_surf, eta, phi))
    }

    fn terminal(&self, i_app: f64, strict: bool) -> Result<Terminal, SpmError> {
        let p = self.params;
        let mut flags = Violations::default();
        let (c_surf_neg, eta_neg, phi_neg) =
            self.electrode_terms(i_app, Electrode::Negative, strict, &mut flags)?;
        let (c_surf_pos, eta_pos, phi_pos) =
            self.electrode_terms(i_app, Electrode::Positive, strict, &mut flags)?;
        let v_cell = phi_pos - phi_neg;
        flags.voltage = v_cell < p.v_min || v_cell > p.v_max;
        flags.current = i_app.abs() > p.i_max;
        let (lo, hi) = (p.neg_floor_concentration(), p.neg.c_full);
        flags.soc_window = c_surf_neg < lo.min(hi) || c_surf_neg > hi.max(lo);
        Ok(Terminal {
            c_surf_neg,
            c_surf_pos,
            eta_neg,
            eta_pos,
            phi_neg,
            phi_pos,
            v_cell,
            flags,
        })
    }

    /// Current that delivers stack power `p_w` (W), found by bisection on
    /// `[-i_max, i_max]`. Returns the clamped end current and `false` when
    /// the power is out of reach.
    pub fn current_for_power(&self, p_w: f64) -> (f64, bool) {
        if p_w == 0.0 {
            return (0.0, true);
        }
        let n = f64::from(self.params.n_cells);
        let i_max = self.params.i_max;
        let residual = |i: f64| {
            let v = self.terminal(i, false).map(|t| t.v_cell).unwrap_or(f64::NAN);
            n * i * v - p_w
        };
        let (mut lo, mut hi) = (-i_max, i_max);
        let (r_lo, r_hi) = (residual(lo), residual(hi));
        if !(r_hi >= 0.0) {
            return (hi, false);
        }
        if !(r_lo <= 0.0) {
            return (lo, false);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi), true)
    }

    /// Resolves a setpoint into a current and records the state at the
    /// current time, then advances both particles by `dt`.
    pub fn step(
        &mut self,
        setpoint: Setpoint,
        dt: f64,
        strict: bool,
    ) -> Result<(CellState, Violations), SpmError> {
        let (i_app, reachable) = match setpoint {
            Setpoint::Current(i) => (i, true),
            Setpoint::Power(p) => self.current_for_power(p),
        };
        let term = self.terminal(i_app, strict)?;
        let mut flags = term.flags;
        flags.unreachable = !reachable;
        let p = self.params;
        let state = CellState {
            t_s: self.t,
            c_profile_neg: self.neg.profile().to_vec(),
            c_profile_pos: self.pos.profile().to_vec(),
            c_surf_neg: term.c_surf_neg,
            c_surf_pos: term.c_surf_pos,
            eta_neg: term.eta_neg,
            eta_pos: term.eta_pos,
            phi_neg: term.phi_neg,
            phi_pos: term.phi_pos,
            v_cell: term.v_cell,
            i_app,
            p_cell: f64::from(p.n_cells) * i_app * term.v_cell,
            soc: (term.c_surf_neg - p.neg.c_empty) / (p.neg.c_full - p.neg.c_empty),
        };
        self.neg.advance(p.molar_flux(i_app, Electrode::Negative), dt)?;
        self.pos.advance(p.molar_flux(i_app, Electrode::Positive), dt)?;
        self.t += dt;
        Ok((state, flags))
    }
}

fn check_ratings(params: &CellParams, protocol: &[Segment]) -> Result<(), SpmError> {
    let p_limit = |p: f64| {
        if p >= 0.0 { params.p_max_dis * 1e6 } else { params.p_max_ch * 1e6 }
    };
    for seg in protocol {
        if !(seg.duration_s >= 0.0 && seg.duration_s.is_finite()) {
            return Err(SpmError::Protocol(format!("invalid duration {}", seg.duration_s)));
        }
        match seg.setpoint {
            Setpoint::Current(i) if i.abs() > params.i_max * (1.0 + 1e-12) => {
                return Err(SpmError::Protocol(format!(
                    "current {i} A exceeds the rating {} A",
                    params.i_max
                )));
            }
            Setpoint::Power(p) if p.abs() > p_limit(p) * (1.0 + 1e-12) => {
                return Err(SpmError::Protocol(format!("power {p} W exceeds the stack rating")));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Simulates a protocol from uniform profiles at `initial_soc`.
pub fn simulate(
    params: &CellParams,
    protocol: &[Segment],
    initial_soc: f64,
    options: SimOptions,
) -> Result<SimTrace, SpmError> {
    if !(options.dt > 0.0) || options.n_shells == 0 {
        return Err(SpmError::Protocol("dt and n_shells must be positive".into()));
    }
    if options.strict {
        check_ratings(params, protocol)?;
    }
    let mut sim = Simulator::new(params, initial_soc, options.n_shells);
    let mut trace = SimTrace::default();
    for seg in protocol {
        let mut remaining = seg.duration_s;
        while remaining > 1e-9 * options.dt {
            let dt = remaining.min(options.dt);
            let (state, flags) = sim.step(seg.setpoint, dt, options.strict)?;
            trace.states.push(state);
            trace.flags.push(flags);
            trace.step_s.push(dt);
            remaining -= dt;
        }
    }
    Ok(trace)
}
