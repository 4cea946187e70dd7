//! Two-parameter reduction of particle diffusion.
//!
//! The volume-averaged concentration obeys `d c_avg / dt = -3 J / R` and the
//! surface concentration is tied to it algebraically through
//! `c_surf = c_avg - J R / (5 D)`. Both relations are affine, which is what
//! lets them enter a MILP directly.
//!
//! Over a step of length `tau` the average is integrated exactly. The surface
//! relation is evaluated with the mean of the start and end averages of the
//! step, which is the average concentration over the step itself.

use crate::params::{CellParams, Electrode, ElectrodeParams};

/// Average concentration after holding `flux` for `tau` seconds.
pub fn step_avg(c_avg_prev: f64, flux: f64, e: &ElectrodeParams, tau: f64) -> f64 {
    c_avg_prev - 3.0 * flux * tau / e.radius
}

/// Surface concentration implied by an average concentration and a flux.
pub fn surf_from_avg(c_avg: f64, flux: f64, e: &ElectrodeParams) -> f64 {
    c_avg - flux * surface_gain(e)
}

/// `R / (5 D)`, the surface offset per unit flux (s/m).
pub fn surface_gain(e: &ElectrodeParams) -> f64 {
    e.radius / (5.0 * e.diffusivity)
}

/// Average and surface concentrations of both electrodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub c_avg_neg: f64,
    pub c_avg_pos: f64,
    pub c_surf_neg: f64,
    pub c_surf_pos: f64,
}

impl ReducedState {
    /// Resting state at a state-of-charge fraction.
    pub fn at_soc(params: &CellParams, soc: f64) -> Self {
        let n = params.neg.concentration_at_soc(soc);
        let p = params.pos.concentration_at_soc(soc);
        ReducedState {
            c_avg_neg: n,
            c_avg_pos: p,
            c_surf_neg: n,
            c_surf_pos: p,
        }
    }

    /// State after holding cell current `i_app` (A) for `tau` seconds. The
    /// reported surface concentrations are those during the step.
    pub fn step(&self, params: &CellParams, i_app: f64, tau: f64) -> Self {
        let advance = |c_prev: f64, which: Electrode| {
            let e = params.electrode(which);
            let flux = params.molar_flux(i_app, which);
            let c_next = step_avg(c_prev, flux, e, tau);
            (c_next, surf_from_avg(0.5 * (c_prev + c_next), flux, e))
        };
        let (c_avg_neg, c_surf_neg) = advance(self.c_avg_neg, Electrode::Negative);
        let (c_avg_pos, c_surf_pos) = advance(self.c_avg_pos, Electrode::Positive);
        ReducedState {
            c_avg_neg,
            c_avg_pos,
            c_surf_neg,
            c_surf_pos,
        }
    }

    /// Whether the negative surface concentration lies between the
    /// state-of-charge floor and full charge.
    pub fn in_window(&self, params: &CellParams) -> bool {
        let (lo, hi) = (params.neg_floor_concentration(), params.neg.c_full);
        (lo.min(hi)..=hi.max(lo)).contains(&self.c_surf_neg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::reference_params;

    #[test]
    fn zero_flux_leaves_state_unchanged() {
        let p = reference_params();
        assert_eq!(step_avg(1234.5, 0.0, &p.neg, 720.0), 1234.5);
        assert_eq!(surf_from_avg(1234.5, 0.0, &p.neg), 1234.5);
        let s = ReducedState::at_soc(&p, 0.7);
        assert_eq!(s.step(&p, 0.0, 720.0), s);
    }

    #[test]
    fn half_steps_compose_exactly() {
        let p = reference_params();
        let j = p.molar_flux(3.0, Electrode::Negative);
        let one = step_avg(20_000.0, j, &p.neg, 720.0);
        let two = step_avg(step_avg(20_000.0, j, &p.neg, 360.0), j, &p.neg, 360.0);
        assert!((one - two).abs() <= 1e-12 * one);
    }

    #[test]
    fn surface_offset_is_linear_in_flux() {
        let p = reference_params();
        let j = p.molar_flux(2.0, Electrode::Positive);
        let d1 = 40_000.0 - surf_from_avg(40_000.0, j, &p.pos);
        let d2 = 40_000.0 - surf_from_avg(40_000.0, 2.0 * j, &p.pos);
        assert!((d2 - 2.0 * d1).abs() <= 1e-9 * d1.abs());
    }

    #[test]
    fn negative_surface_offset_at_1c_matches_hand_value() {
        let p = reference_params();
        let j = p.molar_flux(5.0, Electrode::Negative);
        // J R / (5 D) with J = 1.5424595e-5 mol/(m^2 s), R = 5.86 um, D = 3.3e-14 m^2/s.
        let offset = j * surface_gain(&p.neg);
        assert!((offset - 547.806_826).abs() < 1e-3, "{offset}");
    }

    #[test]
    fn discharge_depletes_the_negative_and_fills_the_positive() {
        let p = reference_params();
        let s0 = ReducedState::at_soc(&p, 0.8);
        let s1 = s0.step(&p, p.i_max, 720.0);
        assert!(s1.c_avg_neg < s0.c_avg_neg);
        assert!(s1.c_avg_pos > s0.c_avg_pos);
        assert!(s1.c_surf_neg < 0.5 * (s0.c_avg_neg + s1.c_avg_neg));
    }
}
