//! Checks of the particle simulator against exact balances and against the
//! two-parameter reduced model.

use battery_arbitrage::calibrate::round_trip_efficiency;
use battery_arbitrage::params::{CellParams, Electrode, OcpCurve};
use battery_arbitrage::reduced::{surf_from_avg, ReducedState};
use battery_arbitrage::spm::{butler_volmer_eta, Particle, Setpoint, Simulator, DEFAULT_SHELLS};
use proptest::prelude::*;

fn params() -> CellParams {
    CellParams::reference()
}

/// Terminal voltage implied by reduced-model surface concentrations.
fn reduced_voltage(p: &CellParams, s: &ReducedState, i_app: f64) -> f64 {
    let phi = |which: Electrode, c_surf: f64| {
        let e = p.electrode(which);
        let eta = butler_volmer_eta(p.molar_flux(i_app, which), c_surf, which, p).unwrap();
        e.ocp.eval_clamped(c_surf / e.c_max) + eta
    };
    phi(Electrode::Positive, s.c_surf_pos) - phi(Electrode::Negative, s.c_surf_neg)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lithium_is_conserved_without_surface_flux(
        profile in prop::collection::vec(5_000.0f64..25_000.0, 4..40),
        dt in 1.0f64..600.0,
    ) {
        let p = params();
        let mut particle = Particle::from_profile(&p.neg, Electrode::Negative, profile);
        let before = particle.total_lithium();
        particle.advance(0.0, dt).unwrap();
        let after = particle.total_lithium();
        prop_assert!(((after - before) / before).abs() <= 1e-10, "{before} -> {after}");
    }

    #[test]
    fn lithium_changes_by_the_surface_flux(
        soc in 0.2f64..0.9,
        c_rate in -1.0f64..1.0,
        dt in 1.0f64..120.0,
    ) {
        let p = params();
        for which in [Electrode::Negative, Electrode::Positive] {
            let e = p.electrode(which);
            let mut particle = Particle::uniform(e, which, DEFAULT_SHELLS, e.concentration_at_soc(soc));
            let flux = p.molar_flux(c_rate * p.i_max, which);
            let before = particle.total_lithium();
            particle.advance(flux, dt).unwrap();
            let expected = before - flux * e.radius * e.radius * dt;
            let after = particle.total_lithium();
            prop_assert!(((after - expected) / before).abs() <= 1e-10, "{which}: {after} vs {expected}");
        }
    }

    #[test]
    fn reduced_model_tracks_the_particle_model(
        soc in 0.55f64..0.95,
        c_rate in 0.2f64..1.0,
        minutes in 10usize..25,
    ) {
        let p = params();
        let i_app = c_rate * p.i_max;
        let horizon = 60.0 * minutes as f64;
        let mut sim = Simulator::new(&p, soc, DEFAULT_SHELLS);
        let mut last = None;
        while sim.time() < horizon {
            last = Some(sim.step(Setpoint::Current(i_app), 10.0, true).unwrap().0);
        }
        // State at the start of the last step, held at the same current.
        let spm = last.unwrap();
        let elapsed = spm.t_s;
        let start = ReducedState::at_soc(&p, soc);
        let avg = start.step(&p, i_app, elapsed);
        let reduced = ReducedState {
            c_surf_neg: surf_from_avg(avg.c_avg_neg, p.molar_flux(i_app, Electrode::Negative), &p.neg),
            c_surf_pos: surf_from_avg(avg.c_avg_pos, p.molar_flux(i_app, Electrode::Positive), &p.pos),
            ..avg
        };
        let v = reduced_voltage(&p, &reduced, i_app);
        prop_assert!(((v - spm.v_cell) / spm.v_cell).abs() <= 0.02, "reduced {v} V, particle {} V", spm.v_cell);
        for (r, s, which) in [
            (reduced.c_surf_neg, spm.c_surf_neg, Electrode::Negative),
            (reduced.c_surf_pos, spm.c_surf_pos, Electrode::Positive),
        ] {
            let c_max = p.electrode(which).c_max;
            prop_assert!(((r - s) / c_max).abs() <= 0.02, "{which}: reduced {r}, particle {s}");
        }
    }

    #[test]
    fn idle_cell_keeps_its_voltage(soc in 0.1f64..1.0, steps in 1usize..50) {
        let p = params();
        let mut sim = Simulator::new(&p, soc, DEFAULT_SHELLS);
        let v0 = sim.voltage_at(0.0);
        for _ in 0..steps {
            sim.step(Setpoint::Power(0.0), 10.0, true).unwrap();
        }
        prop_assert!((sim.voltage_at(0.0) - v0).abs() <= 1e-9);
    }
}

/// Cell with flat potentials and near-ideal kinetics, so that power and
/// current protocols map onto each other symmetrically.
fn flat_cell() -> CellParams {
    let mut p = params();
    for (e, potential) in [(&mut p.neg, 0.1), (&mut p.pos, 3.9)] {
        e.ocp = OcpCurve::new(&[[0.0, potential], [1.0, potential]]).unwrap();
        e.rate_constant *= 1e9;
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reversed_power_protocols_mirror_the_state_of_charge(
        powers in prop::collection::vec(-0.15f64..0.15, 1..6),
    ) {
        let p = flat_cell();
        let run = |sign: f64| {
            let mut sim = Simulator::new(&p, 0.5, DEFAULT_SHELLS);
            let mut soc = Vec::new();
            for &mw in &powers {
                for _ in 0..30 {
                    soc.push(sim.step(Setpoint::Power(sign * mw * 1e6), 10.0, false).unwrap().0.soc);
                }
            }
            soc
        };
        let (up, down) = (run(1.0), run(-1.0));
        let start = 0.5;
        for (a, b) in up.iter().zip(&down) {
            prop_assert!(((a - start) + (b - start)).abs() <= 1e-8, "{a} and {b} around {start}");
        }
    }

    #[test]
    fn reported_steps_satisfy_the_voltage_and_power_identities(
        soc in 0.2f64..0.9,
        c_rate in -1.0f64..1.0,
    ) {
        let p = params();
        let mut sim = Simulator::new(&p, soc, DEFAULT_SHELLS);
        for _ in 0..20 {
            let (s, _) = sim.step(Setpoint::Current(c_rate * p.i_max), 10.0, false).unwrap();
            prop_assert_eq!(s.v_cell, s.phi_pos - s.phi_neg);
            prop_assert_eq!(s.p_cell, f64::from(p.n_cells) * s.i_app * s.v_cell);
        }
    }

    #[test]
    fn reduced_averages_telescope(currents in prop::collection::vec(-1.0f64..1.0, 1..30), tau in 60.0f64..900.0) {
        let p = params();
        let start = ReducedState::at_soc(&p, 0.5);
        let mut state = start;
        for &c in &currents {
            state = state.step(&p, c * p.i_max, tau);
        }
        for (which, first, last) in [
            (Electrode::Negative, start.c_avg_neg, state.c_avg_neg),
            (Electrode::Positive, start.c_avg_pos, state.c_avg_pos),
        ] {
            let e = p.electrode(which);
            let total: f64 = currents.iter().map(|c| p.molar_flux(c * p.i_max, which) * tau).sum();
            let expected = first - 3.0 * total / e.radius;
            prop_assert!((last - expected).abs() <= 1e-9 * e.c_max, "{which}: {last} vs {expected}");
        }
    }
}

#[test]
fn efficiency_at_1c_is_about_ninety_percent() {
    let e = round_trip_efficiency(&params(), 1.0).unwrap();
    assert!((e.eta - 0.90).abs() <= 0.02, "{}", e.eta);
}

#[test]
fn slower_cycles_lose_less_energy() {
    let p = params();
    let slow = round_trip_efficiency(&p, 0.5).unwrap();
    let fast = round_trip_efficiency(&p, 1.0).unwrap();
    assert!(slow.eta > fast.eta, "{} vs {}", slow.eta, fast.eta);
    assert!(slow.eta < 1.0);
}

#[test]
fn fast_kinetics_with_flat_potentials_are_lossless() {
    let e = round_trip_efficiency(&flat_cell(), 1.0).unwrap();
    assert!((e.eta - 1.0).abs() <= 1e-6, "{}", e.eta);
}
