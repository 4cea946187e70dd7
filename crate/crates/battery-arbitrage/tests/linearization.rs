//! Properties of the piecewise-linear pieces and linear relations the
//! physics-based model is assembled from.

use battery_arbitrage::linearize::{
    chord_error_bound, fit_pwl, linear_eta, power_split_identity, pwl_square, square_chord_error, PiecewiseLinearFn,
};
use battery_arbitrage::params::{CellParams, Electrode};
use battery_arbitrage::spm::butler_volmer_eta;
use proptest::prelude::*;

fn dense_max_error(f: impl Fn(f64) -> f64, pwl: &PiecewiseLinearFn, n: usize) -> f64 {
    let (lo, hi) = pwl.domain();
    (0..=n)
        .map(|k| (lo + (hi - lo) * k as f64 / n as f64).min(hi))
        .map(|x| (pwl.eval(x).unwrap() - f(x)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn product_splits_into_a_difference_of_squares(v in -5.0f64..5.0, i in -10.0f64..10.0) {
        let (y1, y2) = power_split_identity(v, i);
        let scale = 1.0 + v.abs().max(i.abs()).powi(2);
        prop_assert!((y1 * y1 - y2 * y2 - v * i).abs() <= 1e-14 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn square_chords_over_estimate_within_the_bound(
        lo in -10.0f64..10.0,
        width in 0.01f64..20.0,
        n_seg in 1usize..40,
    ) {
        let pwl = pwl_square((lo, lo + width), n_seg).unwrap();
        prop_assert_eq!(pwl.n_seg(), n_seg);
        let bound = square_chord_error(width / n_seg as f64);
        let (a, b) = pwl.domain();
        let mut worst: f64 = 0.0;
        for k in 0..=2000 {
            let x = (a + (b - a) * k as f64 / 2000.0).min(b);
            let gap = pwl.eval(x).unwrap() - x * x;
            prop_assert!(gap >= -1e-12 * (1.0 + x * x));
            worst = worst.max(gap);
        }
        prop_assert!(worst <= bound * (1.0 + 1e-9) + 1e-12);
        // The bound is attained at segment midpoints.
        let xs = pwl.breakpoints();
        let mid = 0.5 * (xs[0] + xs[1]);
        let at_mid = pwl.eval(mid).unwrap() - mid * mid;
        prop_assert!((at_mid - bound).abs() <= 1e-9 * (1.0 + bound));
    }

    #[test]
    fn chords_of_smooth_functions_meet_the_curvature_bound(
        lo in 0.0f64..2.0,
        width in 0.1f64..3.0,
        n_seg in 1usize..12,
    ) {
        let hi = lo + width;
        let xs: Vec<f64> = (0..=n_seg).map(|k| lo + width * k as f64 / n_seg as f64).collect();
        let ys = xs.iter().map(|x| x.powi(3)).collect();
        let pwl = PiecewiseLinearFn::new(xs, ys).unwrap();
        let bound = chord_error_bound(6.0 * hi, width / n_seg as f64);
        prop_assert!(dense_max_error(|x| x.powi(3), &pwl, 3000) <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn more_segments_never_fit_worse(n_seg in 1usize..8, shrink in 0.0f64..0.3) {
        let p = CellParams::reference();
        let (a, b) = p.pos.ocp.domain();
        let domain = (a + shrink * (b - a) * 0.5, b - shrink * (b - a) * 0.5);
        let coarse = fit_pwl(&p.pos.ocp, n_seg, domain).unwrap();
        let fine = fit_pwl(&p.pos.ocp, n_seg + 1, domain).unwrap();
        prop_assert_eq!(coarse.pwl.n_seg(), n_seg);
        prop_assert_eq!(fine.pwl.n_seg(), n_seg + 1);
        prop_assert!(fine.max_error <= coarse.max_error + 1e-12);
        prop_assert_eq!(fine.pwl.domain(), domain);
        let measured = dense_max_error(|x| p.pos.ocp.eval(x).unwrap(), &coarse.pwl, 4000);
        prop_assert!(measured <= coarse.max_error + 1e-9);
    }

    #[test]
    fn linear_overpotential_is_the_rated_current_secant(frac in -1.0f64..1.0) {
        let p = CellParams::reference();
        for which in [Electrode::Negative, Electrode::Positive] {
            let c = 0.5 * p.electrode(which).c_max;
            let exact = |f: f64| butler_volmer_eta(p.molar_flux(f * p.i_max, which), c, which, &p).unwrap();
            let linear = |f: f64| linear_eta(p.molar_flux(f * p.i_max, which), which, &p);
            for end in [-1.0, 1.0] {
                prop_assert!((linear(end) - exact(end)).abs() <= 1e-12);
            }
            // Below the rating the concave exact law lies outside the secant.
            prop_assert!(linear(frac).abs() <= exact(frac).abs() + 1e-12);
            prop_assert!(linear(frac) * exact(frac) >= 0.0);
        }
    }
}
