//! Piecewise-linear and first-order approximations used by the MILP.
//!
//! Three nonlinearities of the cell model are replaced here: the open-circuit
//! potentials (piecewise-linear fits of the tabulated curves), the
//! Butler-Volmer overpotential (a linear law in the flux), and the product
//! `v * i` in the power equation, which is rewritten as a difference of two
//! squares whose squares are in turn approximated by chords.

use serde::{Deserialize, Serialize};

use crate::error::PwlError;
use crate::params::{CellParams, Electrode, OcpCurve};

/// Continuous piecewise-linear function given by its breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, PwlError> {
        if breakpoints.len() != values.len() {
            return Err(PwlError::Length {
                breakpoints: breakpoints.len(),
                values: values.len(),
            });
        }
        if breakpoints.len() < 2 {
            return Err(PwlError::NoSegments);
        }
        let finite = breakpoints.iter().chain(&values).all(|v| v.is_finite());
        if !finite || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PwlError::Breakpoints);
        }
        Ok(PiecewiseLinearFn { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_seg(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], self.breakpoints[self.n_seg()])
    }

    /// Evaluates the interpolant; exact at breakpoints.
    pub fn eval(&self, x: f64) -> Result<f64, PwlError> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return Err(PwlError::OutOfDomain { x, lo, hi });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluates the interpolant, extending the end segments linearly.
    pub fn eval_extended(&self, x: f64) -> f64 {
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let n = self.n_seg();
        let k = (self.breakpoints.partition_point(|&b| b <= x)).clamp(1, n);
        let (x0, x1) = (self.breakpoints[k - 1], self.breakpoints[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        if x == x0 {
            return y0;
        }
        if x == x1 {
            return y1;
        }
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }

    /// Slope of every segment.
    pub fn slopes(&self) -> Vec<f64> {
        self.breakpoints
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect()
    }
}

/// Result of [`fit_pwl`].
#[derive(Debug, Clone, PartialEq)]
pub struct PwlFit {
    pub pwl: PiecewiseLinearFn,
    /// Largest absolute deviation from the tabulated curve on the domain.
    pub max_error: f64,
}

/// Fits `n_seg` segments to a tabulated curve on `[lo, hi]`.
///
/// Breakpoints are drawn from the domain ends and the tabulated points inside
/// it, chosen to minimize the largest deviation by dynamic programming. When
/// fewer segments fit at least as well, the widest segments are split at their
/// midpoints, which leaves the interpolant unchanged, so the result always has
/// exactly `n_seg` segments and its error never grows with `n_seg`. Because
/// the tabulated curve is itself piecewise linear, the reported error is exact.
pub fn fit_pwl(curve: &OcpCurve, n_seg: usize, domain: (f64, f64)) -> Result<PwlFit, PwlError> {
    if n_seg == 0 {
        return Err(PwlError::NoSegments);
    }
    let (lo, hi) = domain;
    let (table_lo, table_hi) = curve.domain();
    if !(lo < hi && lo >= table_lo && hi <= table_hi) {
        return Err(PwlError::Domain {
            lo,
            hi,
            table_lo,
            table_hi,
        });
    }
    let mut xs: Vec<f64> = vec![lo];
    xs.extend(curve.stoichiometries().iter().copied().filter(|&x| x > lo && x < hi));
    xs.push(hi);
    let ys: Vec<f64> = xs.iter().map(|&x| curve.eval_clamped(x)).collect();
    let n = xs.len();

    // chord[a][b]: largest deviation of the chord from point a to point b.
    let mut chord = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let slope = (ys[b] - ys[a]) / (xs[b] - xs[a]);
            chord[a][b] = (a + 1..b)
                .map(|k| (ys[a] + slope * (xs[k] - xs[a]) - ys[k]).abs())
                .fold(0.0, f64::max);
        }
    }
    // best[s][j]: smallest worst-case error covering points 0..=j with s segments.
    let max_seg = n_seg.min(n - 1);
    let mut best = vec![vec![f64::INFINITY; n]; max_seg + 1];
    let mut from = vec![vec![0usize; n]; max_seg + 1];
    best[0][0] = 0.0;
    for s in 1..=max_seg {
        for j in s..n {
            for i in s - 1..j {
                let e = best[s - 1][i].max(chord[i][j]);
                if e < best[s][j] {
                    best[s][j] = e;
                    from[s][j] = i;
                }
            }
        }
    }
    let segments = (1..=max_seg)
        .min_by(|&a, &b| best[a][n - 1].total_cmp(&best[b][n - 1]).then(b.cmp(&a)))
        .expect("at least one segment");
    let mut chosen = vec![n - 1];
    let mut j = n - 1;
    for s in (1..=segments).rev() {
        j = from[s][j];
        chosen.push(j);
    }
    chosen.reverse();
    let mut bp: Vec<f64> = chosen.iter().map(|&k| xs[k]).collect();
    let mut values: Vec<f64> = chosen.iter().map(|&k| ys[k]).collect();
    while bp.len() - 1 < n_seg {
        let k = bp
            .windows(2)
            .enumerate()
            .max_by(|a, b| (a.1[1] - a.1[0]).total_cmp(&(b.1[1] - b.1[0])))
            .map(|(k, _)| k)
            .expect("at least one segment");
        bp.insert(k + 1, 0.5 * (bp[k] + bp[k + 1]));
        values.insert(k + 1, 0.5 * (values[k] + values[k + 1]));
    }
    let pwl = PiecewiseLinearFn::new(bp, values)?;
    let max_error = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (pwl.eval_unchecked(x) - y).abs())
        .fold(0.0, f64::max);
    Ok(PwlFit { pwl, max_error })
}

/// Linear overpotential `R T J / A` (V).
pub fn linear_eta(flux: f64, which: Electrode, params: &CellParams) -> f64 {
    params.gas_constant * params.temperature * flux / params.bv_constant(which)
}

/// Splits `v * i` into `y1^2 - y2^2` with `y1 = (v + i) / 2` and `y2 = (v - i) / 2`.
pub fn power_split_identity(v: f64, i: f64) -> (f64, f64) {
    (0.5 * (v + i), 0.5 * (v - i))
}

/// Chord interpolant of `x^2` on `n_seg` uniform segments of `[lo, hi]`.
/// It never under-estimates the square; the gap peaks at segment midpoints,
/// see [`square_chord_error`].
pub fn pwl_square(domain: (f64, f64), n_seg: usize) -> Result<PiecewiseLinearFn, PwlError> {
    if n_seg == 0 {
        return Err(PwlError::NoSegments);
    }
    let (lo, hi) = domain;
    let dx = (hi - lo) / n_seg as f64;
    let xs: Vec<f64> = (0..=n_seg)
        .map(|k| if k == n_seg { hi } else { lo + k as f64 * dx })
        .collect();
    let ys = xs.iter().map(|x| x * x).collect();
    PiecewiseLinearFn::new(xs, ys)
}

/// Worst-case deviation of a chord from a function with `|f''| <= curvature`
/// over a segment of width `dx`.
pub fn chord_error_bound(curvature: f64, dx: f64) -> f64 {
    curvature * dx * dx / 8.0
}

/// Worst-case over-estimate of a chord of `x^2` over a segment of width `dx`.
pub fn square_chord_error(dx: f64) -> f64 {
    chord_error_bound(2.0, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::reference_params;

    fn dense_max_error(f: impl Fn(f64) -> f64, pwl: &PiecewiseLinearFn, n: usize) -> f64 {
        let (lo, hi) = pwl.domain();
        (0..=n)
            .map(|k| lo + (hi - lo) * k as f64 / n as f64)
            .map(|x| (pwl.eval(x).unwrap() - f(x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn affine_curves_are_fitted_exactly() {
        let pts: Vec<[f64; 2]> = (0..=20).map(|k| [k as f64 / 20.0, 3.0 - 2.0 * k as f64 / 20.0]).collect();
        let curve = OcpCurve::new(&pts).unwrap();
        for n in 1..5 {
            let fit = fit_pwl(&curve, n, (0.1, 0.9)).unwrap();
            assert_eq!(fit.pwl.n_seg(), n);
            assert!(fit.max_error < 1e-12);
        }
    }

    #[test]
    fn fit_error_does_not_grow_with_segments() {
        let p = reference_params();
        let mut last = f64::INFINITY;
        for n in 1..8 {
            let fit = fit_pwl(&p.pos.ocp, n, (0.2, 0.85)).unwrap();
            assert!(fit.max_error <= last + 1e-15);
            last = fit.max_error;
        }
    }

    #[test]
    fn domain_outside_table_is_rejected() {
        let p = reference_params();
        assert!(matches!(fit_pwl(&p.pos.ocp, 2, (0.0, 0.5)), Err(PwlError::Domain { .. })));
    }

    #[test]
    fn single_negative_segment_over_operating_window() {
        let p = reference_params();
        let lo = p.neg_floor_concentration() / p.neg.c_max;
        let hi = p.neg.c_full / p.neg.c_max;
        let fit = fit_pwl(&p.neg.ocp, 1, (lo, hi)).unwrap();
        assert_eq!(fit.pwl.n_seg(), 1);
        assert_eq!(fit.pwl.eval(lo).unwrap(), p.neg.ocp.eval_clamped(lo));
        assert!(fit.pwl.slopes()[0] < 0.0);
    }

    #[test]
    fn square_on_unit_interval_with_four_segments() {
        let pwl = pwl_square((0.0, 1.0), 4).unwrap();
        let err = dense_max_error(|x| x * x, &pwl, 4000);
        assert!((err - 1.0 / 64.0).abs() < 1e-9, "{err}");
    }

    #[test]
    fn square_single_chord() {
        let pwl = pwl_square((0.0, 1.0), 1).unwrap();
        assert_eq!(pwl.eval(0.5).unwrap(), 0.5);
        let err = dense_max_error(|x| x * x, &pwl, 1000);
        assert!((err - square_chord_error(1.0)).abs() < 1e-12);
    }

    #[test]
    fn square_on_wider_interval_meets_the_chord_bound() {
        let pwl = pwl_square((0.0, 4.0), 8).unwrap();
        let err = dense_max_error(|x| x * x, &pwl, 8000);
        assert!((err - square_chord_error(0.5)).abs() < 1e-9, "{err}");
        assert!((square_chord_error(0.5) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn square_is_exact_at_breakpoints() {
        let pwl = pwl_square((-1.25, 4.6), 6).unwrap();
        for &b in pwl.breakpoints() {
            assert_eq!(pwl.eval(b).unwrap(), b * b);
        }
    }

    #[test]
    fn linear_eta_is_linear() {
        let p = reference_params();
        assert_eq!(linear_eta(0.0, Electrode::Negative, &p), 0.0);
        let a = linear_eta(1e-5, Electrode::Positive, &p);
        let b = linear_eta(2e-5, Electrode::Positive, &p);
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn power_split_examples() {
        let (y1, y2) = power_split_identity(3.6, 2.0);
        assert!((y1 - 2.8).abs() < 1e-15 && (y2 - 0.8).abs() < 1e-15);
        assert!((y1 * y1 - y2 * y2 - 7.2).abs() < 1e-12);
        let (y1, y2) = power_split_identity(3.0, 0.0);
        assert_eq!(y1, y2);
        let (y1, y2) = power_split_identity(0.0, 2.0);
        assert_eq!(y1, -y2);
    }
}
