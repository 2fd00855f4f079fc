//! Numerical diagnostics for the solvers: empirical convergence orders and
//! time-reversal round trips.
//!
//! These live in the library (not the test tree) because the acceptance
//! suite and several unit tests share them, and because they are useful when
//! qualifying solver settings for a new configuration.

use crate::cell::solver::{integrate_fixed, SolverMethod};
use crate::cell::{CellError, CellParams};
use crate::scalar::Real;

/// Result of a step-size sweep against a tiny-step reference solution.
#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    /// Max-norm error at the horizon for each step size.
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln dt`.
    pub slope: f64,
}

/// Integrate to `horizon` at each step size in `dts` and compare against an
/// RK4 reference run at `min(dts) / 20`. Every entry of `dts` must divide
/// the horizon to machine accuracy so all runs land on the same endpoint.
pub fn convergence_study<S: Real>(
    params: &CellParams<S>,
    x0: &[S],
    input: &[S],
    method: SolverMethod,
    dts: &[f64],
    horizon: f64,
) -> Result<ConvergenceStudy, CellError> {
    assert!(!dts.is_empty());
    let dt_ref = dts.iter().cloned().fold(f64::INFINITY, f64::min) / 20.0;
    let steps_ref = (horizon / dt_ref).round() as usize;
    let reference = integrate_fixed(params, x0, input, SolverMethod::Rk4, dt_ref, steps_ref)?;

    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let steps = (horizon / dt).round() as usize;
        debug_assert!((steps as f64 * dt - horizon).abs() < 1e-9, "dt must tile the horizon");
        let x = integrate_fixed(params, x0, input, method, dt, steps)?;
        let err = x
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0f64, f64::max);
        errors.push(err);
    }

    let slope = log_log_slope(dts, &errors);
    Ok(ConvergenceStudy { dts: dts.to_vec(), errors, slope })
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.max(1e-300).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Integrate forward for `steps` of size `dt`, then backward with `-dt`, and
/// report the max-norm distance from the start state. For a well-posed flow
/// and an accurate solver this shrinks with `dt` — the executable face of
/// trajectory uniqueness.
pub fn reverse_roundtrip_error<S: Real>(
    params: &CellParams<S>,
    x0: &[S],
    input: &[S],
    method: SolverMethod,
    dt: f64,
    steps: usize,
) -> Result<f64, CellError> {
    let fwd = integrate_fixed(params, x0, input, method, dt, steps)?;
    let back = integrate_fixed(params, &fwd, input, method, -dt, steps)?;
    Ok(back
        .iter()
        .zip(x0)
        .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
        .fold(0.0f64, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{init_cell, CellKind};

    fn toy_state(d: usize) -> Vec<f64> {
        (0..d).map(|i| 0.4 * ((i + 1) as f64).sin()).collect()
    }

    #[test]
    fn euler_is_first_order_rk4_is_fourth() {
        let params: CellParams<f64> = init_cell(CellKind::Ltc, 5, 3, 31);
        let x0 = toy_state(5);
        let input = [0.3, -0.6, 0.2];

        let euler = convergence_study(
            &params,
            &x0,
            &input,
            SolverMethod::ExplicitEuler,
            &[0.02, 0.01, 0.005, 0.0025],
            0.2,
        )
        .unwrap();
        assert!(
            (euler.slope - 1.0).abs() <= 0.3,
            "Euler slope {} not within 1 ± 0.3 (errors {:?})",
            euler.slope,
            euler.errors
        );

        let rk4 = convergence_study(
            &params,
            &x0,
            &input,
            SolverMethod::Rk4,
            &[0.05, 0.025, 0.0125],
            0.2,
        )
        .unwrap();
        assert!(
            (rk4.slope - 4.0).abs() <= 0.3,
            "RK4 slope {} not within 4 ± 0.3 (errors {:?})",
            rk4.slope,
            rk4.errors
        );
    }

    #[test]
    fn rk4_round_trip_returns_to_start() {
        for seed in 0..5 {
            let params: CellParams<f64> = init_cell(CellKind::Ltc, 6, 2, seed);
            let x0 = toy_state(6);
            let err = reverse_roundtrip_error(
                &params,
                &x0,
                &[0.25, -0.5],
                SolverMethod::Rk4,
                0.01,
                100,
            )
            .unwrap();
            assert!(err < 1e-5, "seed {seed}: round trip error {err}");
        }
    }
}
