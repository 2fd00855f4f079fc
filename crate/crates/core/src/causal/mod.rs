//! Closed-form intervention coefficients for the gated leaky cell.
//!
//! For the dynamics
//!
//! ```text
//! dx_i/dt = -(1/tau_i + f_i) x_i + f_i A_i,   f = tanh(W_r x + W u + b)
//! ```
//!
//! the local linear-bilinear surrogate around an operating point `(x0, I)`
//!
//! ```text
//! dx/dt ~= A x + sum_k u_k B^k x + C u
//! ```
//!
//! has every coefficient in closed form:
//!
//! ```text
//! A[i][j]    = -d_ij (1/tau_i + f_i) + (A_i - x_i)(1 - f_i^2) Wr[i][j]
//! C[i][k]    = W[i][k] (1 - f_i^2) A_i                    (at x = 0)
//! B[i][j][k] = W[i][k] (f_i^2 - 1)(d_ij + 2 f_i (A_i - x_i) Wr[i][j])
//! ```
//!
//! `A` is the state Jacobian (how activity propagates internally), `C` the
//! input gain (which sensory channels can drive which neurons at rest), and
//! `B` the modulation of internal coupling by each input channel. All three
//! are differentiable quantities of the same right-hand side the solvers
//! integrate, so the tests here pin them against finite differences of
//! [`crate::cell::dynamics::rhs`] alone.
//!
//! In contrast, a cell whose continuous flow is autonomous admits no such
//! surrogate: its input sensitivity is identically zero between the
//! discrete input jumps, and its flow is time-reversible. The
//! [`autonomous_flow_probe`] measures both properties directly.

pub mod saliency;

use std::io::Write as IoWrite;
use std::path::Path;

use crate::cell::dynamics::rhs;
use crate::cell::solver::{integrate_fixed, SolverMethod};
use crate::cell::{CellError, CellKind, CellParams};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Drive activation at the analysis point: `f = tanh(W_r x + W I + b)`.
fn drive_at<S: Real>(params: &CellParams<S>, x: &[S], probe: &[S]) -> Vec<S> {
    let mut f = vec![S::zero(); params.state_dim];
    crate::cell::dynamics::activation_into(params, x, Some(probe), &mut f);
    f
}

/// State Jacobian of the gated leaky dynamics at `(x, probe)`.
pub fn state_jacobian<S: Real>(
    params: &CellParams<S>,
    x: &[S],
    probe: &[S],
) -> Result<Mat<S>, CellError> {
    require_ltc(params, x, probe)?;
    let d = params.state_dim;
    let f = drive_at(params, x, probe);
    let mut j = Mat::zeros(d, d);
    for i in 0..d {
        let gate = (S::one() - f[i] * f[i]) * (params.attractor[i] - x[i]);
        for jj in 0..d {
            let mut v = gate * masked_rec(params, i, jj);
            if i == jj {
                v -= S::one() / params.tau[i] + f[i];
            }
            *j.at_mut(i, jj) = v;
        }
    }
    Ok(j)
}

/// The full coefficient bundle at one operating point.
#[derive(Clone, Debug)]
pub struct InterventionCoefficients<S> {
    /// Operating state the coefficients were linearized around.
    pub x0: Vec<S>,
    /// Input probe (zero by default: the resting condition).
    pub probe: Vec<S>,
    /// `d x d` internal coupling.
    pub a: Mat<S>,
    /// `d x d x m` input-modulated coupling, flattened `(i*d + j)*m + k`.
    pub b: Vec<S>,
    /// `d x m` direct input gain, evaluated at `x = 0`.
    pub c: Mat<S>,
}

fn require_ltc<S: Real>(params: &CellParams<S>, x: &[S], probe: &[S]) -> Result<(), CellError> {
    if params.kind != CellKind::Ltc {
        return Err(CellError::Unsupported { op: "intervention coefficients", kind: params.kind });
    }
    if x.len() != params.state_dim || probe.len() != params.input_dim {
        return Err(CellError::Shape(format!(
            "operating point {}/{} vs cell {}x{}",
            x.len(),
            probe.len(),
            params.state_dim,
            params.input_dim
        )));
    }
    Ok(())
}

fn masked_rec<S: Real>(params: &CellParams<S>, i: usize, j: usize) -> S {
    let w = params.w_rec.at(i, j);
    match &params.rec_mask {
        Some(m) => w * m.at(i, j),
        None => w,
    }
}

fn masked_in<S: Real>(params: &CellParams<S>, i: usize, k: usize) -> S {
    let w = params.w_in.at(i, k);
    match &params.in_mask {
        Some(m) => w * m.at(i, k),
        None => w,
    }
}

/// Compute all three coefficient families. `x0`/`probe` default to zero
/// vectors (rest, no input).
pub fn intervention_coefficients<S: Real>(
    params: &CellParams<S>,
    x0: Option<&[S]>,
    probe: Option<&[S]>,
) -> Result<InterventionCoefficients<S>, CellError> {
    let d = params.state_dim;
    let m = params.input_dim;
    let zero_x = vec![S::zero(); d];
    let zero_u = vec![S::zero(); m];
    let x = x0.unwrap_or(&zero_x).to_vec();
    let probe = probe.unwrap_or(&zero_u).to_vec();
    require_ltc(params, &x, &probe)?;

    let a = state_jacobian(params, &x, &probe)?;

    // C at rest: x = 0 regardless of the requested operating state.
    let f0 = drive_at(params, &zero_x, &probe);
    let mut c = Mat::zeros(d, m);
    for i in 0..d {
        let gain = (S::one() - f0[i] * f0[i]) * params.attractor[i];
        for k in 0..m {
            *c.at_mut(i, k) = masked_in(params, i, k) * gain;
        }
    }

    let f = drive_at(params, &x, &probe);
    let mut b = vec![S::zero(); d * d * m];
    for i in 0..d {
        let sq = f[i] * f[i] - S::one();
        let mod_gain = S::cast(2.0) * f[i] * (params.attractor[i] - x[i]);
        for j in 0..d {
            let delta = if i == j { S::one() } else { S::zero() };
            let shape = sq * (delta + mod_gain * masked_rec(params, i, j));
            for k in 0..m {
                b[(i * d + j) * m + k] = masked_in(params, i, k) * shape;
            }
        }
    }

    Ok(InterventionCoefficients { x0: x, probe, a, b, c })
}

impl<S: Real> InterventionCoefficients<S> {
    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.c.cols()
    }

    pub fn b_at(&self, i: usize, j: usize, k: usize) -> S {
        self.b[(i * self.state_dim() + j) * self.input_dim() + k]
    }

    /// Write `a.csv` (i,j,value), `b.csv` (i,j,k,value), `c.csv`
    /// (i,k,value) into `dir`.
    pub fn export_csv(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let d = self.state_dim();
        let m = self.input_dim();

        let mut fa = std::io::BufWriter::new(std::fs::File::create(dir.join("a.csv"))?);
        writeln!(fa, "i,j,value")?;
        for i in 0..d {
            for j in 0..d {
                writeln!(fa, "{i},{j},{}", self.a.at(i, j).as_f64())?;
            }
        }
        fa.flush()?;

        let mut fb = std::io::BufWriter::new(std::fs::File::create(dir.join("b.csv"))?);
        writeln!(fb, "i,j,k,value")?;
        for i in 0..d {
            for j in 0..d {
                for k in 0..m {
                    writeln!(fb, "{i},{j},{k},{}", self.b_at(i, j, k).as_f64())?;
                }
            }
        }
        fb.flush()?;

        let mut fc = std::io::BufWriter::new(std::fs::File::create(dir.join("c.csv"))?);
        writeln!(fc, "i,k,value")?;
        for i in 0..d {
            for k in 0..m {
                writeln!(fc, "{i},{k},{}", self.c.at(i, k).as_f64())?;
            }
        }
        fc.flush()?;
        Ok(())
    }
}

/// What the autonomous-flow probe measured.
#[derive(Clone, Copy, Debug)]
pub struct AutonomousFlowReport<S> {
    /// Largest |d(dx/dt)_i / du_k| over all pairs, by central differences.
    /// Exactly zero for a flow that ignores its input.
    pub input_sensitivity: S,
    /// `|x - R_{ -T }(R_T(x))|_inf` for the reversed integration.
    pub roundtrip_error: S,
}

/// Probe a cell whose continuous flow is autonomous: between input jumps
/// its right-hand side has no input dependence at all (so no input-gain
/// surrogate exists), and the flow can be run backward in time.
pub fn autonomous_flow_probe<S: Real>(
    params: &CellParams<S>,
    x: &[S],
    horizon: f64,
    dt: f64,
) -> Result<AutonomousFlowReport<S>, CellError> {
    if params.kind != CellKind::OdeRnn {
        return Err(CellError::Unsupported { op: "autonomous flow probe", kind: params.kind });
    }
    let m = params.input_dim;
    let eps = S::cast(1e-6);
    let mut sensitivity = S::zero();
    let mut u = vec![S::zero(); m];
    for k in 0..m {
        u[k] = eps;
        let hi = rhs(params, x, &u)?;
        u[k] = -eps;
        let lo = rhs(params, x, &u)?;
        u[k] = S::zero();
        for i in 0..params.state_dim {
            let s = ((hi[i] - lo[i]) / (S::cast(2.0) * eps)).abs();
            if s > sensitivity {
                sensitivity = s;
            }
        }
    }

    let steps = (horizon / dt).round() as usize;
    let u0 = vec![S::zero(); m];
    let fwd = integrate_fixed(params, x, &u0, SolverMethod::Rk4, dt, steps)?;
    let back = integrate_fixed(params, &fwd, &u0, SolverMethod::Rk4, -dt, steps)?;
    let mut roundtrip = S::zero();
    for i in 0..params.state_dim {
        let e = (back[i] - x[i]).abs();
        if e > roundtrip {
            roundtrip = e;
        }
    }
    Ok(AutonomousFlowReport { input_sensitivity: sensitivity, roundtrip_error: roundtrip })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::init_cell;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_tol(fd: f64, an: f64, tol: f64) -> bool {
        (fd - an).abs() <= tol * fd.abs().max(an.abs()).max(1.0)
    }

    /// First-order coefficients against central differences of the raw
    /// right-hand side at random operating points.
    #[test]
    fn jacobian_and_input_gain_match_finite_differences() {
        for seed in 0..5u64 {
            let params = init_cell(CellKind::Ltc, 6, 4, 900 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
            let probe: Vec<f64> = (0..4).map(|_| rng.random::<f64>() - 0.5).collect();
            let eps = 1e-6;

            let a = state_jacobian(&params, &x, &probe).unwrap();
            for j in 0..6 {
                let mut xp = x.clone();
                xp[j] += eps;
                let hi = rhs(&params, &xp, &probe).unwrap();
                xp[j] -= 2.0 * eps;
                let lo = rhs(&params, &xp, &probe).unwrap();
                for i in 0..6 {
                    let fd = (hi[i] - lo[i]) / (2.0 * eps);
                    assert!(fd_tol(fd, a.at(i, j), 1e-6), "A[{i}][{j}]");
                }
            }

            // C is defined at rest (x = 0)
            let co = intervention_coefficients(&params, None, Some(&probe)).unwrap();
            let zero_x = vec![0.0; 6];
            for k in 0..4 {
                let mut up = probe.clone();
                up[k] += eps;
                let hi = rhs(&params, &zero_x, &up).unwrap();
                up[k] -= 2.0 * eps;
                let lo = rhs(&params, &zero_x, &up).unwrap();
                for i in 0..6 {
                    let fd = (hi[i] - lo[i]) / (2.0 * eps);
                    assert!(fd_tol(fd, co.c.at(i, k), 1e-6), "C[{i}][{k}]");
                }
            }
        }
    }

    /// Mixed second derivative for the bilinear coefficient, via the
    /// four-point finite-difference stencil.
    #[test]
    fn bilinear_coefficient_matches_mixed_differences() {
        for seed in 0..3u64 {
            let params = init_cell(CellKind::Ltc, 5, 3, 950 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(33 + seed);
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let probe: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            let co = intervention_coefficients(&params, Some(&x), Some(&probe)).unwrap();
            let eps = 1e-4;
            for i in 0..5 {
                for j in 0..5 {
                    for k in 0..3 {
                        let eval = |sx: f64, su: f64| -> f64 {
                            let mut xx = x.clone();
                            xx[j] += sx * eps;
                            let mut uu = probe.clone();
                            uu[k] += su * eps;
                            rhs(&params, &xx, &uu).unwrap()[i]
                        };
                        let fd = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0)
                            + eval(-1.0, -1.0))
                            / (4.0 * eps * eps);
                        assert!(
                            fd_tol(fd, co.b_at(i, j, k), 1e-4),
                            "B[{i}][{j}][{k}]: fd {fd} vs {}",
                            co.b_at(i, j, k)
                        );
                    }
                }
            }
        }
    }

    /// Structural zeros: no input weight or no attractor level means no
    /// input gain, exactly.
    #[test]
    fn input_gain_vanishes_without_weights_or_attractor() {
        let mut no_w = init_cell::<f64>(CellKind::Ltc, 5, 3, 1);
        no_w.w_in.fill(0.0);
        let co = intervention_coefficients(&no_w, None, None).unwrap();
        assert!(co.c.data().iter().all(|&v| v == 0.0));

        let mut no_a = init_cell::<f64>(CellKind::Ltc, 5, 3, 2);
        no_a.attractor.iter_mut().for_each(|v| *v = 0.0);
        let co = intervention_coefficients(&no_a, None, None).unwrap();
        assert!(co.c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn csv_export_is_complete_and_parseable() {
        let params = init_cell::<f64>(CellKind::Ltc, 4, 2, 3);
        let co = intervention_coefficients(&params, None, None).unwrap();
        let dir = std::env::temp_dir().join(format!("lnav-causal-{}", std::process::id()));
        co.export_csv(&dir).unwrap();
        let a = std::fs::read_to_string(dir.join("a.csv")).unwrap();
        let b = std::fs::read_to_string(dir.join("b.csv")).unwrap();
        let c = std::fs::read_to_string(dir.join("c.csv")).unwrap();
        assert_eq!(a.lines().count(), 1 + 16);
        assert_eq!(b.lines().count(), 1 + 32);
        assert_eq!(c.lines().count(), 1 + 8);
        assert_eq!(a.lines().next().unwrap(), "i,j,value");
        // spot-check one value against the in-memory tensor
        let line = b.lines().nth(1 + (1 * 4 + 2) * 2 + 1).unwrap();
        let val: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(val, co.b_at(1, 2, 1));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn autonomous_flow_has_zero_input_gain_and_reverses() {
        let params = init_cell::<f64>(CellKind::OdeRnn, 6, 3, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        let report = autonomous_flow_probe(&params, &x, 1.0, 0.01).unwrap();
        assert_eq!(report.input_sensitivity, 0.0, "flow must ignore inputs exactly");
        assert!(report.roundtrip_error < 1e-5, "roundtrip error {}", report.roundtrip_error);
    }

    #[test]
    fn non_gated_kinds_are_rejected() {
        let params = init_cell::<f64>(CellKind::CtGru, 4, 2, 5);
        assert!(matches!(
            intervention_coefficients(&params, None, None),
            Err(CellError::Unsupported { .. })
        ));
        let params = init_cell::<f64>(CellKind::Ltc, 4, 2, 5);
        assert!(matches!(
            autonomous_flow_probe(&params, &[0.0; 4], 1.0, 0.01),
            Err(CellError::Unsupported { .. })
        ));
    }
}
