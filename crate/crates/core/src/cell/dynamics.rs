//! Right-hand sides of the continuous cell kinds and their vector-Jacobian
//! products.
//!
//! Everything reverse-mode in this crate (backpropagation through the
//! solvers, the adjoint integrator, the intervention analysis cross-checks)
//! funnels through [`rhs_vjp`], so its correctness is pinned down here by
//! finite-difference tests against the forward [`rhs`] alone.

use super::{CellError, CellKind, CellParams};
use crate::scalar::Real;

/// Shared drive vector `f = tanh(W_r x + W u + b)`, with the input term
/// omitted for the autonomous `OdeRnn` flow. `u` may only be `None` for
/// kinds that ignore it.
pub fn activation_into<S: Real>(
    params: &CellParams<S>,
    x: &[S],
    u: Option<&[S]>,
    f: &mut [S],
) {
    params.w_rec.masked_matvec_into(params.rec_mask.as_ref(), x, f);
    if uses_input(params.kind) {
        let u = u.expect("input-driven kind needs an input vector");
        let mut zu = vec![S::zero(); f.len()];
        params.w_in.masked_matvec_into(params.in_mask.as_ref(), u, &mut zu);
        for i in 0..f.len() {
            f[i] += zu[i];
        }
    }
    for i in 0..f.len() {
        f[i] = (f[i] + params.b[i]).tanh();
    }
}

fn uses_input(kind: CellKind) -> bool {
    matches!(kind, CellKind::Ltc | CellKind::CtRnn)
}

/// Combine state and drive into `dx/dt` without recomputing `f`.
pub fn rhs_from_activation<S: Real>(params: &CellParams<S>, x: &[S], f: &[S], g: &mut [S]) {
    match params.kind {
        CellKind::Ltc => {
            for i in 0..x.len() {
                let leak = S::one() / params.tau[i] + f[i];
                g[i] = -leak * x[i] + f[i] * params.attractor[i];
            }
        }
        CellKind::CtRnn => {
            for i in 0..x.len() {
                g[i] = -x[i] / params.tau[i] + f[i];
            }
        }
        CellKind::OdeRnn => g.copy_from_slice(f),
        _ => unreachable!("discrete kinds have no continuous right-hand side"),
    }
}

/// `dx/dt = g(x, u)` for the continuous kinds. The `OdeRnn` flow is
/// autonomous and ignores `u`.
pub fn rhs<S: Real>(params: &CellParams<S>, x: &[S], u: &[S]) -> Result<Vec<S>, CellError> {
    if !params.kind.is_continuous() {
        return Err(CellError::Unsupported { op: "rhs", kind: params.kind });
    }
    if x.len() != params.state_dim || (uses_input(params.kind) && u.len() != params.input_dim) {
        return Err(CellError::Shape(format!(
            "rhs: state {} / input {} vs cell {}x{}",
            x.len(),
            u.len(),
            params.state_dim,
            params.input_dim
        )));
    }
    let mut f = vec![S::zero(); params.state_dim];
    activation_into(params, x, uses_input(params.kind).then_some(u), &mut f);
    let mut g = vec![S::zero(); params.state_dim];
    rhs_from_activation(params, x, &f, &mut g);
    Ok(g)
}

/// Reverse-mode step through the drive alone: given `dL/df`, accumulate
/// `dL/dx`, `dL/du`, and the weight gradients of the affine map feeding the
/// tanh. Shared by the solver backward passes, which sometimes need the
/// drive chain without the full right-hand side (the fused scheme).
pub(crate) fn drive_vjp<S: Real>(
    params: &CellParams<S>,
    x: &[S],
    u: Option<&[S]>,
    f: &[S],
    df: &[S],
    dx: &mut [S],
    mut du: Option<&mut [S]>,
    grads: &mut CellParams<S>,
) {
    let d = params.state_dim;
    let mut dz = vec![S::zero(); d];
    for i in 0..d {
        dz[i] = df[i] * (S::one() - f[i] * f[i]);
    }
    params.w_rec.masked_add_tr_matvec(params.rec_mask.as_ref(), &dz, dx);
    grads.w_rec.masked_add_outer(params.rec_mask.as_ref(), &dz, x);
    for i in 0..d {
        grads.b[i] += dz[i];
    }
    if uses_input(params.kind) {
        let u = u.expect("input-driven kind needs an input vector");
        if let Some(du) = du.as_deref_mut() {
            params.w_in.masked_add_tr_matvec(params.in_mask.as_ref(), &dz, du);
        }
        grads.w_in.masked_add_outer(params.in_mask.as_ref(), &dz, u);
    }
}

/// Vector-Jacobian product of the right-hand side: given upstream `w`,
/// accumulate `w·∂g/∂x` into `dx`, `w·∂g/∂u` into `du`, and `w·∂g/∂θ` into
/// `grads`. `f` must be the activation previously computed at `(x, u)`.
pub fn rhs_vjp<S: Real>(
    params: &CellParams<S>,
    x: &[S],
    u: Option<&[S]>,
    f: &[S],
    w: &[S],
    dx: &mut [S],
    du: Option<&mut [S]>,
    grads: &mut CellParams<S>,
) {
    let d = params.state_dim;
    let mut df = vec![S::zero(); d];
    match params.kind {
        CellKind::Ltc => {
            for i in 0..d {
                let inv_tau = S::one() / params.tau[i];
                dx[i] += w[i] * (-(inv_tau + f[i]));
                grads.tau[i] += w[i] * x[i] * inv_tau * inv_tau;
                grads.attractor[i] += w[i] * f[i];
                df[i] = w[i] * (params.attractor[i] - x[i]);
            }
        }
        CellKind::CtRnn => {
            for i in 0..d {
                let inv_tau = S::one() / params.tau[i];
                dx[i] += -w[i] * inv_tau;
                grads.tau[i] += w[i] * x[i] * inv_tau * inv_tau;
                df[i] = w[i];
            }
        }
        CellKind::OdeRnn => df.copy_from_slice(w),
        _ => unreachable!("discrete kinds have no continuous right-hand side"),
    }
    drive_vjp(params, x, u, f, &df, dx, du, grads);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::init_cell;
    use crate::linalg::dot;

    #[test]
    fn zero_cell_at_origin_is_stationary() {
        for kind in [CellKind::Ltc, CellKind::CtRnn, CellKind::OdeRnn] {
            let p: CellParams<f64> = CellParams::zeros(kind, 4, 2);
            let g = rhs(&p, &[0.0; 4], &[0.0; 2]).unwrap();
            assert_eq!(g, vec![0.0; 4]);
        }
    }

    #[test]
    fn ctrnn_with_zero_drive_is_pure_leak() {
        let mut p: CellParams<f64> = CellParams::zeros(CellKind::CtRnn, 3, 1);
        p.tau = vec![2.0, 0.5, 1.0];
        let g = rhs(&p, &[4.0, -1.0, 3.0], &[0.0]).unwrap();
        assert_eq!(g, vec![-2.0, 2.0, -3.0]);
    }

    #[test]
    fn constant_drive_ltc_equilibrium() {
        // Zero weights and bias atanh(1/2) make the drive a constant 1/2;
        // with tau = 1 and attractor = 2 the fixed point is at
        // x* = c*attr / (1/tau + c) = 2/3, where the rhs vanishes exactly.
        let mut p: CellParams<f64> = CellParams::zeros(CellKind::Ltc, 1, 1);
        p.b[0] = 0.5f64.atanh();
        p.attractor[0] = 2.0;
        let g = rhs(&p, &[2.0 / 3.0], &[0.0]).unwrap();
        assert!(g[0].abs() < 1e-15, "rhs at equilibrium was {}", g[0]);
        // and it points toward the equilibrium from either side
        assert!(rhs(&p, &[0.0], &[0.0]).unwrap()[0] > 0.0);
        assert!(rhs(&p, &[1.0], &[0.0]).unwrap()[0] < 0.0);
    }

    #[test]
    fn vjp_matches_finite_differences_for_every_continuous_kind() {
        for (kind, seed) in
            [(CellKind::Ltc, 7u64), (CellKind::CtRnn, 11), (CellKind::OdeRnn, 13)]
        {
            let params: CellParams<f64> = init_cell(kind, 4, 3, seed);
            let x0: Vec<f64> = (0..4).map(|i| 0.3 * (i as f64 + 1.0).sin()).collect();
            let u0: Vec<f64> = (0..3).map(|i| 0.2 * (i as f64 - 1.0)).collect();
            let w: Vec<f64> = vec![0.7, -1.1, 0.4, 0.9];

            let mut f = vec![0.0; 4];
            let u_opt = (kind != CellKind::OdeRnn).then_some(u0.as_slice());
            activation_into(&params, &x0, u_opt, &mut f);
            let mut dx = vec![0.0; 4];
            let mut du = vec![0.0; 3];
            let mut grads = params.grad_buffer();
            rhs_vjp(&params, &x0, u_opt, &f, &w, &mut dx, Some(&mut du), &mut grads);

            let eval = |p: &CellParams<f64>, x: &[f64], u: &[f64]| {
                dot(&w, &rhs(p, x, u).unwrap())
            };

            let eps = 1e-6;
            // state sensitivities
            for i in 0..4 {
                let mut xp = x0.clone();
                let mut xm = x0.clone();
                xp[i] += eps;
                xm[i] -= eps;
                let fd = (eval(&params, &xp, &u0) - eval(&params, &xm, &u0)) / (2.0 * eps);
                assert!(
                    (fd - dx[i]).abs() < 1e-6,
                    "{kind:?} dx[{i}]: fd {fd} vs vjp {}",
                    dx[i]
                );
            }
            // input sensitivities
            if kind != CellKind::OdeRnn {
                for k in 0..3 {
                    let mut up = u0.clone();
                    let mut um = u0.clone();
                    up[k] += eps;
                    um[k] -= eps;
                    let fd = (eval(&params, &x0, &up) - eval(&params, &x0, &um)) / (2.0 * eps);
                    assert!(
                        (fd - du[k]).abs() < 1e-6,
                        "{kind:?} du[{k}]: fd {fd} vs vjp {}",
                        du[k]
                    );
                }
            }
            // parameter sensitivities, through the shared flat layout
            let flat_g = flatten(&grads);
            let mut flat_p = flatten(&params);
            let n = flat_p.len();
            let mut probe = params.clone();
            for idx in (0..n).step_by(7) {
                let base = flat_p[idx];
                let fd = {
                    let eps = 1e-6;
                    flat_p[idx] = base + eps;
                    unflatten(&mut probe, &flat_p);
                    let hi = eval(&probe, &x0, &u0);
                    flat_p[idx] = base - eps;
                    unflatten(&mut probe, &flat_p);
                    let lo = eval(&probe, &x0, &u0);
                    flat_p[idx] = base;
                    unflatten(&mut probe, &flat_p);
                    (hi - lo) / (2.0 * eps)
                };
                assert!(
                    (fd - flat_g[idx]).abs() < 1e-6,
                    "{kind:?} theta[{idx}]: fd {fd} vs vjp {}",
                    flat_g[idx]
                );
            }
        }
    }

    fn flatten(p: &CellParams<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        p.visit(&mut |_, data| out.extend_from_slice(data));
        out
    }

    fn unflatten(p: &mut CellParams<f64>, flat: &[f64]) {
        let mut at = 0;
        p.visit_mut(&mut |_, data| {
            data.copy_from_slice(&flat[at..at + data.len()]);
            at += data.len();
        });
    }
}
