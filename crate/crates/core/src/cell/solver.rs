//! Fixed-step integration of the continuous cell kinds, and the frame-level
//! step entry point shared by all kinds.
//!
//! One call to [`step`] advances a cell by one input frame. Continuous kinds
//! integrate their right-hand side through `unfold_steps` solver substeps of
//! size `dt` (so `dt * unfold_steps` must equal the frame interval); the
//! ODE-RNN then applies its discrete jump; the discrete kinds perform a
//! single gated update per frame regardless of solver settings.
//!
//! Three schemes are available:
//!
//! * `ExplicitEuler` — first order, the baseline.
//! * `Rk4` — classic fourth-order Runge-Kutta, the accuracy reference.
//! * `SemiImplicitFused` — treats the state factor implicitly while keeping
//!   the drive explicit. For the LTC each substep computes
//!   `x <- (x + dt*f*attr) / (1 + dt*(1/tau + f))`, which for nonnegative
//!   drive contracts toward the attractor no matter how large `dt` is. For
//!   the CT-RNN the analogous form divides by `1 + dt/tau`; for the ODE-RNN
//!   flow (no state leak term to treat implicitly) it falls back to Euler.
//!
//! Every forward routine has a hand-written reverse-mode twin used by
//! training; the pairing is pinned by finite-difference tests at the
//! training level.

use super::discrete::{self, CtGruCache, LstmCache};
use super::dynamics::{activation_into, drive_vjp, rhs_from_activation, rhs_vjp};
use super::{CellError, CellKind, CellParams, CellState};
use crate::linalg::axpy;
use crate::scalar::Real;

/// Inter-frame interval of the 20 Hz recording pipeline, in seconds.
pub const FRAME_DT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    ExplicitEuler,
    SemiImplicitFused,
    Rk4,
}

impl SolverMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolverMethod::ExplicitEuler => "euler",
            SolverMethod::SemiImplicitFused => "fused",
            SolverMethod::Rk4 => "rk4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euler" => Some(SolverMethod::ExplicitEuler),
            "fused" => Some(SolverMethod::SemiImplicitFused),
            "rk4" => Some(SolverMethod::Rk4),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Substep size in seconds.
    pub dt: f64,
    /// Substeps per input frame.
    pub unfold_steps: usize,
}

impl SolverConfig {
    /// Split one frame interval into `unfold_steps` equal substeps.
    pub fn per_frame(method: SolverMethod, frame_dt: f64, unfold_steps: usize) -> Self {
        SolverConfig { method, dt: frame_dt / unfold_steps as f64, unfold_steps }
    }

    /// Preferred scheme per kind: the fused step for the LTC (it is the
    /// stable discretization of exactly that equation), RK4 for the other
    /// continuous kinds, and a single trivial substep for discrete kinds.
    pub fn default_for(kind: CellKind) -> Self {
        match kind {
            CellKind::Ltc => SolverConfig::per_frame(SolverMethod::SemiImplicitFused, FRAME_DT, 6),
            CellKind::CtRnn | CellKind::OdeRnn => {
                SolverConfig::per_frame(SolverMethod::Rk4, FRAME_DT, 6)
            }
            CellKind::CtGru | CellKind::Lstm => {
                SolverConfig::per_frame(SolverMethod::ExplicitEuler, FRAME_DT, 1)
            }
        }
    }

    /// Total time advanced per frame.
    pub fn frame_dt(&self) -> f64 {
        self.dt * self.unfold_steps as f64
    }

    /// Check positivity and, when `frame_interval` is given, that the
    /// substeps tile it exactly (to float tolerance).
    pub fn validate(&self, frame_interval: Option<f64>) -> Result<(), CellError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(CellError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.unfold_steps == 0 {
            return Err(CellError::Config("unfold_steps must be at least 1".into()));
        }
        if let Some(frame) = frame_interval {
            if (self.frame_dt() - frame).abs() > 1e-9 {
                return Err(CellError::Config(format!(
                    "dt {} x unfold {} = {} does not tile the {} s frame interval",
                    self.dt,
                    self.unfold_steps,
                    self.frame_dt(),
                    frame
                )));
            }
        }
        Ok(())
    }
}

/// Loss gradient with respect to a [`CellState`] (visible part plus the
/// kind-specific auxiliary memory).
#[derive(Clone, Debug)]
pub struct StateGrad<S> {
    pub x: Vec<S>,
    pub aux: Vec<S>,
}

impl<S: Real> StateGrad<S> {
    pub fn zero(params: &CellParams<S>) -> Self {
        StateGrad { x: vec![S::zero(); params.state_dim], aux: vec![S::zero(); params.aux_dim()] }
    }
}

/// Everything the backward pass needs to replay one substep exactly.
#[derive(Clone, Debug)]
pub enum SubstepCache<S> {
    Euler { x0: Vec<S>, f: Vec<S> },
    Fused { x0: Vec<S>, f: Vec<S>, x1: Vec<S> },
    Rk4 { stages: Vec<StageCache<S>> },
}

#[derive(Clone, Debug)]
pub struct StageCache<S> {
    pub y: Vec<S>,
    pub f: Vec<S>,
}

#[derive(Clone, Debug)]
pub struct JumpCache<S> {
    pub x_pre: Vec<S>,
    pub f: Vec<S>,
}

/// Per-frame activation record for exact BPTT replay.
#[derive(Clone, Debug)]
pub enum StepCache<S> {
    Continuous { substeps: Vec<SubstepCache<S>>, jump: Option<JumpCache<S>> },
    Gru(CtGruCache<S>),
    Lstm(LstmCache<S>),
}

/// Advance the cell by one frame. Pure in `params` and `state`.
pub fn step<S: Real>(
    params: &CellParams<S>,
    state: &CellState<S>,
    input: &[S],
    cfg: &SolverConfig,
) -> Result<CellState<S>, CellError> {
    step_cached(params, state, input, cfg).map(|(s, _)| s)
}

/// Advance the cell by one frame, returning the activation cache needed by
/// [`step_backward`].
pub fn step_cached<S: Real>(
    params: &CellParams<S>,
    state: &CellState<S>,
    input: &[S],
    cfg: &SolverConfig,
) -> Result<(CellState<S>, StepCache<S>), CellError> {
    if state.x.len() != params.state_dim || input.len() != params.input_dim {
        return Err(CellError::Shape(format!(
            "step: state {} / input {} vs cell {}x{}",
            state.x.len(),
            input.len(),
            params.state_dim,
            params.input_dim
        )));
    }
    cfg.validate(None)?;
    match params.kind {
        CellKind::CtGru => {
            let (next, cache) = discrete::ctgru_step(params, state, input, cfg.frame_dt())?;
            Ok((next, StepCache::Gru(cache)))
        }
        CellKind::Lstm => {
            let (next, cache) = discrete::lstm_step(params, state, input)?;
            Ok((next, StepCache::Lstm(cache)))
        }
        _ => {
            let mut x = state.x.clone();
            let h = S::cast(cfg.dt);
            let drive_input = matches!(params.kind, CellKind::Ltc | CellKind::CtRnn)
                .then_some(input);
            let mut substeps = Vec::with_capacity(cfg.unfold_steps);
            for s in 0..cfg.unfold_steps {
                let cache = substep_forward(params, &mut x, drive_input, h, cfg.method);
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(CellError::Diverged { frame: 0, substep: s });
                }
                substeps.push(cache);
            }
            let jump = if params.kind == CellKind::OdeRnn {
                let cache = jump_forward(params, &mut x, input);
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(CellError::Diverged { frame: 0, substep: cfg.unfold_steps });
                }
                Some(cache)
            } else {
                None
            };
            let next = CellState {
                x,
                t: state.t + S::cast(cfg.frame_dt()),
                aux: Vec::new(),
            };
            Ok((next, StepCache::Continuous { substeps, jump }))
        }
    }
}

/// Integrate the continuous dynamics for `steps` substeps of (possibly
/// negative) size `dt`, with no frame bookkeeping. Negative `dt` runs time
/// backward, which the reversibility diagnostics rely on; everyday stepping
/// should go through [`step`] instead.
pub fn integrate_fixed<S: Real>(
    params: &CellParams<S>,
    x0: &[S],
    input: &[S],
    method: SolverMethod,
    dt: f64,
    steps: usize,
) -> Result<Vec<S>, CellError> {
    if !params.kind.is_continuous() {
        return Err(CellError::Unsupported { op: "integrate_fixed", kind: params.kind });
    }
    let drive_input =
        matches!(params.kind, CellKind::Ltc | CellKind::CtRnn).then_some(input);
    let mut x = x0.to_vec();
    let h = S::cast(dt);
    for s in 0..steps {
        substep_forward(params, &mut x, drive_input, h, method);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(CellError::Diverged { frame: 0, substep: s });
        }
    }
    Ok(x)
}

fn substep_forward<S: Real>(
    params: &CellParams<S>,
    x: &mut Vec<S>,
    u: Option<&[S]>,
    h: S,
    method: SolverMethod,
) -> SubstepCache<S> {
    let d = params.state_dim;
    match method {
        SolverMethod::ExplicitEuler => euler_substep(params, x, u, h),
        SolverMethod::SemiImplicitFused => {
            if params.kind == CellKind::OdeRnn {
                // No leak term to treat implicitly; integrate explicitly.
                return euler_substep(params, x, u, h);
            }
            let mut f = vec![S::zero(); d];
            activation_into(params, x, u, &mut f);
            let x0 = std::mem::take(x);
            let mut x1 = vec![S::zero(); d];
            match params.kind {
                CellKind::Ltc => {
                    for i in 0..d {
                        let den = S::one() + h * (S::one() / params.tau[i] + f[i]);
                        x1[i] = (x0[i] + h * f[i] * params.attractor[i]) / den;
                    }
                }
                CellKind::CtRnn => {
                    for i in 0..d {
                        let den = S::one() + h / params.tau[i];
                        x1[i] = (x0[i] + h * f[i]) / den;
                    }
                }
                _ => unreachable!(),
            }
            *x = x1.clone();
            SubstepCache::Fused { x0, f, x1 }
        }
        SolverMethod::Rk4 => {
            let mut stages = Vec::with_capacity(4);
            let mut k = vec![vec![S::zero(); d]; 4];
            let half = h / S::cast(2.0);
            let x0 = x.clone();
            for stage in 0..4 {
                let y = match stage {
                    0 => x0.clone(),
                    1 => add_scaled(&x0, half, &k[0]),
                    2 => add_scaled(&x0, half, &k[1]),
                    _ => add_scaled(&x0, h, &k[2]),
                };
                let mut f = vec![S::zero(); d];
                activation_into(params, &y, u, &mut f);
                rhs_from_activation(params, &y, &f, &mut k[stage]);
                stages.push(StageCache { y, f });
            }
            let sixth = h / S::cast(6.0);
            for i in 0..d {
                x[i] = x0[i]
                    + sixth
                        * (k[0][i]
                            + S::cast(2.0) * k[1][i]
                            + S::cast(2.0) * k[2][i]
                            + k[3][i]);
            }
            SubstepCache::Rk4 { stages }
        }
    }
}

fn euler_substep<S: Real>(
    params: &CellParams<S>,
    x: &mut Vec<S>,
    u: Option<&[S]>,
    h: S,
) -> SubstepCache<S> {
    let d = params.state_dim;
    let mut f = vec![S::zero(); d];
    activation_into(params, x, u, &mut f);
    let mut g = vec![S::zero(); d];
    rhs_from_activation(params, x, &f, &mut g);
    let x0 = x.clone();
    for i in 0..d {
        x[i] += h * g[i];
    }
    SubstepCache::Euler { x0, f }
}

fn add_scaled<S: Real>(base: &[S], alpha: S, delta: &[S]) -> Vec<S> {
    base.iter().zip(delta).map(|(&b, &d)| b + alpha * d).collect()
}

fn jump_forward<S: Real>(params: &CellParams<S>, x: &mut Vec<S>, input: &[S]) -> JumpCache<S> {
    let d = params.state_dim;
    let (jump_w_rec, jump_b) = match &params.extra {
        super::ExtraParams::OdeRnn { jump_w_rec, jump_b } => (jump_w_rec, jump_b),
        _ => unreachable!("jump requires OdeRnn extras"),
    };
    let mut z = jump_w_rec.matvec(x);
    let mut zu = vec![S::zero(); d];
    params.w_in.masked_matvec_into(params.in_mask.as_ref(), input, &mut zu);
    for i in 0..d {
        z[i] = (z[i] + zu[i] + jump_b[i]).tanh();
    }
    let x_pre = std::mem::replace(x, z.clone());
    JumpCache { x_pre, f: z }
}

/// Reverse-mode twin of [`step_cached`]: pushes the loss gradient at the
/// post-step state back to the pre-step state, accumulating parameter
/// gradients into `grads` and the input gradient into `du`.
pub fn step_backward<S: Real>(
    params: &CellParams<S>,
    input: &[S],
    cache: &StepCache<S>,
    d_out: &StateGrad<S>,
    dt: f64,
    grads: &mut CellParams<S>,
    du: &mut [S],
) -> StateGrad<S> {
    match cache {
        StepCache::Gru(c) => discrete::ctgru_backward(params, input, c, d_out, grads, du),
        StepCache::Lstm(c) => discrete::lstm_backward(params, input, c, d_out, grads, du),
        StepCache::Continuous { substeps, jump } => {
            let h = S::cast(dt);
            let drive_input = matches!(params.kind, CellKind::Ltc | CellKind::CtRnn)
                .then_some(input);
            let mut dx = d_out.x.clone();
            if let Some(j) = jump {
                jump_backward(params, input, j, &mut dx, grads, du);
            }
            for sub in substeps.iter().rev() {
                substep_backward(params, drive_input, sub, h, &mut dx, grads, du);
            }
            StateGrad { x: dx, aux: Vec::new() }
        }
    }
}

fn substep_backward<S: Real>(
    params: &CellParams<S>,
    u: Option<&[S]>,
    cache: &SubstepCache<S>,
    h: S,
    dx: &mut Vec<S>,
    grads: &mut CellParams<S>,
    du: &mut [S],
) {
    let d = params.state_dim;
    match cache {
        SubstepCache::Euler { x0, f } => {
            let v = dx.clone();
            let mut w = v.clone();
            w.iter_mut().for_each(|wi| *wi *= h);
            // dx starts as the identity path x1 = x0 + h*g, then rhs_vjp
            // adds the h * w·∂g/∂x0 path.
            rhs_vjp(params, x0, u, f, &w, dx, Some(du), grads);
        }
        SubstepCache::Fused { x0, f, x1 } => {
            let v = dx.clone();
            let mut df = vec![S::zero(); d];
            let mut dx0 = vec![S::zero(); d];
            match params.kind {
                CellKind::Ltc => {
                    for i in 0..d {
                        let inv_tau = S::one() / params.tau[i];
                        let den = S::one() + h * (inv_tau + f[i]);
                        dx0[i] = v[i] / den;
                        df[i] = v[i] * h * (params.attractor[i] - x1[i]) / den;
                        grads.tau[i] += v[i] * x1[i] * h * inv_tau * inv_tau / den;
                        grads.attractor[i] += v[i] * h * f[i] / den;
                    }
                }
                CellKind::CtRnn => {
                    for i in 0..d {
                        let inv_tau = S::one() / params.tau[i];
                        let den = S::one() + h * inv_tau;
                        dx0[i] = v[i] / den;
                        df[i] = v[i] * h / den;
                        grads.tau[i] += v[i] * x1[i] * h * inv_tau * inv_tau / den;
                    }
                }
                _ => unreachable!("fused cache only produced for leaky kinds"),
            }
            drive_vjp(params, x0, u, f, &df, &mut dx0, Some(du), grads);
            *dx = dx0;
        }
        SubstepCache::Rk4 { stages } => {
            let v = dx.clone();
            let sixth = h / S::cast(6.0);
            let two = S::cast(2.0);
            let half = h / S::cast(2.0);
            let mut dk: Vec<Vec<S>> = vec![
                scale(&v, sixth),
                scale(&v, sixth * two),
                scale(&v, sixth * two),
                scale(&v, sixth),
            ];
            let mut dx0 = v;
            // Stages feed forward as y2=x0+h/2 k1, y3=x0+h/2 k2, y4=x0+h k3,
            // so their sensitivities unwind in reverse order.
            for stage in (0..4).rev() {
                let mut dy = vec![S::zero(); d];
                let st = &stages[stage];
                rhs_vjp(params, &st.y, u, &st.f, &dk[stage], &mut dy, Some(du), grads);
                axpy(S::one(), &dy, &mut dx0);
                match stage {
                    3 => axpy(h, &dy, &mut dk[2]),
                    2 => axpy(half, &dy, &mut dk[1]),
                    1 => axpy(half, &dy, &mut dk[0]),
                    _ => {}
                }
            }
            *dx = dx0;
        }
    }
}

fn scale<S: Real>(v: &[S], alpha: S) -> Vec<S> {
    v.iter().map(|&x| x * alpha).collect()
}

pub(crate) fn jump_backward<S: Real>(
    params: &CellParams<S>,
    input: &[S],
    cache: &JumpCache<S>,
    dx: &mut Vec<S>,
    grads: &mut CellParams<S>,
    du: &mut [S],
) {
    let d = params.state_dim;
    let (jump_w_rec, g_jump_w_rec, g_jump_b) = match (&params.extra, &mut grads.extra) {
        (
            super::ExtraParams::OdeRnn { jump_w_rec, .. },
            super::ExtraParams::OdeRnn { jump_w_rec: gw, jump_b: gb },
        ) => (jump_w_rec, gw, gb),
        _ => unreachable!("jump requires OdeRnn extras"),
    };
    let v = dx.clone();
    let mut dz = vec![S::zero(); d];
    for i in 0..d {
        dz[i] = v[i] * (S::one() - cache.f[i] * cache.f[i]);
    }
    let mut dx_pre = vec![S::zero(); d];
    jump_w_rec.masked_add_tr_matvec(None, &dz, &mut dx_pre);
    g_jump_w_rec.masked_add_outer(None, &dz, &cache.x_pre);
    for i in 0..d {
        g_jump_b[i] += dz[i];
    }
    params.w_in.masked_add_tr_matvec(params.in_mask.as_ref(), &dz, du);
    grads.w_in.masked_add_outer(params.in_mask.as_ref(), &dz, input);
    *dx = dx_pre;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::init_cell;

    fn constant_drive_ltc(c: f64, attractor: f64) -> CellParams<f64> {
        let mut p: CellParams<f64> = CellParams::zeros(CellKind::Ltc, 1, 1);
        p.b[0] = c.atanh();
        p.attractor[0] = attractor;
        p
    }

    #[test]
    fn euler_converges_to_constant_drive_equilibrium() {
        // f == 1/2, tau = 1, attractor = 2: equilibrium at 2/3.
        let p = constant_drive_ltc(0.5, 2.0);
        let cfg = SolverConfig { method: SolverMethod::ExplicitEuler, dt: 0.01, unfold_steps: 1 };
        let mut state = CellState::zero(&p);
        for _ in 0..1000 {
            state = step(&p, &state, &[0.0], &cfg).unwrap();
        }
        assert!(
            (state.x[0] - 2.0 / 3.0).abs() < 1e-3,
            "reached {} instead of 2/3",
            state.x[0]
        );
        assert!((state.t - 10.0).abs() < 1e-9);
    }

    #[test]
    fn fused_step_is_bounded_for_nonnegative_drive() {
        // With f >= 0 the fused update is a contraction toward the
        // attractor: |x'| <= max(|x|, |attr|) for any dt whatsoever.
        for &dt in &[0.1, 1.0, 10.0, 1e3] {
            for &(x0, attr) in &[(5.0, 1.0), (-3.0, 0.5), (0.1, -2.0), (0.0, 0.0)] {
                let mut p = constant_drive_ltc(0.9, attr);
                p.tau[0] = 1.3;
                let cfg =
                    SolverConfig { method: SolverMethod::SemiImplicitFused, dt, unfold_steps: 1 };
                let state = CellState { x: vec![x0], t: 0.0, aux: vec![] };
                let next = step(&p, &state, &[0.0], &cfg).unwrap();
                let bound = x0.abs().max(attr.abs());
                assert!(
                    next.x[0].abs() <= bound + 1e-12,
                    "dt={dt}: |{}| > max(|{x0}|, |{attr}|)",
                    next.x[0]
                );
            }
        }
    }

    #[test]
    fn fused_and_euler_agree_to_first_order() {
        let p: CellParams<f64> = init_cell(CellKind::Ltc, 5, 3, 21);
        let state = CellState { x: vec![0.3, -0.2, 0.5, 0.0, -0.4], t: 0.0, aux: vec![] };
        let input = [0.2, -0.5, 0.1];
        let diff_at = |dt: f64| {
            let euler = step(
                &p,
                &state,
                &input,
                &SolverConfig { method: SolverMethod::ExplicitEuler, dt, unfold_steps: 1 },
            )
            .unwrap();
            let fused = step(
                &p,
                &state,
                &input,
                &SolverConfig { method: SolverMethod::SemiImplicitFused, dt, unfold_steps: 1 },
            )
            .unwrap();
            euler
                .x
                .iter()
                .zip(&fused.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        };
        let d1 = diff_at(1e-2);
        let d2 = diff_at(5e-3);
        let d3 = diff_at(2.5e-3);
        assert!(d1 < 10.0 * 1e-2, "schemes drifted apart: {d1}");
        assert!(d2 < d1 && d3 < d2, "difference must shrink with dt: {d1} {d2} {d3}");
    }

    #[test]
    fn divergence_reports_the_offending_substep() {
        let mut p: CellParams<f64> = CellParams::zeros(CellKind::Ltc, 1, 1);
        p.tau[0] = 1e-6; // violently stiff leak
        let cfg = SolverConfig { method: SolverMethod::ExplicitEuler, dt: 10.0, unfold_steps: 300 };
        let state = CellState { x: vec![1.0], t: 0.0, aux: vec![] };
        match step(&p, &state, &[0.0], &cfg) {
            Err(CellError::Diverged { substep, .. }) => {
                assert!(substep > 0, "overflow takes a few substeps to reach Inf");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn solver_config_validation() {
        let good = SolverConfig::per_frame(SolverMethod::Rk4, FRAME_DT, 6);
        good.validate(Some(FRAME_DT)).unwrap();
        assert!((good.frame_dt() - FRAME_DT).abs() < 1e-12);

        let bad = SolverConfig { method: SolverMethod::Rk4, dt: 0.02, unfold_steps: 2 };
        assert!(bad.validate(Some(FRAME_DT)).is_err());
        let zero = SolverConfig { method: SolverMethod::Rk4, dt: 0.0, unfold_steps: 1 };
        assert!(zero.validate(None).is_err());
    }

    #[test]
    fn discrete_kinds_take_one_update_per_frame_regardless_of_unfold() {
        let p: CellParams<f64> = init_cell(CellKind::Lstm, 4, 2, 3);
        let state = CellState::zero(&p);
        let input = [0.4, -0.2];
        let one = step(
            &p,
            &state,
            &input,
            &SolverConfig { method: SolverMethod::ExplicitEuler, dt: 0.05, unfold_steps: 1 },
        )
        .unwrap();
        let six = step(
            &p,
            &state,
            &input,
            &SolverConfig { method: SolverMethod::Rk4, dt: 0.05 / 6.0, unfold_steps: 6 },
        )
        .unwrap();
        assert_eq!(one.x, six.x, "solver settings must not affect discrete updates");
        assert_eq!(one.aux, six.aux);
    }
}
