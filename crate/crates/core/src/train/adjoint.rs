//! Adjoint-state gradients for the continuous cell kinds.
//!
//! Instead of caching every solver substep (as exact backpropagation does),
//! the backward sweep re-integrates the state trajectory *backward in time*
//! inside each frame,
//!
//! ```text
//! x(t - h) ~= x(t) - h g(x(t))            (state reconstruction)
//! a   <- a + h (dg/dx)^T a                (adjoint accumulation)
//! dth <- dth + h (dg/dth)^T a             (parameter gradient)
//! ```
//!
//! keeping only one state checkpoint per frame. Reconstruction drifts from
//! the true forward trajectory by O(h) over a frame, so adjoint gradients
//! carry an O(h) bias relative to exact backpropagation that vanishes as
//! the substep shrinks — the convergence tests below measure exactly that.
//!
//! Only the explicit Euler unfolding is supported (the reconstruction and
//! the forward pass must discretize the same flow), and only for the kinds
//! with a continuous right-hand side.

use crate::cell::dynamics::{activation_into, rhs, rhs_vjp};
use crate::cell::solver::{self, JumpCache, SolverMethod, StateGrad, StepCache};
use crate::cell::{CellError, CellKind};
use crate::policy::Policy;
use crate::scalar::Real;

use super::bptt::{SeqFrames, SeqLoss, TrainSequence};
use super::loss::{cosine_loss, FrameLoss};

struct FrameRec<S> {
    feat: Vec<S>,
    conv: Option<crate::conv::ConvCache<S>>,
    /// State the readout saw (post step, post jump).
    x_end: Vec<S>,
    /// Pre-jump cache when the kind has an input jump.
    jump: Option<JumpCache<S>>,
    loss: FrameLoss<S>,
}

/// Adjoint analogue of [`super::bptt::sequence_gradients`]: same loss, same
/// gradient layout, O(1) memory in the solver unfolding depth.
pub fn adjoint_gradients<S: Real>(
    policy: &Policy<S>,
    seq: &TrainSequence<S>,
    grads: &mut Policy<S>,
) -> Result<SeqLoss<S>, CellError> {
    let kind = policy.cell.kind;
    if !kind.is_continuous() {
        return Err(CellError::Unsupported { op: "adjoint integration", kind });
    }
    if policy.solver.method != SolverMethod::ExplicitEuler {
        return Err(CellError::Config(
            "adjoint integration requires the explicit Euler unfolding".into(),
        ));
    }
    if seq.is_empty() || seq.labels.len() != seq.len() {
        return Err(CellError::Shape("sequence/label length mismatch".into()));
    }

    let params = &policy.cell;
    let d = params.state_dim;
    let t_count = seq.len();

    // ---- forward: keep only per-frame checkpoints -------------------------
    let mut state = policy.state();
    let mut recs: Vec<FrameRec<S>> = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let (feat, conv) = match &seq.frames {
            SeqFrames::Features(f) => (f[t].clone(), None),
            SeqFrames::Images(imgs) => {
                let (feat, cache) = policy.features(&imgs[t])?;
                (feat, Some(cache))
            }
        };
        // Run the cached step and keep only the jump record; the per-substep
        // caches are dropped immediately, which is what makes this O(1) in
        // unfolding depth across the sequence.
        let (next, cache) = solver::step_cached(params, &state, &feat, &policy.solver)?;
        state = next;
        let jump = match cache {
            StepCache::Continuous { jump, .. } => jump,
            _ => unreachable!("continuous kind produces a continuous cache"),
        };
        let pred = policy.readout.forward(&state.x[policy.src_start..]);
        recs.push(FrameRec {
            feat,
            conv,
            x_end: state.x.clone(),
            jump,
            loss: cosine_loss(&pred, &seq.labels[t]),
        });
    }

    // ---- backward: adjoint sweep -----------------------------------------
    let inv_t = S::one() / S::cast(t_count as f64);
    let h = S::cast(policy.solver.dt);
    let mut a = StateGrad::zero(params).x;
    let mut du = vec![S::zero(); params.input_dim];
    let mut f_buf = vec![S::zero(); d];
    for t in (0..t_count).rev() {
        let rec = &recs[t];
        let mut dpred = rec.loss.grad;
        dpred.iter_mut().for_each(|g| *g *= inv_t);
        policy.readout.vjp(
            &rec.x_end[policy.src_start..],
            &dpred,
            &mut grads.readout,
            &mut a[policy.src_start..],
        );
        du.iter_mut().for_each(|v| *v = S::zero());

        // Undo the input jump first (exact, cached), leaving the adjoint at
        // the end of the continuous flow segment.
        let mut x_cur = if let Some(jump) = &rec.jump {
            solver::jump_backward(params, &rec.feat, jump, &mut a, &mut grads.cell, &mut du);
            jump.x_pre.clone()
        } else {
            rec.x_end.clone()
        };

        let u_opt = matches!(kind, CellKind::Ltc | CellKind::CtRnn).then_some(rec.feat.as_slice());
        for _ in 0..policy.solver.unfold_steps {
            // reconstruct the substep's left endpoint by flowing backward
            let g = rhs(params, &x_cur, &rec.feat)?;
            for i in 0..d {
                x_cur[i] -= h * g[i];
            }
            // accumulate the adjoint and parameter integrals there
            activation_into(params, &x_cur, u_opt, &mut f_buf);
            let w: Vec<S> = a.iter().map(|&ai| ai * h).collect();
            rhs_vjp(params, &x_cur, u_opt, &f_buf, &w, &mut a, Some(&mut du), &mut grads.cell);
        }

        if let (Some(head), Some(ghead), Some(ccache)) =
            (&policy.conv, grads.conv.as_mut(), rec.conv.as_ref())
        {
            head.backward(ccache, &du, ghead);
        }
    }

    let mut total = S::zero();
    let mut degenerate = 0;
    for rec in &recs {
        total += rec.loss.value;
        if rec.loss.degenerate {
            degenerate += 1;
        }
    }
    Ok(SeqLoss { mean: total * inv_t, frames: t_count, degenerate })
}
