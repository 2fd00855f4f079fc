//! Exact backpropagation through time over one demonstration window.
//!
//! The forward pass replays the policy frame by frame, keeping per-step
//! activation caches; the backward pass walks the same frames in reverse,
//! pulling the mean cosine loss back through the readout, the solver
//! unfolding (every substep), and — when the policy carries one — the conv
//! head. Gradients accumulate into a caller-owned buffer so minibatches sum
//! naturally.

use crate::cell::{solver, CellError, StateGrad};
use crate::image::RgbImage;
use crate::policy::{Policy, PolicyStepCache, CONTROL_DIM};
use crate::scalar::Real;

use super::loss::{cosine_loss, FrameLoss};

/// Frame inputs for one window: either raw feature vectors fed straight to
/// the cell, or camera images for policies with a conv head.
#[derive(Clone, Debug)]
pub enum SeqFrames<S> {
    Features(Vec<Vec<S>>),
    Images(Vec<RgbImage>),
}

#[derive(Clone, Debug)]
pub struct TrainSequence<S> {
    pub frames: SeqFrames<S>,
    pub labels: Vec<[S; CONTROL_DIM]>,
}

impl<S: Real> TrainSequence<S> {
    pub fn len(&self) -> usize {
        match &self.frames {
            SeqFrames::Features(f) => f.len(),
            SeqFrames::Images(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self) -> Result<(), CellError> {
        if self.is_empty() || self.labels.len() != self.len() {
            return Err(CellError::Shape(format!(
                "sequence has {} frames but {} labels",
                self.len(),
                self.labels.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SeqLoss<S> {
    /// Mean per-frame cosine loss (lower is better; -1 is perfect).
    pub mean: S,
    pub frames: usize,
    /// Frames whose prediction or label had no direction.
    pub degenerate: usize,
}

/// Forward-only evaluation (validation, finite-difference probes).
pub fn sequence_loss<S: Real>(
    policy: &Policy<S>,
    seq: &TrainSequence<S>,
) -> Result<SeqLoss<S>, CellError> {
    seq.check()?;
    let mut state = policy.state();
    let mut total = S::zero();
    let mut degenerate = 0;
    for t in 0..seq.len() {
        let feat = match &seq.frames {
            SeqFrames::Features(f) => f[t].clone(),
            SeqFrames::Images(imgs) => policy.features(&imgs[t])?.0,
        };
        let pred = policy.step(&mut state, &feat)?;
        let fl = cosine_loss(&pred, &seq.labels[t]);
        total += fl.value;
        if fl.degenerate {
            degenerate += 1;
        }
    }
    Ok(SeqLoss { mean: total / S::cast(seq.len() as f64), frames: seq.len(), degenerate })
}

/// Forward + exact reverse sweep. Accumulates into `grads` (zero it first
/// for a fresh gradient); returns the same loss as [`sequence_loss`].
pub fn sequence_gradients<S: Real>(
    policy: &Policy<S>,
    seq: &TrainSequence<S>,
    grads: &mut Policy<S>,
) -> Result<SeqLoss<S>, CellError> {
    seq.check()?;
    let t_count = seq.len();
    let mut state = policy.state();
    let mut caches: Vec<PolicyStepCache<S>> = Vec::with_capacity(t_count);
    let mut losses: Vec<FrameLoss<S>> = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let (feat, conv_cache) = match &seq.frames {
            SeqFrames::Features(f) => (f[t].clone(), None),
            SeqFrames::Images(imgs) => {
                let (feat, cache) = policy.features(&imgs[t])?;
                (feat, Some(cache))
            }
        };
        let cache = policy.step_cached(&mut state, feat, conv_cache)?;
        losses.push(cosine_loss(&cache.pred, &seq.labels[t]));
        caches.push(cache);
    }

    let inv_t = S::one() / S::cast(t_count as f64);
    let mut dstate = StateGrad::zero(&policy.cell);
    let mut du = vec![S::zero(); policy.cell.input_dim];
    for t in (0..t_count).rev() {
        let cache = &caches[t];
        let mut dpred = losses[t].grad;
        dpred.iter_mut().for_each(|g| *g *= inv_t);
        policy.readout.vjp(
            &cache.x_end[policy.src_start..],
            &dpred,
            &mut grads.readout,
            &mut dstate.x[policy.src_start..],
        );
        du.iter_mut().for_each(|v| *v = S::zero());
        dstate = solver::step_backward(
            &policy.cell,
            &cache.input,
            &cache.step,
            &dstate,
            policy.solver.dt,
            &mut grads.cell,
            &mut du,
        );
        if let (Some(head), Some(ghead), Some(ccache)) =
            (&policy.conv, grads.conv.as_mut(), cache.conv.as_ref())
        {
            head.backward(ccache, &du, ghead);
        }
    }

    let mut total = S::zero();
    let mut degenerate = 0;
    for fl in &losses {
        total += fl.value;
        if fl.degenerate {
            degenerate += 1;
        }
    }
    Ok(SeqLoss { mean: total * inv_t, frames: t_count, degenerate })
}
