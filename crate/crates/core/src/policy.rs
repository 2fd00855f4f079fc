//! A complete sensor-to-control policy: optional convolutional head, one
//! recurrent cell, and a linear readout producing a 3-vector control
//! (unit-direction command in the camera frame).
//!
//! The readout taps a suffix of the cell state, `x[src_start..]`. Sparse
//! wired cells place their motor neurons at the end of the state, so
//! `src_start = d - 3` reads exactly the motor layer; dense cells use
//! `src_start = 0` and regress from the full state.
//!
//! Parameter traversal order is fixed (conv layers, then cell tensors, then
//! readout) and shared by the optimizer, the serializer, and the
//! finite-difference harnesses in the training tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cell::{CellError, CellParams, CellState, SolverConfig, StepCache};
use crate::conv::{ConvCache, ConvHead, ConvSpec};
use crate::image::RgbImage;
use crate::linalg::Mat;
use crate::scalar::Real;

/// Control command width: a direction in R^3.
pub const CONTROL_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Readout<S> {
    /// `CONTROL_DIM × src_dim`.
    pub w: Mat<S>,
    pub b: Vec<S>,
}

impl<S: Real> Readout<S> {
    pub fn zeros(src_dim: usize) -> Self {
        Readout { w: Mat::zeros(CONTROL_DIM, src_dim), b: vec![S::zero(); CONTROL_DIM] }
    }

    pub fn forward(&self, src: &[S]) -> [S; CONTROL_DIM] {
        let mut out = [S::zero(); CONTROL_DIM];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.b[i];
            for (j, &x) in src.iter().enumerate() {
                acc += self.w.at(i, j) * x;
            }
            *o = acc;
        }
        out
    }

    /// Accumulate gradients and the pullback onto the tapped state slice.
    pub fn vjp(
        &self,
        src: &[S],
        dout: &[S; CONTROL_DIM],
        grads: &mut Readout<S>,
        dsrc: &mut [S],
    ) {
        for i in 0..CONTROL_DIM {
            grads.b[i] += dout[i];
            for (j, &x) in src.iter().enumerate() {
                *grads.w.at_mut(i, j) += dout[i] * x;
                dsrc[j] += self.w.at(i, j) * dout[i];
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy<S> {
    pub conv: Option<ConvHead<S>>,
    pub cell: CellParams<S>,
    pub readout: Readout<S>,
    pub solver: SolverConfig,
    /// First state index the readout taps; it reads `x[src_start..]`.
    pub src_start: usize,
}

/// Everything needed to replay one frame backward.
#[derive(Clone, Debug)]
pub struct PolicyStepCache<S> {
    pub conv: Option<ConvCache<S>>,
    pub input: Vec<S>,
    pub step: StepCache<S>,
    /// Cell state right after the step (what the readout saw).
    pub x_end: Vec<S>,
    pub pred: [S; CONTROL_DIM],
}

impl<S: Real> Policy<S> {
    pub fn new(
        conv: Option<ConvHead<S>>,
        cell: CellParams<S>,
        solver: SolverConfig,
        src_start: usize,
        seed: u64,
    ) -> Result<Self, CellError> {
        let d = cell.state_dim;
        if src_start >= d {
            return Err(CellError::Config(format!(
                "readout start {src_start} out of range for state dim {d}"
            )));
        }
        if let Some(head) = &conv {
            if head.feature_dim() != cell.input_dim {
                return Err(CellError::Shape(format!(
                    "conv feature dim {} vs cell input dim {}",
                    head.feature_dim(),
                    cell.input_dim
                )));
            }
        }
        let src_dim = d - src_start;
        let mut readout = Readout::zeros(src_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let scale = 1.0 / (src_dim as f64).sqrt();
        for v in readout.w.data_mut() {
            *v = S::cast((2.0 * rng_unit(&mut rng)) * scale);
        }
        Ok(Policy { conv, cell, readout, solver, src_start })
    }

    /// Fresh state at time zero.
    pub fn state(&self) -> CellState<S> {
        CellState::zero(&self.cell)
    }

    /// Run the conv head on a frame; identity error if this policy takes
    /// pre-extracted features instead of images.
    pub fn features(&self, img: &RgbImage) -> Result<(Vec<S>, ConvCache<S>), CellError> {
        let head = self
            .conv
            .as_ref()
            .ok_or_else(|| CellError::Config("policy has no conv head".into()))?;
        let input = head.image_to_input(img)?;
        head.forward(input)
    }

    /// Advance one frame and emit the control (no caches kept).
    pub fn step(&self, state: &mut CellState<S>, input: &[S]) -> Result<[S; CONTROL_DIM], CellError> {
        *state = crate::cell::solver::step(&self.cell, state, input, &self.solver)?;
        Ok(self.readout.forward(&state.x[self.src_start..]))
    }

    /// Advance one frame keeping the caches the backward pass needs.
    pub fn step_cached(
        &self,
        state: &mut CellState<S>,
        input: Vec<S>,
        conv: Option<ConvCache<S>>,
    ) -> Result<PolicyStepCache<S>, CellError> {
        let (next, step) =
            crate::cell::solver::step_cached(&self.cell, state, &input, &self.solver)?;
        *state = next;
        let pred = self.readout.forward(&state.x[self.src_start..]);
        Ok(PolicyStepCache { conv, input, step, x_end: state.x.clone(), pred })
    }

    /// Full frame-to-control evaluation for closed-loop flight.
    pub fn act(&self, state: &mut CellState<S>, img: &RgbImage) -> Result<[S; CONTROL_DIM], CellError> {
        let (feat, _) = self.features(img)?;
        self.step(state, &feat)
    }

    pub fn grad_buffer(&self) -> Policy<S> {
        Policy {
            conv: self.conv.as_ref().map(|c| c.grad_buffer()),
            cell: self.cell.grad_buffer(),
            readout: Readout::zeros(self.cell.state_dim - self.src_start),
            solver: self.solver.clone(),
            src_start: self.src_start,
        }
    }

    /// Learnable scalars (excludes masked-out synapses).
    pub fn param_count(&self) -> usize {
        let mut n = self.conv.as_ref().map_or(0, |c| c.param_count());
        n += self.cell.param_count();
        n += self.readout.w.data().len() + self.readout.b.len();
        n
    }

    /// Length of the flat storage vector ([`Policy::flatten`]); for wired
    /// cells this exceeds [`Policy::param_count`] by the masked entries,
    /// which are stored (and stay) zero.
    pub fn flat_len(&self) -> usize {
        let mut n = self.conv.as_ref().map_or(0, |c| c.param_count());
        n += self.cell.flat_len();
        n += self.readout.w.data().len() + self.readout.b.len();
        n
    }

    pub fn visit(&self, f: &mut impl FnMut(&'static str, &[S])) {
        if let Some(c) = &self.conv {
            c.visit(f);
        }
        self.cell.visit(f);
        f("readout.w", self.readout.w.data());
        f("readout.b", &self.readout.b);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&'static str, &mut [S])) {
        if let Some(c) = &mut self.conv {
            c.visit_mut(f);
        }
        self.cell.visit_mut(f);
        f("readout.w", self.readout.w.data_mut());
        f("readout.b", &mut self.readout.b);
    }

    /// Concatenate all trainable tensors in visit order.
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.flat_len());
        self.visit(&mut |_, xs| out.extend_from_slice(xs));
        out
    }

    /// Overwrite all trainable tensors from a flat vector (visit order).
    pub fn assign_from_flat(&mut self, flat: &[S]) -> Result<(), CellError> {
        if flat.len() != self.flat_len() {
            return Err(CellError::Shape(format!(
                "flat vector length {} vs storage length {}",
                flat.len(),
                self.flat_len()
            )));
        }
        let mut at = 0;
        self.visit_mut(&mut |_, xs| {
            xs.copy_from_slice(&flat[at..at + xs.len()]);
            at += xs.len();
        });
        Ok(())
    }

    /// Keep cell time constants positive after a raw optimizer step.
    pub fn project(&mut self) {
        self.cell.project();
    }
}

fn rng_unit(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.random::<f64>() - 0.5
}

/// A vision policy: nav conv head at the given square resolution feeding the
/// cell, readout from the state suffix.
pub fn vision_policy<S: Real>(
    cell: CellParams<S>,
    resolution: usize,
    src_start: usize,
    solver: SolverConfig,
    seed: u64,
) -> Result<Policy<S>, CellError> {
    let head = ConvHead::init(&ConvSpec::nav(resolution, resolution), seed ^ 0x5bd1e995)?;
    Policy::new(Some(head), cell, solver, src_start, seed)
}
