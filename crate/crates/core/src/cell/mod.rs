//! Recurrent cell zoo: liquid time-constant (LTC) cells, continuous-time
//! RNNs, ODE-RNNs, continuous-time GRUs, and a plain LSTM baseline.
//!
//! All five kinds share one parameter container so that training, solvers,
//! serialization, and analysis can be written once. The continuous kinds
//! (`Ltc`, `CtRnn`, `OdeRnn`) define a right-hand side `dx/dt = g(x, u)`
//! integrated by the solvers in [`solver`]; the discrete kinds (`CtGru`,
//! `Lstm`) advance once per frame in [`discrete`].
//!
//! Core dynamics, with `f = tanh(W_r x + W u + b)` elementwise:
//!
//! ```text
//! Ltc:     dx_i/dt = -(1/tau_i + f_i) x_i + f_i attractor_i
//! CtRnn:   dx_i/dt = -x_i/tau_i + f_i
//! OdeRnn:  dx/dt   = tanh(W_r x + b)           (autonomous flow)
//!          x <- tanh(U x + W u + c)            (per-frame jump)
//! ```
//!
//! The gating structure of the LTC makes its effective time constant
//! `tau_i / (1 + tau_i f_i)` input-dependent, which is the property the rest
//! of this crate is built to study.

pub mod discrete;
pub mod dynamics;
pub mod solver;
pub mod wiring;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::Mat;
use crate::scalar::Real;

pub use solver::{SolverConfig, SolverMethod, StateGrad, StepCache};
pub use wiring::{NcpWiring, WiringMasks};

/// Which update rule a [`CellParams`] encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Ltc,
    CtRnn,
    OdeRnn,
    CtGru,
    Lstm,
}

impl CellKind {
    pub const ALL: [CellKind; 5] =
        [CellKind::Ltc, CellKind::CtRnn, CellKind::OdeRnn, CellKind::CtGru, CellKind::Lstm];

    pub fn is_continuous(self) -> bool {
        matches!(self, CellKind::Ltc | CellKind::CtRnn | CellKind::OdeRnn)
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Ltc => "ltc",
            CellKind::CtRnn => "ctrnn",
            CellKind::OdeRnn => "odernn",
            CellKind::CtGru => "ctgru",
            CellKind::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Option<CellKind> {
        CellKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Error, Debug)]
pub enum CellError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("non-finite value in tensor `{tensor}`")]
    NonFinite { tensor: &'static str },
    #[error("state diverged at frame {frame}, integration step {substep}")]
    Diverged { frame: usize, substep: usize },
    #[error("operation `{op}` is not defined for cell kind {kind:?}")]
    Unsupported { op: &'static str, kind: CellKind },
}

/// One affine map `z = W_r h + W u + b` used by the gated kinds for their
/// extra gates (retrieval/storage for CT-GRU; input/forget/output for LSTM).
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams<S> {
    pub w_rec: Mat<S>,
    pub w_in: Mat<S>,
    pub b: Vec<S>,
}

impl<S: Real> GateParams<S> {
    fn zeros(state_dim: usize, input_dim: usize) -> Self {
        GateParams {
            w_rec: Mat::zeros(state_dim, state_dim),
            w_in: Mat::zeros(state_dim, input_dim),
            b: vec![S::zero(); state_dim],
        }
    }

    /// Pre-activation `W_r h + W u + b`.
    fn affine(&self, h: &[S], u: &[S]) -> Vec<S> {
        let mut z = self.w_rec.matvec(h);
        let mut zu = vec![S::zero(); z.len()];
        self.w_in.masked_matvec_into(None, u, &mut zu);
        for i in 0..z.len() {
            z[i] += zu[i] + self.b[i];
        }
        z
    }
}

/// Kind-specific parameter tensors beyond the shared core.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtraParams<S> {
    /// `Ltc` and `CtRnn` need nothing extra.
    None,
    /// Jump map for `OdeRnn`: `x <- tanh(jump_w_rec x + w_in u + jump_b)`.
    /// The input weights live in the shared `w_in` slot.
    OdeRnn { jump_w_rec: Mat<S>, jump_b: Vec<S> },
    /// CT-GRU gates plus the fixed log time-scale bank (`ln T_k`).
    CtGru { retrieval: GateParams<S>, storage: GateParams<S>, log_scales: Vec<S> },
    /// LSTM gates; the candidate (`g`) gate lives in the shared core slots.
    Lstm { input_gate: GateParams<S>, forget_gate: GateParams<S>, output_gate: GateParams<S> },
}

/// Parameters of a single recurrent cell.
///
/// The "core" tensors `w_rec`, `w_in`, `b` are interpreted per kind: the
/// tanh drive for the continuous kinds, the candidate gate for `CtGru` and
/// `Lstm`. `tau` and `attractor` are live only for the kinds whose dynamics
/// reference them (see module docs); for the others they exist but are
/// frozen at 1 and excluded from counting, training, and serialization.
///
/// Optional binary masks implement structured wiring. A masked weight is an
/// exact zero everywhere it is used — forward products, gradients, and
/// finite differences all agree that it carries nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct CellParams<S> {
    pub kind: CellKind,
    pub state_dim: usize,
    pub input_dim: usize,
    /// Per-neuron time constants, strictly positive.
    pub tau: Vec<S>,
    /// Per-neuron attractor level the gated drive pulls toward (`Ltc` only).
    pub attractor: Vec<S>,
    pub w_rec: Mat<S>,
    pub w_in: Mat<S>,
    pub b: Vec<S>,
    /// Binary mask over `w_rec` (1 keeps a synapse); `None` means dense.
    pub rec_mask: Option<Mat<S>>,
    /// Binary mask over `w_in`.
    pub in_mask: Option<Mat<S>>,
    pub extra: ExtraParams<S>,
}

/// Number of time scales in the CT-GRU trace bank.
pub const CTGRU_SCALES: usize = 6;
/// Shortest and longest CT-GRU trace half-lives, in seconds.
pub const CTGRU_SCALE_RANGE: (f64, f64) = (0.05, 16.0);

/// Log-spaced CT-GRU time scales `T_1..T_K` returned as `ln T_k`.
pub fn ctgru_log_scales<S: Real>() -> Vec<S> {
    let (lo, hi) = CTGRU_SCALE_RANGE;
    let k = CTGRU_SCALES;
    (0..k)
        .map(|i| {
            let t = lo * (hi / lo).powf(i as f64 / (k - 1) as f64);
            S::cast(t.ln())
        })
        .collect()
}

impl<S: Real> CellParams<S> {
    /// All-zero parameters of the given shape (taus at 1 so the container is
    /// valid from the start). Also the gradient-accumulator constructor.
    pub fn zeros(kind: CellKind, state_dim: usize, input_dim: usize) -> Self {
        let extra = match kind {
            CellKind::Ltc | CellKind::CtRnn => ExtraParams::None,
            CellKind::OdeRnn => ExtraParams::OdeRnn {
                jump_w_rec: Mat::zeros(state_dim, state_dim),
                jump_b: vec![S::zero(); state_dim],
            },
            CellKind::CtGru => ExtraParams::CtGru {
                retrieval: GateParams::zeros(state_dim, input_dim),
                storage: GateParams::zeros(state_dim, input_dim),
                log_scales: ctgru_log_scales(),
            },
            CellKind::Lstm => ExtraParams::Lstm {
                input_gate: GateParams::zeros(state_dim, input_dim),
                forget_gate: GateParams::zeros(state_dim, input_dim),
                output_gate: GateParams::zeros(state_dim, input_dim),
            },
        };
        CellParams {
            kind,
            state_dim,
            input_dim,
            tau: vec![S::one(); state_dim],
            attractor: vec![S::zero(); state_dim],
            w_rec: Mat::zeros(state_dim, state_dim),
            w_in: Mat::zeros(state_dim, input_dim),
            b: vec![S::zero(); state_dim],
            rec_mask: None,
            in_mask: None,
            extra,
        }
    }

    /// Same shapes and masks, all trainable values zeroed. Gradient buffer.
    pub fn grad_buffer(&self) -> Self {
        let mut g = CellParams::zeros(self.kind, self.state_dim, self.input_dim);
        g.rec_mask = self.rec_mask.clone();
        g.in_mask = self.in_mask.clone();
        g.tau.iter_mut().for_each(|t| *t = S::zero());
        g
    }

    /// Whether `tau` enters this kind's dynamics.
    pub fn uses_tau(&self) -> bool {
        matches!(self.kind, CellKind::Ltc | CellKind::CtRnn)
    }

    /// Whether `attractor` enters this kind's dynamics.
    pub fn uses_attractor(&self) -> bool {
        self.kind == CellKind::Ltc
    }

    fn ones_in(mask: &Mat<S>) -> usize {
        mask.data().iter().filter(|&&v| v != S::zero()).count()
    }

    fn live_entries(mat: &Mat<S>, mask: Option<&Mat<S>>) -> usize {
        match mask {
            Some(m) => Self::ones_in(m),
            None => mat.rows() * mat.cols(),
        }
    }

    /// Count of trainable scalars, excluding masked-out weights and tensors
    /// the kind never reads. This is the number reported for size parity.
    pub fn param_count(&self) -> usize {
        let d = self.state_dim;
        let core = Self::live_entries(&self.w_rec, self.rec_mask.as_ref())
            + Self::live_entries(&self.w_in, self.in_mask.as_ref())
            + d;
        let mut n = core;
        if self.uses_tau() {
            n += d;
        }
        if self.uses_attractor() {
            n += d;
        }
        match &self.extra {
            ExtraParams::None => {}
            ExtraParams::OdeRnn { jump_w_rec, jump_b } => {
                n += jump_w_rec.rows() * jump_w_rec.cols() + jump_b.len();
            }
            ExtraParams::CtGru { retrieval, storage, .. } => {
                for g in [retrieval, storage] {
                    n += g.w_rec.rows() * g.w_rec.cols() + g.w_in.rows() * g.w_in.cols() + g.b.len();
                }
            }
            ExtraParams::Lstm { input_gate, forget_gate, output_gate } => {
                for g in [input_gate, forget_gate, output_gate] {
                    n += g.w_rec.rows() * g.w_rec.cols() + g.w_in.rows() * g.w_in.cols() + g.b.len();
                }
            }
        }
        n
    }

    /// Total length of the visited (dense) storage, including masked-out
    /// entries — the stride optimizers and serializers work with. Masked
    /// entries stay exactly zero (zero init, zero gradient), so the two
    /// counts tell different stories: [`CellParams::param_count`] is what
    /// the cell can learn, `flat_len` is what it stores.
    pub fn flat_len(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, xs| n += xs.len());
        n
    }

    /// Visit every trainable tensor in a fixed order shared with
    /// [`CellParams::visit_mut`]. Optimizers and serializers rely on the
    /// order being identical across calls and across equal-shaped cells.
    pub fn visit(&self, f: &mut impl FnMut(&'static str, &[S])) {
        if self.uses_tau() {
            f("tau", &self.tau);
        }
        if self.uses_attractor() {
            f("attractor", &self.attractor);
        }
        f("w_rec", self.w_rec.data());
        f("w_in", self.w_in.data());
        f("b", &self.b);
        match &self.extra {
            ExtraParams::None => {}
            ExtraParams::OdeRnn { jump_w_rec, jump_b } => {
                f("jump_w_rec", jump_w_rec.data());
                f("jump_b", jump_b);
            }
            ExtraParams::CtGru { retrieval, storage, .. } => {
                for (prefix, g) in [("retr", retrieval), ("stor", storage)] {
                    f(gate_name(prefix, "w_rec"), g.w_rec.data());
                    f(gate_name(prefix, "w_in"), g.w_in.data());
                    f(gate_name(prefix, "b"), &g.b);
                }
            }
            ExtraParams::Lstm { input_gate, forget_gate, output_gate } => {
                for (prefix, g) in
                    [("gate_i", input_gate), ("gate_f", forget_gate), ("gate_o", output_gate)]
                {
                    f(gate_name(prefix, "w_rec"), g.w_rec.data());
                    f(gate_name(prefix, "w_in"), g.w_in.data());
                    f(gate_name(prefix, "b"), &g.b);
                }
            }
        }
    }

    /// Mutable counterpart of [`CellParams::visit`]; same order.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&'static str, &mut [S])) {
        if self.uses_tau() {
            f("tau", &mut self.tau);
        }
        if self.uses_attractor() {
            f("attractor", &mut self.attractor);
        }
        f("w_rec", self.w_rec.data_mut());
        f("w_in", self.w_in.data_mut());
        f("b", &mut self.b);
        match &mut self.extra {
            ExtraParams::None => {}
            ExtraParams::OdeRnn { jump_w_rec, jump_b } => {
                f("jump_w_rec", jump_w_rec.data_mut());
                f("jump_b", jump_b);
            }
            ExtraParams::CtGru { retrieval, storage, .. } => {
                for (prefix, g) in [("retr", retrieval), ("stor", storage)] {
                    f(gate_name(prefix, "w_rec"), g.w_rec.data_mut());
                    f(gate_name(prefix, "w_in"), g.w_in.data_mut());
                    f(gate_name(prefix, "b"), &mut g.b);
                }
            }
            ExtraParams::Lstm { input_gate, forget_gate, output_gate } => {
                for (prefix, g) in
                    [("gate_i", input_gate), ("gate_f", forget_gate), ("gate_o", output_gate)]
                {
                    f(gate_name(prefix, "w_rec"), g.w_rec.data_mut());
                    f(gate_name(prefix, "w_in"), g.w_in.data_mut());
                    f(gate_name(prefix, "b"), &mut g.b);
                }
            }
        }
    }

    /// Dimension of the per-frame auxiliary state: the LSTM carries its cell
    /// vector, the CT-GRU its trace bank, everything else nothing.
    pub fn aux_dim(&self) -> usize {
        match self.kind {
            CellKind::Lstm => self.state_dim,
            CellKind::CtGru => self.state_dim * CTGRU_SCALES,
            _ => 0,
        }
    }

    /// Structural and numeric sanity: coherent shapes, strictly positive
    /// taus, binary masks, and no non-finite entries anywhere.
    pub fn validate(&self) -> Result<(), CellError> {
        let d = self.state_dim;
        let m = self.input_dim;
        if d == 0 {
            return Err(CellError::Config("state_dim must be at least 1".into()));
        }
        let shape_of = |mat: &Mat<S>, rows, cols, what: &str| {
            if mat.rows() != rows || mat.cols() != cols {
                Err(CellError::Shape(format!(
                    "{what}: expected {rows}x{cols}, got {}x{}",
                    mat.rows(),
                    mat.cols()
                )))
            } else {
                Ok(())
            }
        };
        shape_of(&self.w_rec, d, d, "w_rec")?;
        shape_of(&self.w_in, d, m, "w_in")?;
        if self.tau.len() != d || self.attractor.len() != d || self.b.len() != d {
            return Err(CellError::Shape("per-neuron vectors must have state_dim entries".into()));
        }
        if self.tau.iter().any(|t| !(*t > S::zero())) {
            return Err(CellError::Config("all time constants must be strictly positive".into()));
        }
        for (mask, rows, cols, what) in [
            (self.rec_mask.as_ref(), d, d, "rec_mask"),
            (self.in_mask.as_ref(), d, m, "in_mask"),
        ] {
            if let Some(mk) = mask {
                shape_of(mk, rows, cols, what)?;
                if mk.data().iter().any(|&v| v != S::zero() && v != S::one()) {
                    return Err(CellError::Config(format!("{what} must be binary")));
                }
            }
        }
        match (&self.extra, self.kind) {
            (ExtraParams::None, CellKind::Ltc | CellKind::CtRnn) => {}
            (ExtraParams::OdeRnn { jump_w_rec, jump_b }, CellKind::OdeRnn) => {
                shape_of(jump_w_rec, d, d, "jump_w_rec")?;
                if jump_b.len() != d {
                    return Err(CellError::Shape("jump_b must have state_dim entries".into()));
                }
            }
            (ExtraParams::CtGru { retrieval, storage, log_scales }, CellKind::CtGru) => {
                if log_scales.len() != CTGRU_SCALES {
                    return Err(CellError::Shape(format!(
                        "log_scales must have {CTGRU_SCALES} entries"
                    )));
                }
                for g in [retrieval, storage] {
                    shape_of(&g.w_rec, d, d, "gate w_rec")?;
                    shape_of(&g.w_in, d, m, "gate w_in")?;
                    if g.b.len() != d {
                        return Err(CellError::Shape("gate bias must have state_dim entries".into()));
                    }
                }
            }
            (ExtraParams::Lstm { input_gate, forget_gate, output_gate }, CellKind::Lstm) => {
                for g in [input_gate, forget_gate, output_gate] {
                    shape_of(&g.w_rec, d, d, "gate w_rec")?;
                    shape_of(&g.w_in, d, m, "gate w_in")?;
                    if g.b.len() != d {
                        return Err(CellError::Shape("gate bias must have state_dim entries".into()));
                    }
                }
            }
            _ => {
                return Err(CellError::Config(format!(
                    "extra parameters do not match kind {:?}",
                    self.kind
                )))
            }
        }
        let mut bad: Option<&'static str> = None;
        self.visit(&mut |name, data| {
            if bad.is_none() && data.iter().any(|v| !v.is_finite()) {
                bad = Some(name);
            }
        });
        match bad {
            Some(tensor) => Err(CellError::NonFinite { tensor }),
            None => Ok(()),
        }
    }

    /// Clamp time constants away from zero. Call after optimizer updates so
    /// the positivity invariant survives training.
    pub fn project(&mut self) {
        let floor = S::cast(1e-2);
        for t in &mut self.tau {
            if *t < floor {
                *t = floor;
            }
        }
    }
}

fn gate_name(prefix: &str, field: &str) -> &'static str {
    // Fixed tables keep visitor names `&'static str` without allocation.
    match (prefix, field) {
        ("retr", "w_rec") => "retr_w_rec",
        ("retr", "w_in") => "retr_w_in",
        ("retr", "b") => "retr_b",
        ("stor", "w_rec") => "stor_w_rec",
        ("stor", "w_in") => "stor_w_in",
        ("stor", "b") => "stor_b",
        ("gate_i", "w_rec") => "gate_i_w_rec",
        ("gate_i", "w_in") => "gate_i_w_in",
        ("gate_i", "b") => "gate_i_b",
        ("gate_f", "w_rec") => "gate_f_w_rec",
        ("gate_f", "w_in") => "gate_f_w_in",
        ("gate_f", "b") => "gate_f_b",
        ("gate_o", "w_rec") => "gate_o_w_rec",
        ("gate_o", "w_in") => "gate_o_w_in",
        ("gate_o", "b") => "gate_o_b",
        _ => unreachable!("unknown gate tensor name"),
    }
}

/// Hidden state of a cell at a point in time.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState<S> {
    /// Visible state vector (`state_dim` entries). For the CT-GRU this is
    /// the row-sum of the trace bank and is kept consistent with `aux`.
    pub x: Vec<S>,
    /// Elapsed time in seconds.
    pub t: S,
    /// Kind-specific extra state; see [`CellParams::aux_dim`].
    pub aux: Vec<S>,
}

impl<S: Real> CellState<S> {
    pub fn zero(params: &CellParams<S>) -> Self {
        CellState {
            x: vec![S::zero(); params.state_dim],
            t: S::zero(),
            aux: vec![S::zero(); params.aux_dim()],
        }
    }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Time constants are drawn from `U[0.5, 2)` seconds.
pub const TAU_INIT_RANGE: (f64, f64) = (0.5, 2.0);
/// Attractor levels are drawn from `U[-1, 1)`.
pub const ATTRACTOR_INIT_RANGE: (f64, f64) = (-1.0, 1.0);

fn init_vec<S: Real>(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<S> {
    (0..n).map(|_| S::cast(rng.random_range(lo..hi))).collect()
}

/// Fill a weight matrix with `U(-s, s)` entries where `s = 1/sqrt(fan_in)`
/// and `fan_in` is the number of live inputs per row (mask-aware). Masked
/// entries are drawn and then zeroed so that masked and unmasked cells of
/// the same seed stay aligned draw-for-draw.
fn init_weights<S: Real>(rng: &mut ChaCha8Rng, mat: &mut Mat<S>, mask: Option<&Mat<S>>) {
    let cols = mat.cols();
    for r in 0..mat.rows() {
        let fan_in = match mask {
            Some(m) => m.row(r).iter().filter(|&&v| v != S::zero()).count(),
            None => cols,
        };
        let scale = if fan_in == 0 { 0.0 } else { 1.0 / (fan_in as f64).sqrt() };
        for c in 0..cols {
            let v = (2.0 * rng.random::<f64>() - 1.0) * scale;
            let keep = mask.map_or(true, |m| m.at(r, c) != S::zero());
            *mat.at_mut(r, c) = if keep { S::cast(v) } else { S::zero() };
        }
    }
}

fn init_gate<S: Real>(rng: &mut ChaCha8Rng, gate: &mut GateParams<S>) {
    init_weights(rng, &mut gate.w_rec, None);
    init_weights(rng, &mut gate.w_in, None);
    // biases stay zero
}

/// Randomly initialize a dense cell of the given kind and shape.
pub fn init_cell<S: Real>(
    kind: CellKind,
    state_dim: usize,
    input_dim: usize,
    seed: u64,
) -> CellParams<S> {
    let mut params = CellParams::zeros(kind, state_dim, input_dim);
    init_cell_in_place(&mut params, seed);
    params
}

/// Initialize an NCP-wired LTC cell: the wiring fixes which synapses exist,
/// initialization fixes their strengths.
pub fn init_ncp<S: Real>(wiring: &NcpWiring, seed: u64) -> Result<CellParams<S>, CellError> {
    let masks = wiring.build_masks::<S>()?;
    let mut params = CellParams::zeros(CellKind::Ltc, masks.state_dim(), wiring.sensory);
    params.rec_mask = Some(masks.recurrent);
    params.in_mask = Some(masks.input);
    init_cell_in_place(&mut params, seed);
    Ok(params)
}

fn init_cell_in_place<S: Real>(params: &mut CellParams<S>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.state_dim;
    // Only tensors the kind actually reads get randomized; dead slots keep
    // their construction defaults so equal live parameters mean equal cells.
    if params.uses_tau() {
        params.tau = init_vec(&mut rng, d, TAU_INIT_RANGE.0, TAU_INIT_RANGE.1);
    }
    if params.uses_attractor() {
        params.attractor = init_vec(&mut rng, d, ATTRACTOR_INIT_RANGE.0, ATTRACTOR_INIT_RANGE.1);
    }
    let rec_mask = params.rec_mask.clone();
    let in_mask = params.in_mask.clone();
    init_weights(&mut rng, &mut params.w_rec, rec_mask.as_ref());
    init_weights(&mut rng, &mut params.w_in, in_mask.as_ref());
    match &mut params.extra {
        ExtraParams::None => {}
        ExtraParams::OdeRnn { jump_w_rec, .. } => init_weights(&mut rng, jump_w_rec, None),
        ExtraParams::CtGru { retrieval, storage, .. } => {
            init_gate(&mut rng, retrieval);
            init_gate(&mut rng, storage);
        }
        ExtraParams::Lstm { input_gate, forget_gate, output_gate } => {
            init_gate(&mut rng, input_gate);
            init_gate(&mut rng, forget_gate);
            init_gate(&mut rng, output_gate);
        }
    }
}

// ---------------------------------------------------------------------------
// Size-parity construction
// ---------------------------------------------------------------------------

/// Trainable-parameter count of a dense cell of `kind` with `d` neurons.
pub fn dense_param_count(kind: CellKind, d: usize, m: usize) -> usize {
    match kind {
        CellKind::Ltc => d * d + d * m + 3 * d,
        CellKind::CtRnn => d * d + d * m + 2 * d,
        CellKind::OdeRnn => 2 * d * d + d * m + 2 * d,
        CellKind::CtGru => 3 * (d * d + d * m + d),
        CellKind::Lstm => 4 * (d * d + d * m + d),
    }
}

/// Pick a state dimension for `kind` whose dense parameter count sits within
/// `tolerance` (relative) of a dense LTC with `nominal` neurons, then build
/// it. Architectures compared in the benchmark go through this so that none
/// of them wins by sheer size.
pub fn build_size_matched<S: Real>(
    kind: CellKind,
    nominal: usize,
    input_dim: usize,
    tolerance: f64,
    seed: u64,
) -> Result<CellParams<S>, CellError> {
    let target = dense_param_count(CellKind::Ltc, nominal, input_dim) as f64;
    let mut best: Option<(usize, f64)> = None;
    for d in 1..=nominal * 4 {
        let n = dense_param_count(kind, d, input_dim) as f64;
        let err = (n - target).abs() / target;
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((d, err));
        }
    }
    let (d, err) = best.expect("non-empty search range");
    if err > tolerance {
        return Err(CellError::Config(format!(
            "no {:?} size lands within {:.0}% of {} parameters (best: {} neurons, {:.1}% off)",
            kind,
            tolerance * 100.0,
            target,
            d,
            err * 100.0
        )));
    }
    Ok(init_cell(kind, d, input_dim, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_validate_for_every_kind() {
        for kind in CellKind::ALL {
            let p: CellParams<f64> = CellParams::zeros(kind, 5, 3);
            p.validate().unwrap();
            assert_eq!(p.aux_dim(), match kind {
                CellKind::Lstm => 5,
                CellKind::CtGru => 30,
                _ => 0,
            });
        }
    }

    #[test]
    fn init_is_deterministic_and_valid() {
        for kind in CellKind::ALL {
            let a: CellParams<f64> = init_cell(kind, 7, 4, 42);
            let b: CellParams<f64> = init_cell(kind, 7, 4, 42);
            let c: CellParams<f64> = init_cell(kind, 7, 4, 43);
            assert_eq!(a, b, "same seed must reproduce {kind:?} bit for bit");
            assert_ne!(a, c, "different seeds should differ for {kind:?}");
            a.validate().unwrap();
            for t in &a.tau {
                assert!((0.5..2.0).contains(t));
            }
        }
    }

    #[test]
    fn param_count_matches_dense_formula() {
        for kind in CellKind::ALL {
            let p: CellParams<f64> = CellParams::zeros(kind, 6, 4);
            assert_eq!(p.param_count(), dense_param_count(kind, 6, 4), "{kind:?}");
        }
    }

    #[test]
    fn visitor_total_length_covers_dense_count() {
        for kind in CellKind::ALL {
            let p: CellParams<f64> = CellParams::zeros(kind, 6, 4);
            let mut total = 0;
            p.visit(&mut |_, data| total += data.len());
            assert_eq!(total, dense_param_count(kind, 6, 4), "{kind:?}");
        }
    }

    #[test]
    fn visit_orders_agree() {
        for kind in CellKind::ALL {
            let mut p: CellParams<f64> = init_cell(kind, 4, 3, 9);
            let mut names = Vec::new();
            p.visit(&mut |n, _| names.push(n));
            let mut names_mut = Vec::new();
            p.visit_mut(&mut |n, _| names_mut.push(n));
            assert_eq!(names, names_mut);
        }
    }

    #[test]
    fn validation_rejects_bad_tau_and_nan() {
        let mut p: CellParams<f64> = init_cell(CellKind::Ltc, 4, 2, 0);
        p.tau[2] = 0.0;
        assert!(matches!(p.validate(), Err(CellError::Config(_))));
        p.tau[2] = 1.0;
        *p.w_rec.at_mut(1, 1) = f64::NAN;
        assert!(matches!(p.validate(), Err(CellError::NonFinite { tensor: "w_rec" })));
    }

    #[test]
    fn ctgru_scales_are_log_spaced_endpoints() {
        let ls: Vec<f64> = ctgru_log_scales();
        assert_eq!(ls.len(), CTGRU_SCALES);
        assert!((ls[0].exp() - 0.05).abs() < 1e-12);
        assert!((ls[CTGRU_SCALES - 1].exp() - 16.0).abs() < 1e-12);
        let r0 = ls[1] - ls[0];
        for w in ls.windows(2) {
            assert!((w[1] - w[0] - r0).abs() < 1e-12, "uniform in log space");
        }
    }

    #[test]
    fn size_matching_lands_within_tolerance() {
        let m = 32;
        let target = dense_param_count(CellKind::Ltc, 32, m);
        assert_eq!(target, 2144);
        for kind in CellKind::ALL {
            let p: CellParams<f64> = build_size_matched(kind, 32, m, 0.15, 1).unwrap();
            let n = p.param_count();
            let rel = (n as f64 - target as f64).abs() / target as f64;
            assert!(
                rel <= 0.15,
                "{kind:?}: {n} parameters vs target {target} ({:.1}% off)",
                rel * 100.0
            );
        }
    }

    #[test]
    fn size_matching_reports_impossible_budgets() {
        // With a huge input dimension even one LSTM neuron overshoots a tiny
        // LTC budget, so no size can land inside the tolerance band.
        let err = build_size_matched::<f64>(CellKind::Lstm, 1, 400, 0.15, 0);
        assert!(matches!(err, Err(CellError::Config(_))));
    }
}
