//! Discrete per-frame updates: the continuous-time GRU and a standard LSTM.
//!
//! The CT-GRU replaces the single GRU memory with a bank of traces at
//! `K` log-spaced time scales `T_1..T_K`. Writing `lt_k = ln T_k` and given
//! elapsed time `dt` since the previous frame:
//!
//! ```text
//! alpha_r = W_r^r h + W_i^r u + b^r              (retrieval pick)
//! r_ik    = softmax_k( -(alpha_r_i - lt_k)^2 )
//! rho_i   = sum_k r_ik bank_ik                   (retrieved state)
//! q       = tanh(W_r rho + W_i u + b)            (candidate, core slots)
//! alpha_s = W_r^s h + W_i^s u + b^s              (storage pick)
//! s_ik    = softmax_k( -(alpha_s_i - lt_k)^2 )
//! bank'_ik = ((1 - s_ik) bank_ik + s_ik q_i) * exp(-dt / T_k)
//! h'_i    = sum_k bank'_ik
//! ```
//!
//! Retrieval and storage each pick a soft time scale per neuron; every trace
//! decays by its own half-life between frames. The LSTM follows the textbook
//! gate equations with the candidate gate in the core slots and `i`, `f`,
//! `o` gates in the extras.

use super::{CellError, CellParams, CellState, ExtraParams, GateParams, StateGrad, CTGRU_SCALES};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct CtGruCache<S> {
    pub h0: Vec<S>,
    pub bank0: Vec<S>,
    pub alpha_r: Vec<S>,
    pub r: Vec<S>,
    pub rho: Vec<S>,
    pub q: Vec<S>,
    pub alpha_s: Vec<S>,
    pub s: Vec<S>,
    /// Per-scale decay factors `exp(-dt / T_k)` used this frame.
    pub decay: Vec<S>,
}

#[derive(Clone, Debug)]
pub struct LstmCache<S> {
    pub h0: Vec<S>,
    pub c0: Vec<S>,
    pub i: Vec<S>,
    pub f: Vec<S>,
    pub g: Vec<S>,
    pub o: Vec<S>,
    pub tc: Vec<S>,
}

fn sigmoid<S: Real>(z: S) -> S {
    S::one() / (S::one() + (-z).exp())
}

/// Per-neuron softmax over the scale axis of `-(alpha_i - lt_k)^2`.
fn scale_softmax<S: Real>(alpha: &[S], log_scales: &[S], out: &mut [S]) {
    let k = log_scales.len();
    for i in 0..alpha.len() {
        let row = &mut out[i * k..(i + 1) * k];
        let mut max = S::neg_infinity();
        for j in 0..k {
            let d = alpha[i] - log_scales[j];
            row[j] = -(d * d);
            if row[j] > max {
                max = row[j];
            }
        }
        let mut sum = S::zero();
        for j in 0..k {
            row[j] = (row[j] - max).exp();
            sum += row[j];
        }
        for j in 0..k {
            row[j] /= sum;
        }
    }
}

/// Backward through [`scale_softmax`]: given `dL/dweights` for one neuron's
/// row, return `dL/dalpha_i`. The score derivative with respect to alpha is
/// `-2 (alpha_i - lt_k)`.
fn scale_softmax_alpha_grad<S: Real>(
    alpha_i: S,
    log_scales: &[S],
    weights: &[S],
    dweights: &[S],
) -> S {
    let two = S::cast(2.0);
    let mut mean_score_grad = S::zero();
    for j in 0..log_scales.len() {
        mean_score_grad += weights[j] * (-two * (alpha_i - log_scales[j]));
    }
    let mut da = S::zero();
    for j in 0..log_scales.len() {
        let score_grad = -two * (alpha_i - log_scales[j]);
        da += dweights[j] * weights[j] * (score_grad - mean_score_grad);
    }
    da
}

fn ctgru_extras<S>(params: &CellParams<S>) -> (&GateParams<S>, &GateParams<S>, &Vec<S>) {
    match &params.extra {
        ExtraParams::CtGru { retrieval, storage, log_scales } => (retrieval, storage, log_scales),
        _ => unreachable!("CT-GRU step requires CT-GRU extras"),
    }
}

pub fn ctgru_step<S: Real>(
    params: &CellParams<S>,
    state: &CellState<S>,
    input: &[S],
    frame_dt: f64,
) -> Result<(CellState<S>, CtGruCache<S>), CellError> {
    let d = params.state_dim;
    let k = CTGRU_SCALES;
    if state.aux.len() != d * k {
        return Err(CellError::Shape(format!(
            "CT-GRU trace bank has {} entries, expected {}",
            state.aux.len(),
            d * k
        )));
    }
    let (retrieval, storage, log_scales) = ctgru_extras(params);
    let h0 = &state.x;
    let bank0 = &state.aux;

    let alpha_r = retrieval.affine(h0, input);
    let mut r = vec![S::zero(); d * k];
    scale_softmax(&alpha_r, log_scales, &mut r);

    let mut rho = vec![S::zero(); d];
    for i in 0..d {
        for j in 0..k {
            rho[i] += r[i * k + j] * bank0[i * k + j];
        }
    }

    let mut q = params.w_rec.matvec(&rho);
    let mut qu = vec![S::zero(); d];
    params.w_in.masked_matvec_into(None, input, &mut qu);
    for i in 0..d {
        q[i] = (q[i] + qu[i] + params.b[i]).tanh();
    }

    let alpha_s = storage.affine(h0, input);
    let mut s = vec![S::zero(); d * k];
    scale_softmax(&alpha_s, log_scales, &mut s);

    let decay: Vec<S> =
        log_scales.iter().map(|&lt| S::cast((-frame_dt / lt.as_f64().exp()).exp())).collect();

    let mut bank1 = vec![S::zero(); d * k];
    let mut h1 = vec![S::zero(); d];
    for i in 0..d {
        for j in 0..k {
            let idx = i * k + j;
            let mixed = (S::one() - s[idx]) * bank0[idx] + s[idx] * q[i];
            bank1[idx] = mixed * decay[j];
            h1[i] += bank1[idx];
        }
    }

    if !h1.iter().all(|v| v.is_finite()) {
        return Err(CellError::Diverged { frame: 0, substep: 0 });
    }
    let next = CellState { x: h1, t: state.t + S::cast(frame_dt), aux: bank1 };
    let cache = CtGruCache {
        h0: h0.clone(),
        bank0: bank0.clone(),
        alpha_r,
        r,
        rho,
        q,
        alpha_s,
        s,
        decay,
    };
    Ok((next, cache))
}

fn gate_vjp<S: Real>(
    gate: &GateParams<S>,
    ggate: &mut GateParams<S>,
    h: &[S],
    u: &[S],
    dz: &[S],
    dh: &mut [S],
    du: &mut [S],
) {
    gate.w_rec.masked_add_tr_matvec(None, dz, dh);
    gate.w_in.masked_add_tr_matvec(None, dz, du);
    ggate.w_rec.masked_add_outer(None, dz, h);
    ggate.w_in.masked_add_outer(None, dz, u);
    for i in 0..dz.len() {
        ggate.b[i] += dz[i];
    }
}

pub fn ctgru_backward<S: Real>(
    params: &CellParams<S>,
    input: &[S],
    cache: &CtGruCache<S>,
    d_out: &StateGrad<S>,
    grads: &mut CellParams<S>,
    du: &mut [S],
) -> StateGrad<S> {
    let d = params.state_dim;
    let k = CTGRU_SCALES;
    let (retrieval, storage, log_scales) = ctgru_extras(params);

    // h1 is the row-sum of bank1, so its gradient broadcasts over scales.
    let mut dbank1 = d_out.aux.clone();
    if dbank1.is_empty() {
        dbank1 = vec![S::zero(); d * k];
    }
    for i in 0..d {
        for j in 0..k {
            dbank1[i * k + j] += d_out.x[i];
        }
    }

    let mut dbank0 = vec![S::zero(); d * k];
    let mut dq = vec![S::zero(); d];
    let mut ds = vec![S::zero(); d * k];
    for i in 0..d {
        for j in 0..k {
            let idx = i * k + j;
            let dm = dbank1[idx] * cache.decay[j];
            ds[idx] = dm * (cache.q[i] - cache.bank0[idx]);
            dbank0[idx] += dm * (S::one() - cache.s[idx]);
            dq[i] += dm * cache.s[idx];
        }
    }

    let mut dalpha_s = vec![S::zero(); d];
    for i in 0..d {
        dalpha_s[i] = scale_softmax_alpha_grad(
            cache.alpha_s[i],
            log_scales,
            &cache.s[i * k..(i + 1) * k],
            &ds[i * k..(i + 1) * k],
        );
    }

    // candidate: q = tanh(W_r rho + W_i u + b)
    let mut dzq = vec![S::zero(); d];
    for i in 0..d {
        dzq[i] = dq[i] * (S::one() - cache.q[i] * cache.q[i]);
    }
    let mut drho = vec![S::zero(); d];
    params.w_rec.masked_add_tr_matvec(None, &dzq, &mut drho);
    params.w_in.masked_add_tr_matvec(None, &dzq, du);
    grads.w_rec.masked_add_outer(None, &dzq, &cache.rho);
    grads.w_in.masked_add_outer(None, &dzq, input);
    for i in 0..d {
        grads.b[i] += dzq[i];
    }

    // retrieval read: rho_i = sum_k r_ik bank0_ik
    let mut dr = vec![S::zero(); d * k];
    for i in 0..d {
        for j in 0..k {
            let idx = i * k + j;
            dr[idx] = drho[i] * cache.bank0[idx];
            dbank0[idx] += drho[i] * cache.r[idx];
        }
    }
    let mut dalpha_r = vec![S::zero(); d];
    for i in 0..d {
        dalpha_r[i] = scale_softmax_alpha_grad(
            cache.alpha_r[i],
            log_scales,
            &cache.r[i * k..(i + 1) * k],
            &dr[i * k..(i + 1) * k],
        );
    }

    let mut dh0 = vec![S::zero(); d];
    let (g_retr, g_stor) = match &mut grads.extra {
        ExtraParams::CtGru { retrieval, storage, .. } => (retrieval, storage),
        _ => unreachable!("gradient buffer must share the cell's shape"),
    };
    gate_vjp(storage, g_stor, &cache.h0, input, &dalpha_s, &mut dh0, du);
    gate_vjp(retrieval, g_retr, &cache.h0, input, &dalpha_r, &mut dh0, du);

    StateGrad { x: dh0, aux: dbank0 }
}

pub fn lstm_step<S: Real>(
    params: &CellParams<S>,
    state: &CellState<S>,
    input: &[S],
) -> Result<(CellState<S>, LstmCache<S>), CellError> {
    let d = params.state_dim;
    if state.aux.len() != d {
        return Err(CellError::Shape(format!(
            "LSTM cell vector has {} entries, expected {}",
            state.aux.len(),
            d
        )));
    }
    let (gi, gf, go) = match &params.extra {
        ExtraParams::Lstm { input_gate, forget_gate, output_gate } => {
            (input_gate, forget_gate, output_gate)
        }
        _ => unreachable!("LSTM step requires LSTM extras"),
    };
    let h0 = &state.x;
    let c0 = &state.aux;

    let i: Vec<S> = gi.affine(h0, input).into_iter().map(sigmoid).collect();
    let f: Vec<S> = gf.affine(h0, input).into_iter().map(sigmoid).collect();
    let o: Vec<S> = go.affine(h0, input).into_iter().map(sigmoid).collect();
    let mut g = params.w_rec.matvec(h0);
    let mut gu = vec![S::zero(); d];
    params.w_in.masked_matvec_into(None, input, &mut gu);
    for n in 0..d {
        g[n] = (g[n] + gu[n] + params.b[n]).tanh();
    }

    let mut c1 = vec![S::zero(); d];
    let mut tc = vec![S::zero(); d];
    let mut h1 = vec![S::zero(); d];
    for n in 0..d {
        c1[n] = f[n] * c0[n] + i[n] * g[n];
        tc[n] = c1[n].tanh();
        h1[n] = o[n] * tc[n];
    }
    if !h1.iter().all(|v| v.is_finite()) || !c1.iter().all(|v| v.is_finite()) {
        return Err(CellError::Diverged { frame: 0, substep: 0 });
    }
    // Advancing time is the caller's business (frame interval); the LSTM
    // itself is clockless, so we leave t untouched here and let step()
    // overwrite it.
    let next = CellState { x: h1, t: state.t, aux: c1 };
    let cache = LstmCache { h0: h0.clone(), c0: c0.clone(), i, f, g, o, tc };
    Ok((next, cache))
}

pub fn lstm_backward<S: Real>(
    params: &CellParams<S>,
    input: &[S],
    cache: &LstmCache<S>,
    d_out: &StateGrad<S>,
    grads: &mut CellParams<S>,
    du: &mut [S],
) -> StateGrad<S> {
    let d = params.state_dim;
    let (gi, gf, go) = match &params.extra {
        ExtraParams::Lstm { input_gate, forget_gate, output_gate } => {
            (input_gate, forget_gate, output_gate)
        }
        _ => unreachable!(),
    };
    let dh1 = &d_out.x;
    let dc1_ext = &d_out.aux;

    let mut dzo = vec![S::zero(); d];
    let mut dzf = vec![S::zero(); d];
    let mut dzi = vec![S::zero(); d];
    let mut dzg = vec![S::zero(); d];
    let mut dc0 = vec![S::zero(); d];
    for n in 0..d {
        let do_ = dh1[n] * cache.tc[n];
        let dtc = dh1[n] * cache.o[n];
        let dc1 = dc1_ext.get(n).copied().unwrap_or_else(S::zero)
            + dtc * (S::one() - cache.tc[n] * cache.tc[n]);
        let dfg = dc1 * cache.c0[n];
        dc0[n] = dc1 * cache.f[n];
        let di = dc1 * cache.g[n];
        let dg = dc1 * cache.i[n];
        dzo[n] = do_ * cache.o[n] * (S::one() - cache.o[n]);
        dzf[n] = dfg * cache.f[n] * (S::one() - cache.f[n]);
        dzi[n] = di * cache.i[n] * (S::one() - cache.i[n]);
        dzg[n] = dg * (S::one() - cache.g[n] * cache.g[n]);
    }

    let mut dh0 = vec![S::zero(); d];
    params.w_rec.masked_add_tr_matvec(None, &dzg, &mut dh0);
    params.w_in.masked_add_tr_matvec(None, &dzg, du);
    grads.w_rec.masked_add_outer(None, &dzg, &cache.h0);
    grads.w_in.masked_add_outer(None, &dzg, input);
    for n in 0..d {
        grads.b[n] += dzg[n];
    }
    let (g_i, g_f, g_o) = match &mut grads.extra {
        ExtraParams::Lstm { input_gate, forget_gate, output_gate } => {
            (input_gate, forget_gate, output_gate)
        }
        _ => unreachable!(),
    };
    gate_vjp(gi, g_i, &cache.h0, input, &dzi, &mut dh0, du);
    gate_vjp(gf, g_f, &cache.h0, input, &dzf, &mut dh0, du);
    gate_vjp(go, g_o, &cache.h0, input, &dzo, &mut dh0, du);

    StateGrad { x: dh0, aux: dc0 }
}
