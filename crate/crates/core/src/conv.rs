//! Strided convolutional feature extractor for camera frames.
//!
//! Four rectified conv layers (no padding, no pooling) flatten into the
//! feature vector the recurrent cell consumes. The layer schedule is
//! resolution-parametric: the same filters/kernels/strides stack that
//! produces a 16,168-parameter head at 256×256 input yields a 32-wide
//! feature at the 64×64 working resolution.
//!
//! Activations are laid out channel-major (`c*h*w + y*w + x`), weights as
//! `out_ch × in_ch × k × k`. The backward pass is hand-written and pinned
//! against finite differences in the tests below.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cell::CellError;
use crate::image::RgbImage;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub input_h: usize,
    pub input_w: usize,
    pub input_ch: usize,
    pub layers: Vec<ConvLayerSpec>,
}

impl ConvSpec {
    /// The navigation head: filters 16/32/64/8, kernels 5/3/2/2, strides
    /// 3/2/2/2 over RGB input.
    pub fn nav(input_h: usize, input_w: usize) -> Self {
        ConvSpec {
            input_h,
            input_w,
            input_ch: 3,
            layers: vec![
                ConvLayerSpec { filters: 16, kernel: 5, stride: 3 },
                ConvLayerSpec { filters: 32, kernel: 3, stride: 2 },
                ConvLayerSpec { filters: 64, kernel: 2, stride: 2 },
                ConvLayerSpec { filters: 8, kernel: 2, stride: 2 },
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<S> {
    pub spec: ConvLayerSpec,
    pub in_ch: usize,
    /// `filters × in_ch × kernel × kernel`, row-major.
    pub w: Vec<S>,
    pub b: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvHead<S> {
    pub input_h: usize,
    pub input_w: usize,
    pub input_ch: usize,
    pub layers: Vec<ConvLayer<S>>,
}

/// Per-frame activation record: the input of every layer plus the final
/// output, all post-rectifier (the first entry is the normalized image).
#[derive(Clone, Debug)]
pub struct ConvCache<S> {
    pub layer_inputs: Vec<Vec<S>>,
    pub output: Vec<S>,
}

const LAYER_NAMES_W: [&str; 8] = [
    "conv0.w", "conv1.w", "conv2.w", "conv3.w", "conv4.w", "conv5.w", "conv6.w", "conv7.w",
];
const LAYER_NAMES_B: [&str; 8] = [
    "conv0.b", "conv1.b", "conv2.b", "conv3.b", "conv4.b", "conv5.b", "conv6.b", "conv7.b",
];

impl<S: Real> ConvHead<S> {
    /// Build with zero weights (gradient-buffer shape).
    pub fn zeros(spec: &ConvSpec) -> Result<Self, CellError> {
        if spec.layers.is_empty() || spec.layers.len() > LAYER_NAMES_W.len() {
            return Err(CellError::Config(format!(
                "conv head needs 1..={} layers",
                LAYER_NAMES_W.len()
            )));
        }
        let mut layers = Vec::new();
        let mut in_ch = spec.input_ch;
        for ls in &spec.layers {
            if ls.filters == 0 || ls.kernel == 0 || ls.stride == 0 {
                return Err(CellError::Config("conv layer sizes must be positive".into()));
            }
            layers.push(ConvLayer {
                spec: *ls,
                in_ch,
                w: vec![S::zero(); ls.filters * in_ch * ls.kernel * ls.kernel],
                b: vec![S::zero(); ls.filters],
            });
            in_ch = ls.filters;
        }
        let head = ConvHead { input_h: spec.input_h, input_w: spec.input_w, input_ch: spec.input_ch, layers };
        head.out_dims()?; // validates all spatial dims stay >= 1
        Ok(head)
    }

    /// Random initialization: uniform `±1/sqrt(in_ch * k * k)`, zero biases.
    pub fn init(spec: &ConvSpec, seed: u64) -> Result<Self, CellError> {
        let mut head = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut head.layers {
            let fan_in = layer.in_ch * layer.spec.kernel * layer.spec.kernel;
            let scale = 1.0 / (fan_in as f64).sqrt();
            for w in &mut layer.w {
                *w = S::cast((2.0 * rng.random::<f64>() - 1.0) * scale);
            }
        }
        Ok(head)
    }

    pub fn grad_buffer(&self) -> Self {
        let mut g = self.clone();
        for layer in &mut g.layers {
            layer.w.iter_mut().for_each(|v| *v = S::zero());
            layer.b.iter_mut().for_each(|v| *v = S::zero());
        }
        g
    }

    /// Per-layer output shapes `(channels, height, width)`; fails if a layer
    /// shrinks below 1×1 at this input resolution.
    pub fn out_dims(&self) -> Result<Vec<(usize, usize, usize)>, CellError> {
        let mut h = self.input_h;
        let mut w = self.input_w;
        let mut dims = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            let k = layer.spec.kernel;
            let s = layer.spec.stride;
            if h < k || w < k {
                return Err(CellError::Config(format!(
                    "layer {li}: {h}x{w} input smaller than kernel {k}"
                )));
            }
            h = (h - k) / s + 1;
            w = (w - k) / s + 1;
            dims.push((layer.spec.filters, h, w));
        }
        Ok(dims)
    }

    /// Flattened output length.
    pub fn feature_dim(&self) -> usize {
        let dims = self.out_dims().expect("a constructed head has valid dims");
        let (c, h, w) = dims[dims.len() - 1];
        c * h * w
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn visit(&self, f: &mut impl FnMut(&'static str, &[S])) {
        for (i, layer) in self.layers.iter().enumerate() {
            f(LAYER_NAMES_W[i], &layer.w);
            f(LAYER_NAMES_B[i], &layer.b);
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(&'static str, &mut [S])) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            f(LAYER_NAMES_W[i], &mut layer.w);
            f(LAYER_NAMES_B[i], &mut layer.b);
        }
    }

    /// Convert an image to the normalized channel-major input layout.
    pub fn image_to_input(&self, img: &RgbImage) -> Result<Vec<S>, CellError> {
        if img.width != self.input_w || img.height != self.input_h || self.input_ch != 3 {
            return Err(CellError::Shape(format!(
                "image {}x{} vs conv input {}x{}x{}",
                img.width, img.height, self.input_w, self.input_h, self.input_ch
            )));
        }
        let hw = self.input_h * self.input_w;
        let mut out = vec![S::zero(); 3 * hw];
        for y in 0..self.input_h {
            for x in 0..self.input_w {
                let px = img.get(x, y);
                let at = y * self.input_w + x;
                for c in 0..3 {
                    out[c * hw + at] = S::cast(px[c] as f64 / 255.0);
                }
            }
        }
        Ok(out)
    }

    /// Run the stack on a pre-converted input, recording activations.
    pub fn forward(&self, input: Vec<S>) -> Result<(Vec<S>, ConvCache<S>), CellError> {
        let dims = self.out_dims()?;
        if input.len() != self.input_ch * self.input_h * self.input_w {
            return Err(CellError::Shape("conv input length mismatch".into()));
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut cur = input;
        let mut in_h = self.input_h;
        let mut in_w = self.input_w;
        for (li, layer) in self.layers.iter().enumerate() {
            let (oc, oh, ow) = dims[li];
            let mut out = vec![S::zero(); oc * oh * ow];
            conv_forward(layer, &cur, in_h, in_w, oh, ow, &mut out);
            layer_inputs.push(std::mem::replace(&mut cur, out));
            in_h = oh;
            in_w = ow;
        }
        let cache = ConvCache { layer_inputs, output: cur.clone() };
        Ok((cur, cache))
    }

    /// Accumulate parameter gradients for one frame given the loss gradient
    /// at the flattened output.
    pub fn backward(&self, cache: &ConvCache<S>, dfeat: &[S], grads: &mut ConvHead<S>) {
        let dims = self.out_dims().expect("validated at construction");
        let mut dout = dfeat.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let (_, oh, ow) = dims[li];
            let (in_h, in_w) = if li == 0 {
                (self.input_h, self.input_w)
            } else {
                (dims[li - 1].1, dims[li - 1].2)
            };
            let post = if li == self.layers.len() - 1 {
                &cache.output
            } else {
                &cache.layer_inputs[li + 1]
            };
            // rectifier gate
            for (dv, &p) in dout.iter_mut().zip(post.iter()) {
                if p <= S::zero() {
                    *dv = S::zero();
                }
            }
            let input = &cache.layer_inputs[li];
            let mut dinput = vec![S::zero(); input.len()];
            conv_backward(
                layer,
                input,
                in_h,
                in_w,
                oh,
                ow,
                &dout,
                &mut grads.layers[li],
                (li > 0).then_some(&mut dinput),
            );
            dout = dinput;
        }
    }
}

fn conv_forward<S: Real>(
    layer: &ConvLayer<S>,
    input: &[S],
    in_h: usize,
    in_w: usize,
    oh: usize,
    ow: usize,
    out: &mut [S],
) {
    let k = layer.spec.kernel;
    let s = layer.spec.stride;
    let in_hw = in_h * in_w;
    let kk = k * k;
    for oc in 0..layer.spec.filters {
        let w_oc = &layer.w[oc * layer.in_ch * kk..(oc + 1) * layer.in_ch * kk];
        let out_oc = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = layer.b[oc];
                let iy0 = oy * s;
                let ix0 = ox * s;
                for ic in 0..layer.in_ch {
                    let in_ic = &input[ic * in_hw..(ic + 1) * in_hw];
                    let w_ic = &w_oc[ic * kk..(ic + 1) * kk];
                    for ky in 0..k {
                        let row = &in_ic[(iy0 + ky) * in_w + ix0..(iy0 + ky) * in_w + ix0 + k];
                        let wrow = &w_ic[ky * k..ky * k + k];
                        for kx in 0..k {
                            acc += wrow[kx] * row[kx];
                        }
                    }
                }
                out_oc[oy * ow + ox] = if acc > S::zero() { acc } else { S::zero() };
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<S: Real>(
    layer: &ConvLayer<S>,
    input: &[S],
    in_h: usize,
    in_w: usize,
    oh: usize,
    ow: usize,
    dout: &[S],
    grads: &mut ConvLayer<S>,
    mut dinput: Option<&mut Vec<S>>,
) {
    let k = layer.spec.kernel;
    let s = layer.spec.stride;
    let in_hw = in_h * in_w;
    let kk = k * k;
    for oc in 0..layer.spec.filters {
        let w_oc = &layer.w[oc * layer.in_ch * kk..(oc + 1) * layer.in_ch * kk];
        let gw_oc = &mut grads.w[oc * layer.in_ch * kk..(oc + 1) * layer.in_ch * kk];
        for oy in 0..oh {
            for ox in 0..ow {
                let d = dout[oc * oh * ow + oy * ow + ox];
                if d == S::zero() {
                    continue;
                }
                grads.b[oc] += d;
                let iy0 = oy * s;
                let ix0 = ox * s;
                for ic in 0..layer.in_ch {
                    let in_base = ic * in_hw;
                    let w_ic = &w_oc[ic * kk..(ic + 1) * kk];
                    let gw_ic = &mut gw_oc[ic * kk..(ic + 1) * kk];
                    for ky in 0..k {
                        let in_row = (iy0 + ky) * in_w + ix0;
                        for kx in 0..k {
                            gw_ic[ky * k + kx] += d * input[in_base + in_row + kx];
                        }
                    }
                    if let Some(di) = dinput.as_deref_mut() {
                        for ky in 0..k {
                            let in_row = (iy0 + ky) * in_w + ix0;
                            for kx in 0..k {
                                di[in_base + in_row + kx] += d * w_ic[ky * k + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}
