//! Attention maps over the conv head by backward relevance spreading.
//!
//! Working from the deepest layer toward the input: average each layer's
//! rectified activations over channels, upsample the running relevance map
//! to the previous layer's resolution by spreading every value uniformly
//! over the `k x k` window it came from (stride-placed, overlaps summing),
//! and gate it by that layer's own mean activation. The product keeps only
//! image regions that were active at *every* depth, which is what makes the
//! result a usable "where was the network looking" map. The final map is
//! min-max normalized to `[0, 1]`.
//!
//! The scheme needs no gradients and no labels — only the forward
//! activation cache — so it runs on any frame of a flight at negligible
//! cost.

use crate::cell::CellError;
use crate::conv::{ConvCache, ConvHead};
use crate::image::RgbImage;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SaliencyMap {
    pub width: usize,
    pub height: usize,
    /// Row-major, in `[0, 1]`.
    pub values: Vec<f64>,
    /// The pre-normalization map had no contrast (all-equal values); the
    /// stored values are all ones (uniform activity) or all zeros (none).
    pub flat: bool,
}

impl SaliencyMap {
    /// Fraction of total saliency mass inside `region(x, y)`. Returns 0
    /// when the map carries no mass at all.
    pub fn mass_fraction(&self, region: impl Fn(usize, usize) -> bool) -> f64 {
        let mut inside = 0.0;
        let mut total = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.values[y * self.width + x];
                total += v;
                if region(x, y) {
                    inside += v;
                }
            }
        }
        if total < 1e-12 {
            0.0
        } else {
            inside / total
        }
    }

    /// Red-tinted overlay for qualitative inspection.
    pub fn overlay(&self, img: &RgbImage) -> Result<RgbImage, CellError> {
        if img.width != self.width || img.height != self.height {
            return Err(CellError::Shape(format!(
                "overlay: image {}x{} vs map {}x{}",
                img.width, img.height, self.width, self.height
            )));
        }
        let mut out = img.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.values[y * self.width + x];
                let [r, g, b] = img.get(x, y);
                let r = r as f64 + (255.0 - r as f64) * v;
                let g = g as f64 * (1.0 - 0.5 * v);
                let b = b as f64 * (1.0 - 0.5 * v);
                out.set(x, y, [r as u8, g as u8, b as u8]);
            }
        }
        Ok(out)
    }
}

/// Mean over channels of a channel-major activation block.
fn channel_mean<S: Real>(block: &[S], channels: usize, hw: usize) -> Vec<f64> {
    let mut mean = vec![0.0; hw];
    for c in 0..channels {
        for i in 0..hw {
            mean[i] += block[c * hw + i].as_f64();
        }
    }
    let inv = 1.0 / channels as f64;
    mean.iter_mut().for_each(|v| *v *= inv);
    mean
}

/// Spread each coarse value uniformly over its originating `k x k` window;
/// overlapping windows sum.
fn upsample(map: &[f64], oh: usize, ow: usize, k: usize, s: usize, ih: usize, iw: usize) -> Vec<f64> {
    let mut out = vec![0.0; ih * iw];
    for oy in 0..oh {
        for ox in 0..ow {
            let v = map[oy * ow + ox];
            if v == 0.0 {
                continue;
            }
            for ky in 0..k {
                let row = (oy * s + ky) * iw + ox * s;
                for kx in 0..k {
                    out[row + kx] += v;
                }
            }
        }
    }
    out
}

pub fn visual_backprop<S: Real>(
    head: &ConvHead<S>,
    cache: &ConvCache<S>,
) -> Result<SaliencyMap, CellError> {
    let dims = head.out_dims()?;
    let layers = head.layers.len();
    if cache.layer_inputs.len() != layers {
        return Err(CellError::Shape("activation cache does not match the head".into()));
    }

    // mean activation of layer l's output
    let layer_mean = |l: usize| -> Vec<f64> {
        let (c, h, w) = dims[l];
        let block = if l == layers - 1 { &cache.output } else { &cache.layer_inputs[l + 1] };
        channel_mean(block, c, h * w)
    };

    let mut acc = layer_mean(layers - 1);
    for l in (0..layers).rev() {
        let (_, oh, ow) = dims[l];
        let (ih, iw) = if l == 0 {
            (head.input_h, head.input_w)
        } else {
            (dims[l - 1].1, dims[l - 1].2)
        };
        let k = head.layers[l].spec.kernel;
        let s = head.layers[l].spec.stride;
        acc = upsample(&acc, oh, ow, k, s, ih, iw);
        if l > 0 {
            let gate = layer_mean(l - 1);
            for (a, g) in acc.iter_mut().zip(&gate) {
                *a *= g;
            }
        }
    }

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &acc {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let flat = hi - lo < 1e-12;
    if flat {
        let fill = if hi.abs() < 1e-12 { 0.0 } else { 1.0 };
        acc.iter_mut().for_each(|v| *v = fill);
    } else {
        let span = hi - lo;
        acc.iter_mut().for_each(|v| *v = (*v - lo) / span);
    }
    Ok(SaliencyMap { width: head.input_w, height: head.input_h, values: acc, flat })
}
