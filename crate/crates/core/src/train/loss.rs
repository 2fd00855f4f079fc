//! Cosine-direction loss between predicted and demonstrated motion.
//!
//! ```text
//! L(p, y) = - (p . y) / (|p| |y|)
//! ```
//!
//! Only the direction of the control matters (speed is fixed downstream),
//! so the loss is scale-invariant in both arguments. When either vector is
//! numerically zero the cosine is undefined; those frames contribute zero
//! loss and zero gradient and are counted so callers can report them.

use crate::policy::CONTROL_DIM;
use crate::scalar::Real;

/// Vectors shorter than this are treated as directionless.
pub const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct FrameLoss<S> {
    pub value: S,
    /// d value / d pred.
    pub grad: [S; CONTROL_DIM],
    pub degenerate: bool,
}

pub fn cosine_loss<S: Real>(pred: &[S; CONTROL_DIM], label: &[S; CONTROL_DIM]) -> FrameLoss<S> {
    let dot = |a: &[S; CONTROL_DIM], b: &[S; CONTROL_DIM]| -> S {
        let mut acc = S::zero();
        for i in 0..CONTROL_DIM {
            acc += a[i] * b[i];
        }
        acc
    };
    let np = dot(pred, pred).sqrt();
    let ny = dot(label, label).sqrt();
    let eps = S::cast(DEGENERATE_NORM);
    if np < eps || ny < eps {
        return FrameLoss { value: S::zero(), grad: [S::zero(); CONTROL_DIM], degenerate: true };
    }
    let pd = dot(pred, label);
    let cos = pd / (np * ny);
    let mut grad = [S::zero(); CONTROL_DIM];
    // dL/dp_i = -y_i/(|p||y|) + cos * p_i/|p|^2
    for i in 0..CONTROL_DIM {
        grad[i] = -label[i] / (np * ny) + cos * pred[i] / (np * np);
    }
    FrameLoss { value: -cos, grad, degenerate: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_vectors_score_minus_one_regardless_of_scale() {
        let l = cosine_loss::<f64>(&[0.4, 0.0, -0.2], &[2.0, 0.0, -1.0]);
        assert!((l.value - -1.0).abs() < 1e-12);
        let l = cosine_loss::<f64>(&[-1.0, 0.5, 0.0], &[2.0, -1.0, 0.0]);
        assert!((l.value - 1.0).abs() < 1e-12, "opposed direction costs +1");
        let l = cosine_loss::<f64>(&[1.0, 0.0, 0.0], &[0.0, 3.0, 0.0]);
        assert!(l.value.abs() < 1e-12, "orthogonal is neutral");
    }

    #[test]
    fn degenerate_prediction_is_flagged_and_gradient_free() {
        let l = cosine_loss::<f64>(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert!(l.degenerate);
        assert_eq!(l.value, 0.0);
        assert_eq!(l.grad, [0.0; 3]);
        let l = cosine_loss::<f64>(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        assert!(l.degenerate, "zero label is also directionless");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let label = [0.3, -1.2, 0.7];
        let preds: [[f64; 3]; 3] =
            [[1.0, 0.2, -0.5], [-0.3, -0.4, 0.9], [0.01, 0.02, 0.03]];
        for pred in preds {
            let l = cosine_loss(&pred, &label);
            for i in 0..3 {
                let eps = 1e-7;
                let mut hi = pred;
                hi[i] += eps;
                let mut lo = pred;
                lo[i] -= eps;
                let fd =
                    (cosine_loss(&hi, &label).value - cosine_loss(&lo, &label).value) / (2.0 * eps);
                assert!(
                    (fd - l.grad[i]).abs() < 1e-6 * fd.abs().max(1.0),
                    "component {i}: fd {fd} vs {g}",
                    g = l.grad[i]
                );
            }
        }
    }
}
