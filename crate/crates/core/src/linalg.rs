//! Minimal dense linear algebra: row-major matrices over [`Real`] plus the
//! handful of vector helpers the cell and training code need. Nothing here is
//! clever; the point is a small, auditable surface with predictable
//! accumulation order so that training runs are bit-reproducible.

use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Wraps an existing row-major buffer. Panics if the length disagrees
    /// with the shape; this is a programming error, not an input error.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length must equal rows * cols");
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut S {
        &mut self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: S) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// `out = self * x`. `mask`, when present, gates each weight entry; it
    /// must share this matrix's shape. Masked-out weights act as exact zeros,
    /// so their stored values never leak into the result.
    pub fn masked_matvec_into(&self, mask: Option<&Mat<S>>, x: &[S], out: &mut [S]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        match mask {
            None => {
                for r in 0..self.rows {
                    let row = self.row(r);
                    let mut acc = S::zero();
                    for c in 0..self.cols {
                        acc += row[c] * x[c];
                    }
                    out[r] = acc;
                }
            }
            Some(m) => {
                debug_assert_eq!((m.rows, m.cols), (self.rows, self.cols));
                for r in 0..self.rows {
                    let row = self.row(r);
                    let mrow = m.row(r);
                    let mut acc = S::zero();
                    for c in 0..self.cols {
                        acc += row[c] * mrow[c] * x[c];
                    }
                    out[r] = acc;
                }
            }
        }
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.rows];
        self.masked_matvec_into(None, x, &mut out);
        out
    }

    /// `out += selfᵀ * y`, the reverse-mode counterpart of
    /// [`Mat::masked_matvec_into`] with the same masking convention.
    pub fn masked_add_tr_matvec(&self, mask: Option<&Mat<S>>, y: &[S], out: &mut [S]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        match mask {
            None => {
                for r in 0..self.rows {
                    let row = self.row(r);
                    let yr = y[r];
                    for c in 0..self.cols {
                        out[c] += row[c] * yr;
                    }
                }
            }
            Some(m) => {
                for r in 0..self.rows {
                    let row = self.row(r);
                    let mrow = m.row(r);
                    let yr = y[r];
                    for c in 0..self.cols {
                        out[c] += row[c] * mrow[c] * yr;
                    }
                }
            }
        }
    }

    /// `self += u * vᵀ`, gated by `mask`. Used to accumulate weight
    /// gradients; gating keeps masked weights at exactly zero gradient.
    pub fn masked_add_outer(&mut self, mask: Option<&Mat<S>>, u: &[S], v: &[S]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        match mask {
            None => {
                for r in 0..self.rows {
                    let ur = u[r];
                    let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
                    for c in 0..self.cols {
                        row[c] += ur * v[c];
                    }
                }
            }
            Some(m) => {
                for r in 0..self.rows {
                    let ur = u[r];
                    let mrow = &m.data[r * self.cols..(r + 1) * self.cols];
                    let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
                    for c in 0..self.cols {
                        row[c] += ur * mrow[c] * v[c];
                    }
                }
            }
        }
    }
}

#[inline]
pub fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = S::zero();
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

#[inline]
pub fn norm<S: Real>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
#[inline]
pub fn axpy<S: Real>(alpha: S, x: &[S], y: &mut [S]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..x.len() {
        y[i] += alpha * x[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_matches_hand_computation() {
        let m = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
    }

    #[test]
    fn transpose_product_is_adjoint_of_forward_product() {
        // <y, A x> == <Aᵀ y, x> for arbitrary fixed vectors.
        let a = Mat::from_fn(4, 3, |r, c| ((r * 3 + c) as f64 * 0.37).sin());
        let x = [0.2, -1.3, 0.8];
        let y = [1.0, -0.5, 0.25, 2.0];
        let ax = a.matvec(&x);
        let mut aty = vec![0.0; 3];
        a.masked_add_tr_matvec(None, &y, &mut aty);
        let lhs = dot(&y, &ax);
        let rhs = dot(&aty, &x);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn mask_gates_every_operation() {
        let w = Mat::from_vec(2, 2, vec![5.0, 7.0, 11.0, 13.0]);
        let mask = Mat::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let mut out = vec![0.0; 2];
        w.masked_matvec_into(Some(&mask), &[1.0, 1.0], &mut out);
        assert_eq!(out, vec![5.0, 13.0]);

        let mut back = vec![0.0; 2];
        w.masked_add_tr_matvec(Some(&mask), &[1.0, 1.0], &mut back);
        assert_eq!(back, vec![5.0, 13.0]);

        let mut grad = Mat::zeros(2, 2);
        grad.masked_add_outer(Some(&mask), &[1.0, 1.0], &[1.0, 1.0]);
        assert_eq!(grad.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn outer_product_accumulates() {
        let mut g = Mat::zeros(2, 2);
        g.masked_add_outer(None, &[1.0, 2.0], &[3.0, 4.0]);
        g.masked_add_outer(None, &[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(g.data(), &[6.0, 8.0, 12.0, 16.0]);
    }
}
