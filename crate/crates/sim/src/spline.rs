//! Natural cubic splines through 3-D knots, parameterized by knot index,
//! with an arc-length table for constant-speed traversal.

use crate::geom::Vec3;
use crate::voxel::VoxelKey;
use crate::SimError;

/// Arc-length table resolution (samples per knot segment).
const SAMPLES_PER_SEGMENT: usize = 32;

/// A C²-continuous cubic curve through a sequence of knots.
///
/// The parameter `t` runs over `[0, n-1]` with `spline.eval(i)` equal to knot
/// `i` exactly. Natural boundary conditions (zero second derivative at both
/// ends) make a two-knot spline a straight segment.
#[derive(Clone, Debug)]
pub struct SplinePath {
    knots: Vec<Vec3>,
    /// Second derivatives of each coordinate at the knots.
    m: [Vec<f64>; 3],
    /// Cumulative arc length at uniform parameter samples.
    arc: Vec<f64>,
    /// Parameter step between consecutive arc samples.
    dt_sample: f64,
}

impl SplinePath {
    /// Fit a natural cubic spline through the knots. At least two knots are
    /// required and consecutive knots must be distinct.
    pub fn fit(knots: Vec<Vec3>) -> Result<SplinePath, SimError> {
        if knots.len() < 2 {
            return Err(SimError::Spline(format!("need >= 2 knots, got {}", knots.len())));
        }
        for (idx, pair) in knots.windows(2).enumerate() {
            if pair[0].dist(pair[1]) < 1e-9 {
                return Err(SimError::Spline(format!(
                    "duplicate consecutive knots at index {idx}"
                )));
            }
        }
        let n = knots.len();
        let coord = |a: usize| -> Vec<f64> {
            knots
                .iter()
                .map(|p| match a {
                    0 => p.x,
                    1 => p.y,
                    _ => p.z,
                })
                .collect()
        };
        let m = [
            second_derivatives(&coord(0)),
            second_derivatives(&coord(1)),
            second_derivatives(&coord(2)),
        ];
        let mut path =
            SplinePath { knots, m, arc: Vec::new(), dt_sample: 1.0 / SAMPLES_PER_SEGMENT as f64 };
        // Tabulate cumulative arc length at uniform parameter samples.
        let samples = (n - 1) * SAMPLES_PER_SEGMENT + 1;
        let mut arc = Vec::with_capacity(samples);
        let mut total = 0.0;
        let mut prev = path.eval(0.0);
        arc.push(0.0);
        for s in 1..samples {
            let p = path.eval(s as f64 * path.dt_sample);
            total += p.dist(prev);
            arc.push(total);
            prev = p;
        }
        path.arc = arc;
        Ok(path)
    }

    /// Fit through voxel centers.
    pub fn through_voxels(path: &[VoxelKey]) -> Result<SplinePath, SimError> {
        SplinePath::fit(path.iter().map(|k| k.center()).collect())
    }

    pub fn knots(&self) -> &[Vec3] {
        &self.knots
    }

    fn max_t(&self) -> f64 {
        (self.knots.len() - 1) as f64
    }

    /// Segment index and local offset for a clamped parameter.
    fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, self.max_t());
        let mut seg = t.floor() as usize;
        if seg >= self.knots.len() - 1 {
            seg = self.knots.len() - 2;
        }
        (seg, t - seg as f64)
    }

    /// Curve position at parameter `t` (clamped to the knot range).
    pub fn eval(&self, t: f64) -> Vec3 {
        let (seg, u) = self.locate(t);
        let v = 1.0 - u;
        let comp = |a: usize| {
            let (y0, y1) = (coord(self.knots[seg], a), coord(self.knots[seg + 1], a));
            let (m0, m1) = (self.m[a][seg], self.m[a][seg + 1]);
            m0 * v * v * v / 6.0
                + m1 * u * u * u / 6.0
                + (y0 - m0 / 6.0) * v
                + (y1 - m1 / 6.0) * u
        };
        Vec3::new(comp(0), comp(1), comp(2))
    }

    /// First derivative with respect to the knot-index parameter.
    pub fn derivative(&self, t: f64) -> Vec3 {
        let (seg, u) = self.locate(t);
        let v = 1.0 - u;
        let comp = |a: usize| {
            let (y0, y1) = (coord(self.knots[seg], a), coord(self.knots[seg + 1], a));
            let (m0, m1) = (self.m[a][seg], self.m[a][seg + 1]);
            -m0 * v * v / 2.0 + m1 * u * u / 2.0 + (y1 - y0) - (m1 - m0) / 6.0
        };
        Vec3::new(comp(0), comp(1), comp(2))
    }

    /// Second derivative with respect to the knot-index parameter.
    pub fn second_derivative(&self, t: f64) -> Vec3 {
        let (seg, u) = self.locate(t);
        let v = 1.0 - u;
        let comp = |a: usize| self.m[a][seg] * v + self.m[a][seg + 1] * u;
        Vec3::new(comp(0), comp(1), comp(2))
    }

    /// Total curve length in meters (from the arc table).
    pub fn total_length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Endpoint of the curve.
    pub fn end(&self) -> Vec3 {
        *self.knots.last().unwrap()
    }

    /// Arc length at a parameter value (piecewise-linear in the table).
    pub fn arc_at_param(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.max_t());
        let x = t / self.dt_sample;
        let idx = (x.floor() as usize).min(self.arc.len() - 2);
        let frac = x - idx as f64;
        self.arc[idx] + (self.arc[idx + 1] - self.arc[idx]) * frac
    }

    /// Parameter at an arc length (clamped to `[0, total_length]`).
    pub fn param_at_arc(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.total_length());
        // Binary search the monotone arc table.
        let mut lo = 0;
        let mut hi = self.arc.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.arc[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = self.arc[hi] - self.arc[lo];
        let frac = if span > 1e-12 { (s - self.arc[lo]) / span } else { 0.0 };
        (lo as f64 + frac) * self.dt_sample
    }

    /// Point at an arc length from the start, clamped to the endpoint.
    pub fn point_at_arc(&self, s: f64) -> Vec3 {
        self.eval(self.param_at_arc(s))
    }

    /// Arc length of the point on the curve nearest to `p` (global search
    /// over the sample table refined by local ternary search).
    pub fn nearest_arc(&self, p: Vec3) -> f64 {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for idx in 0..self.arc.len() {
            let d = self.eval(idx as f64 * self.dt_sample).dist(p);
            if d < best_d {
                best_d = d;
                best = idx;
            }
        }
        let mut lo = (best.saturating_sub(1)) as f64 * self.dt_sample;
        let mut hi = ((best + 1).min(self.arc.len() - 1)) as f64 * self.dt_sample;
        for _ in 0..48 {
            let third = (hi - lo) / 3.0;
            let a = lo + third;
            let b = hi - third;
            if self.eval(a).dist(p) < self.eval(b).dist(p) {
                hi = b;
            } else {
                lo = a;
            }
        }
        self.arc_at_param((lo + hi) / 2.0)
    }
}

fn coord(p: Vec3, a: usize) -> f64 {
    match a {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

/// Second derivatives of the natural cubic spline through `y` at unit knot
/// spacing: tridiagonal system `m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i]
/// + y[i-1])` with `m[0] = m[n-1] = 0`, solved by forward elimination and
/// back-substitution.
fn second_derivatives(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let interior = n - 2;
    let mut diag = vec![4.0; interior];
    let mut rhs: Vec<f64> =
        (1..n - 1).map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1])).collect();
    for i in 1..interior {
        let w = 1.0 / diag[i - 1];
        diag[i] -= w;
        rhs[i] -= w * rhs[i - 1];
    }
    let mut sol = vec![0.0; interior];
    sol[interior - 1] = rhs[interior - 1] / diag[interior - 1];
    for i in (0..interior - 1).rev() {
        sol[i] = (rhs[i] - sol[i + 1]) / diag[i];
    }
    m[1..n - 1].copy_from_slice(&sol);
    m
}
