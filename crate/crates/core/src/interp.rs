//! Cubic Hermite segments and monotone (Fritsch–Carlson) cubic interpolation.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("abscissae must be strictly increasing (violated at index {0})")]
    NotIncreasing(usize),
    #[error("non-finite table entry at index {0}")]
    NonFinite(usize),
}

/// One cubic Hermite segment on `[x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteSegment {
    pub x0: f64,
    pub x1: f64,
    pub p0: f64,
    pub p1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl HermiteSegment {
    pub fn new(x0: f64, x1: f64, p0: f64, p1: f64, d0: f64, d1: f64) -> Self {
        Self { x0, x1, p0, p1, d0, d1 }
    }

    /// Value, first and second derivative at `x` (no clamping to the segment).
    pub fn eval_all(&self, x: f64) -> (f64, f64, f64) {
        let h = self.x1 - self.x0;
        let t = (x - self.x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * self.p0 + h10 * h * self.d0 + h01 * self.p1 + h11 * h * self.d1;

        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let d = (dh00 * self.p0 + dh01 * self.p1) / h + dh10 * self.d0 + dh11 * self.d1;

        let ddh00 = 12.0 * t - 6.0;
        let ddh10 = 6.0 * t - 4.0;
        let ddh01 = -12.0 * t + 6.0;
        let ddh11 = 6.0 * t - 2.0;
        let dd = (ddh00 * self.p0 + ddh01 * self.p1) / (h * h) + (ddh10 * self.d0 + ddh11 * self.d1) / h;
        (v, d, dd)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval_all(x).0
    }

    /// Sufficient Fritsch–Carlson condition for monotonicity of the segment.
    pub fn is_monotone(&self) -> bool {
        let delta = (self.p1 - self.p0) / (self.x1 - self.x0);
        if delta == 0.0 {
            return self.d0 == 0.0 && self.d1 == 0.0;
        }
        let a = self.d0 / delta;
        let b = self.d1 / delta;
        a >= 0.0 && b >= 0.0 && a * a + b * b <= 9.0
    }
}

/// Shape-preserving piecewise cubic through tabulated points.
///
/// Derivatives at the knots follow the Fritsch–Butland weighted harmonic mean,
/// so the interpolant is monotone on every interval where the data are, and has
/// a zero derivative at every interior data extremum. Outside the table the
/// interpolant is continued linearly with the end slope.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(points: &[(f64, f64)]) -> Result<Self, InterpError> {
        if points.len() < 3 {
            return Err(InterpError::TooFewPoints { need: 3, got: points.len() });
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(InterpError::NonFinite(i));
            }
            if i > 0 && x <= points[i - 1].0 {
                return Err(InterpError::NotIncreasing(i));
            }
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let n = xs.len();
        let hs: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let deltas: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / hs[k]).collect();

        let mut ds = vec![0.0; n];
        for k in 1..n - 1 {
            let (dl, dr) = (deltas[k - 1], deltas[k]);
            if dl * dr <= 0.0 {
                ds[k] = 0.0;
            } else {
                let w1 = 2.0 * hs[k] + hs[k - 1];
                let w2 = hs[k] + 2.0 * hs[k - 1];
                ds[k] = (w1 + w2) / (w1 / dl + w2 / dr);
            }
        }
        ds[0] = end_slope(hs[0], hs[1], deltas[0], deltas[1]);
        ds[n - 1] = end_slope(hs[n - 2], hs[n - 3], deltas[n - 2], deltas[n - 3]);
        Ok(Self { xs, ys, ds })
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    fn segment(&self, k: usize) -> HermiteSegment {
        HermiteSegment::new(
            self.xs[k],
            self.xs[k + 1],
            self.ys[k],
            self.ys[k + 1],
            self.ds[k],
            self.ds[k + 1],
        )
    }

    fn locate(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ys[0] + self.ds[0] * (x - self.xs[0]);
        }
        if x > self.xs[n - 1] {
            return self.ys[n - 1] + self.ds[n - 1] * (x - self.xs[n - 1]);
        }
        self.segment(self.locate(x)).eval_all(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ds[0];
        }
        if x > self.xs[n - 1] {
            return self.ds[n - 1];
        }
        self.segment(self.locate(x)).eval_all(x).1
    }

    /// Second derivative; at an interior knot the two one-sided values are averaged.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        if let Ok(k) = self.xs.binary_search_by(|p| p.total_cmp(&x)) {
            let left = if k > 0 { Some(self.segment(k - 1).eval_all(x).2) } else { None };
            let right = if k < n - 1 { Some(self.segment(k).eval_all(x).2) } else { None };
            return match (left, right) {
                (Some(l), Some(r)) => 0.5 * (l + r),
                (Some(v), None) | (None, Some(v)) => v,
                (None, None) => 0.0,
            };
        }
        self.segment(self.locate(x)).eval_all(x).2
    }
}

// Three-point end formula, limited so the end interval stays monotone.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_endpoint_data() {
        let seg = HermiteSegment::new(1.0, 3.0, 2.0, -1.0, 0.5, 0.25);
        let (v0, d0, _) = seg.eval_all(1.0);
        let (v1, d1, _) = seg.eval_all(3.0);
        assert!((v0 - 2.0).abs() < 1e-14 && (d0 - 0.5).abs() < 1e-14);
        assert!((v1 + 1.0).abs() < 1e-14 && (d1 - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hermite_derivatives_match_differences() {
        let seg = HermiteSegment::new(-0.5, 0.0, -0.4, 0.0, 0.0, 1.0);
        let h = 1e-5;
        for &x in &[-0.4, -0.25, -0.1] {
            let (_, d, dd) = seg.eval_all(x);
            let fd = (seg.value(x + h) - seg.value(x - h)) / (2.0 * h);
            let fdd = (seg.eval_all(x + h).1 - seg.eval_all(x - h).1) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8);
            assert!((dd - fdd).abs() < 1e-6);
        }
    }

    #[test]
    fn monotone_cubic_preserves_shape() {
        let pts: Vec<(f64, f64)> = (0..12).map(|i| {
            let x = -3.0 + 0.5 * i as f64;
            (x, x / (1.0 + x * x))
        }).collect();
        let m = MonotoneCubic::new(&pts).unwrap();
        // zero slope at the data extrema (x = ±1)
        assert_eq!(m.derivative(-1.0), 0.0);
        assert_eq!(m.derivative(1.0), 0.0);
        let mut prev = m.value(-1.0);
        for i in 1..=200 {
            let x = -1.0 + 2.0 * i as f64 / 200.0;
            let v = m.value(x);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(MonotoneCubic::new(&[(0.0, 0.0), (1.0, 1.0)]), Err(InterpError::TooFewPoints { .. })));
        assert_eq!(
            MonotoneCubic::new(&[(0.0, 0.0), (1.0, 1.0), (1.0, 2.0)]),
            Err(InterpError::NotIncreasing(2))
        );
    }
}
