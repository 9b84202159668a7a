//! Numerical range of a real matrix over real unit vectors.
//!
//! For real `v`, `<v, Qv> = <v, sym(Q) v>`, so the range is exactly the
//! spectral interval of the symmetric part; no boundary tracing is needed.

use faer::Mat;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericalRangeInterval {
    pub low: f64,
    pub high: f64,
}

impl NumericalRangeInterval {
    /// Distance from a real point to the interval; zero inside.
    pub fn dist(&self, z: f64) -> f64 {
        if z < self.low {
            self.low - z
        } else if z > self.high {
            z - self.high
        } else {
            0.0
        }
    }

    pub fn contains(&self, z: f64) -> bool {
        z >= self.low && z <= self.high
    }
}

pub fn numerical_range_interval(q: &Mat<f64>) -> NumericalRangeInterval {
    let n = q.nrows();
    assert_eq!(n, q.ncols(), "numerical range requires a square matrix");
    if n == 0 {
        return NumericalRangeInterval { low: 0.0, high: 0.0 };
    }
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (q[(i, j)] + q[(j, i)]));
    let eig = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigensolve of the symmetric part");
    let s = eig.S();
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for i in 0..n {
        low = low.min(s[i]);
        high = high.max(s[i]);
    }
    NumericalRangeInterval { low, high }
}
