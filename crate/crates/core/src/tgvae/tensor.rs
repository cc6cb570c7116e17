//! Minimal dense matrix type for the desk-scale autoencoder.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    /// Gaussian init scaled by 1/√fan_in.
    pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let std = (1.0 / cols as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("valid normal");
        let data = (0..rows * cols)
            .map(|_| S::of_f64(dist.sample(rng)))
            .collect();
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut S {
        &mut self.data[r * self.cols + c]
    }

    /// `y = A x` (+ optional bias).
    pub fn matvec(&self, x: &[S], bias: Option<&[S]>) -> Vec<S> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![S::zero(); self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = S::zero();
            for (a, b) in row.iter().zip(x) {
                acc = acc + *a * *b;
            }
            y[r] = acc + bias.map_or(S::zero(), |b| b[r]);
        }
        y
    }

    /// `y = Aᵀ x`.
    pub fn matvec_t(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![S::zero(); self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (c, a) in row.iter().enumerate() {
                y[c] = y[c] + *a * xr;
            }
        }
        y
    }

    /// Accumulate the outer product `A += scale · u vᵀ`.
    pub fn add_outer(&mut self, u: &[S], v: &[S], scale: S) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            let ur = u[r] * scale;
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (c, a) in row.iter_mut().enumerate() {
                *a = *a + ur * v[c];
            }
        }
    }
}

pub fn axpy<S: Scalar>(y: &mut [S], x: &[S], scale: S) {
    debug_assert_eq!(y.len(), x.len());
    for (a, b) in y.iter_mut().zip(x) {
        *a = *a + scale * *b;
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).fold(S::zero(), |s, v| s + v)
}

pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

pub fn tanh_vec<S: Scalar>(a: &[S]) -> Vec<S> {
    a.iter().map(|v| v.tanh()).collect()
}
