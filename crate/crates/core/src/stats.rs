//! Sliding-window mean and variance via summed-area tables.
//!
//! Windows are clipped at the image border and normalized by the number of
//! in-image pixels. Values are shifted by the global image mean before
//! accumulation, which keeps the `E[x^2] - E[x]^2` cancellation small and makes
//! the variance map insensitive to a constant offset.

use rayon::prelude::*;

use crate::image::{Image, WindowSpec};
use crate::scalar::Scalar;

/// Per-pixel windowed mean and population variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats {
    pub rows: usize,
    pub cols: usize,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl LocalStats {
    #[inline]
    pub fn mean_at(&self, row: usize, col: usize) -> f64 {
        self.mean[row * self.cols + col]
    }

    #[inline]
    pub fn var_at(&self, row: usize, col: usize) -> f64 {
        self.var[row * self.cols + col]
    }

    /// Arithmetic mean of the variance map.
    pub fn mean_var(&self) -> f64 {
        self.var.iter().sum::<f64>() / self.var.len() as f64
    }
}

/// Summed-area table with a zero guard row and column: `(rows + 1) x (cols + 1)`.
pub(crate) struct Sat {
    stride: usize,
    data: Vec<f64>,
}

impl Sat {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        Self {
            stride: cols + 1,
            data: vec![0.0; (rows + 1) * (cols + 1)],
        }
    }

    /// Rebuild in place from a row-major value function.
    pub(crate) fn fill(&mut self, rows: usize, cols: usize, value: impl Fn(usize) -> f64) {
        let s = self.stride;
        for r in 0..rows {
            let mut run = 0.0;
            for c in 0..cols {
                run += value(r * cols + c);
                self.data[(r + 1) * s + c + 1] = self.data[r * s + c + 1] + run;
            }
        }
    }

    /// Sum over the half-open rectangle `[r0, r1) x [c0, c1)`.
    #[inline]
    pub(crate) fn sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        let s = self.stride;
        self.data[r1 * s + c1] - self.data[r0 * s + c1] - self.data[r1 * s + c0]
            + self.data[r0 * s + c0]
    }
}

pub(crate) fn global_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Windowed mean and population variance of every pixel.
pub fn local_stats<T: Scalar>(img: &Image<T>, w: WindowSpec) -> LocalStats {
    let (rows, cols) = img.dims();
    let values = img.to_f64_vec();
    let shift = global_mean(&values);

    let mut s1 = Sat::new(rows, cols);
    let mut s2 = Sat::new(rows, cols);
    s1.fill(rows, cols, |i| values[i] - shift);
    s2.fill(rows, cols, |i| {
        let d = values[i] - shift;
        d * d
    });

    let mut mean = vec![0.0; rows * cols];
    let mut var = vec![0.0; rows * cols];
    mean.par_chunks_mut(cols)
        .zip(var.par_chunks_mut(cols))
        .enumerate()
        .for_each(|(r, (mrow, vrow))| {
            for c in 0..cols {
                let (r0, r1, c0, c1) = w.clipped(r, c, (rows, cols));
                let n = ((r1 - r0) * (c1 - c0)) as f64;
                let m = s1.sum(r0, r1, c0, c1) / n;
                let v = s2.sum(r0, r1, c0, c1) / n - m * m;
                mrow[c] = m + shift;
                vrow[c] = v.max(0.0);
            }
        });

    LocalStats {
        rows,
        cols,
        mean,
        var,
    }
}
