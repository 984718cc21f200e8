//! Two-dimensional complex FFT on row-major buffers.
//!
//! The forward transform is unnormalized; the inverse carries the full
//! `1 / (T1·T2)` factor.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    n1: usize,
    n2: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    transposed: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(shape: [usize; 2]) -> Self {
        let [n1, n2] = shape;
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(n2);
        let row_inv = planner.plan_fft_inverse(n2);
        let col_fwd = planner.plan_fft_forward(n1);
        let col_inv = planner.plan_fft_inverse(n1);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            n1,
            n2,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            transposed: vec![Complex64::default(); n1 * n2],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.n1, self.n2]
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.transform(buf, true);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.transform(buf, false);
        let scale = 1.0 / (self.n1 * self.n2) as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
    }

    fn transform(&mut self, buf: &mut [Complex64], forward: bool) {
        assert_eq!(
            buf.len(),
            self.n1 * self.n2,
            "buffer does not match FFT shape"
        );
        let (rows, cols) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        // rows are contiguous runs of length n2
        rows.process_with_scratch(buf, &mut self.scratch);
        transpose(buf, &mut self.transposed, self.n1, self.n2);
        cols.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, buf, self.n2, self.n1);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    for r in 0..rows {
        for c in 0..cols {
            dst[c * rows + r] = src[r * cols + c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64], n1: usize, n2: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n1 * n2];
        for k1 in 0..n1 {
            for k2 in 0..n2 {
                let mut acc = Complex64::default();
                for p in 0..n1 {
                    for q in 0..n2 {
                        let phase = -2.0
                            * std::f64::consts::PI
                            * ((k1 * p) as f64 / n1 as f64 + (k2 * q) as f64 / n2 as f64);
                        acc += x[p * n2 + q] * Complex64::from_polar(1.0, phase);
                    }
                }
                out[k1 * n2 + k2] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_direct_dft_on_rectangular_grid() {
        let (n1, n2) = (6, 5);
        let x: Vec<Complex64> = (0..n1 * n2)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = x.clone();
        let mut fft = Fft2::new([n1, n2]);
        fft.forward(&mut buf);
        let expected = naive_dft(&x, n1, n2);
        for (a, b) in buf.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-12);
        }
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&x) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
