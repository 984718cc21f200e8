//! Symmetric positive definite banded matrices with in-place Cholesky.

use crate::error::{Error, Result};

/// Lower band of an `n × n` SPD matrix; entry `(i, j)`, `i − band ≤ j ≤ i`,
/// is stored at `data[i * (band + 1) + band + j − i]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    band: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedCholesky {
    pub fn zeros(n: usize, band: usize) -> Self {
        let band = band.min(n.saturating_sub(1));
        Self {
            n,
            band,
            data: vec![0.0; n * (band + 1)],
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn band(&self) -> usize {
        self.band
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.band + 1) + self.band + j - i
    }

    /// Adds `v` to entry `(i, j)` with `j ≤ i`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.band);
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.band {
            0.0
        } else {
            self.data[self.at(i, j)]
        }
    }

    /// `L Lᵀ` factorization in place; fails on a non-positive pivot.
    pub fn factor(&mut self) -> Result<()> {
        let b = self.band;
        for i in 0..self.n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(b));
                let mut sum = self.data[self.at(i, j)];
                for k in k0..j {
                    sum -= self.data[self.at(i, k)] * self.data[self.at(j, k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::SingularStiffness(i));
                    }
                    let idx = self.at(i, i);
                    self.data[idx] = sum.sqrt();
                } else {
                    let idx = self.at(i, j);
                    self.data[idx] = sum / self.data[self.at(j, j)];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = rhs` after `factor`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert!(self.factored, "factor() must succeed before solve()");
        let b = self.band;
        let mut y = rhs.to_vec();
        for i in 0..self.n {
            for k in i.saturating_sub(b)..i {
                y[i] -= self.data[self.at(i, k)] * y[k];
            }
            y[i] /= self.data[self.at(i, i)];
        }
        for i in (0..self.n).rev() {
            for k in (i + 1)..(i + b + 1).min(self.n) {
                y[i] -= self.data[self.at(k, i)] * y[k];
            }
            y[i] /= self.data[self.at(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 30;
        let band = 4;
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut m = BandedCholesky::zeros(n, band);
        for i in 0..n {
            for j in i.saturating_sub(band)..=i {
                let v = if i == j {
                    10.0 + i as f64
                } else {
                    ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6
                };
                m.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        assert_eq!(m.get(3, 5), dense[(3, 5)]);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        m.factor().unwrap();
        let x = m.solve(&rhs);
        let oracle = dense.lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn reports_singular_pivot() {
        let mut m = BandedCholesky::zeros(3, 1);
        m.add(0, 0, 1.0);
        m.add(1, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(2, 2, 1.0);
        assert!(matches!(m.factor(), Err(Error::SingularStiffness(1))));
    }
}
