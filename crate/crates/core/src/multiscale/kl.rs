//! Truncated Karhunen-Loève expansion of a Gaussian random field on element centroids.
//!
//! `E(X) = Ê + Σ_k √ζ_k · γ_k(X) · ρ_k`, where `(ζ_k, γ_k)` are the eigenpairs of the
//! squared-exponential covariance `std²·exp(−‖X − X'‖² / (2ℓ²))` sampled at the
//! centroids, ordered by decreasing `ζ_k`, and `ρ_k ~ N(0, 1)` i.i.d.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrfConfig {
    /// Field mean Ê (GPa).
    pub mean: f64,
    /// Pointwise standard deviation (GPa).
    pub std: f64,
    /// Correlation length ℓ (mm).
    pub correlation_length: f64,
    /// Retained modes; `None` keeps the fewest modes reaching `energy` of the trace.
    pub n_modes: Option<usize>,
    pub energy: f64,
    pub seed: u64,
}

impl Default for GrfConfig {
    fn default() -> Self {
        Self {
            mean: 74.0,
            std: 2.0,
            correlation_length: 0.1,
            n_modes: None,
            energy: 0.95,
            seed: 0,
        }
    }
}

impl GrfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.std >= 0.0) || !(self.correlation_length > 0.0) || !self.mean.is_finite() {
            return Err(Error::Config(format!(
                "random field needs std >= 0 and correlation_length > 0 (got {}, {})",
                self.std, self.correlation_length
            )));
        }
        if !(self.energy > 0.0 && self.energy <= 1.0) {
            return Err(Error::Config(format!(
                "energy must lie in (0, 1], got {}",
                self.energy
            )));
        }
        Ok(())
    }
}

/// Eigenbasis of the covariance at a fixed point set.
#[derive(Debug, Clone)]
pub struct KlBasis {
    /// Eigenvalues, descending, negatives clamped to zero.
    pub values: Vec<f64>,
    /// Column `k` holds the unit-norm mode `γ_k` at every point.
    pub modes: DMatrix<f64>,
}

impl KlBasis {
    pub fn new(points: &[[f64; 2]], std: f64, correlation_length: f64) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Ok(Self {
                values: Vec::new(),
                modes: DMatrix::zeros(0, 0),
            });
        }
        let two_l2 = 2.0 * correlation_length * correlation_length;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            std * std * (-(dx * dx + dy * dy) / two_l2).exp()
        });
        let eig = SymmetricEigen::try_new(cov, f64::EPSILON, 0).ok_or_else(|| {
            Error::Eigen(format!(
                "covariance eigendecomposition of size {n} did not converge"
            ))
        })?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let modes = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
        Ok(Self { values, modes })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fewest leading modes whose eigenvalues reach `energy` of the trace.
    pub fn modes_for_energy(&self, energy: f64) -> usize {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return 0;
        }
        let mut acc = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            acc += v;
            if acc >= energy * total {
                return k + 1;
            }
        }
        self.values.len()
    }

    /// One realization with `n_modes` terms and normal weights drawn from `seed`.
    pub fn sample(&self, mean: f64, n_modes: usize, seed: u64) -> Vec<f64> {
        let n = self.values.len();
        let m = n_modes.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let mut field = vec![mean; n];
        for k in 0..m {
            let a = self.values[k].sqrt() * rho[k];
            if a == 0.0 {
                continue;
            }
            for (i, f) in field.iter_mut().enumerate() {
                *f += a * self.modes[(i, k)];
            }
        }
        field
    }
}

/// Field values at `points` for one configuration.
pub fn kl_field(points: &[[f64; 2]], cfg: &GrfConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if cfg.std == 0.0 || cfg.n_modes == Some(0) {
        return Ok(vec![cfg.mean; points.len()]);
    }
    let basis = KlBasis::new(points, cfg.std, cfg.correlation_length)?;
    let m = cfg
        .n_modes
        .unwrap_or_else(|| basis.modes_for_energy(cfg.energy));
    Ok(basis.sample(cfg.mean, m, cfg.seed))
}
