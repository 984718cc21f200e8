//! Spinodal decomposition by semi-implicit spectral Cahn-Hilliard stepping.
//!
//! Free energy `f(c) = c²(1−c)²` with gradient penalty `κ|∇c|²/2`, `κ = w²`.
//! Each step treats the fourth-order term and a linear stabilizer `S∇²c`
//! implicitly and the nonlinear chemical potential explicitly:
//!
//! `ĉ ← (ĉ(1 + dt·M·S·k²) − dt·M·k²·f̂') / (1 + dt·M·(S·k² + κ·k⁴))`.
//!
//! The zero mode is untouched by the update, so the mean is conserved; it is
//! also pinned to its initial value to keep round-off from accumulating.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Microstructure, Origin};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::green::frequency_vector;

/// Upper bound of `f''` on `[0, 1]`.
const STABILIZER: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinodalParams {
    pub steps: usize,
    pub dt: f64,
    /// Interface width `w` (μm); gradient coefficient is `w²`.
    pub interface_width: f64,
    pub mobility: f64,
    /// Pixels with concentration above this are labeled soft (0).
    pub threshold: f64,
    /// Half-width of the uniform noise added to the 0.5 start.
    pub initial_noise_amplitude: f64,
}

impl Default for SpinodalParams {
    fn default() -> Self {
        Self {
            steps: 500,
            dt: 0.1,
            interface_width: 0.3,
            mobility: 1.0,
            threshold: 0.6,
            initial_noise_amplitude: 0.05,
        }
    }
}

impl SpinodalParams {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("interface_width", self.interface_width),
            ("mobility", self.mobility),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.initial_noise_amplitude >= 0.0 && self.initial_noise_amplitude < 0.5) {
            return Err(Error::Config(format!(
                "initial_noise_amplitude must lie in [0, 0.5), got {}",
                self.initial_noise_amplitude
            )));
        }
        Ok(())
    }
}

/// Final concentration field and its mean before and after stepping.
#[derive(Debug, Clone)]
pub struct ChState {
    pub shape: [usize; 2],
    pub concentration: Vec<f64>,
    pub initial_mean: f64,
    pub final_mean: f64,
}

impl ChState {
    pub fn mean_drift(&self) -> f64 {
        (self.final_mean - self.initial_mean).abs()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Blow-up guard: the concentration must stay within `[-0.5, 1.5]`.
fn check_bounds(c: &[f64], step: usize) -> Result<()> {
    match c.iter().find(|v| !(**v >= -0.5 && **v <= 1.5)) {
        Some(&value) => Err(Error::Unstable { step, value }),
        None => Ok(()),
    }
}

/// Runs the Cahn-Hilliard solver from `0.5 + U(−a, a)` noise.
pub fn cahn_hilliard(
    params: &SpinodalParams,
    domain: [f64; 2],
    resolution: [usize; 2],
    seed: u64,
) -> Result<ChState> {
    params.validate()?;
    let [t1, t2] = resolution;
    if t1 == 0 || t2 == 0 || domain.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Config(format!(
            "bad grid {resolution:?} over {domain:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = params.initial_noise_amplitude;
    let mut c: Vec<f64> = (0..t1 * t2)
        .map(|_| {
            0.5 + if a > 0.0 {
                rng.random_range(-a..a)
            } else {
                0.0
            }
        })
        .collect();
    let initial_mean = mean(&c);

    let k1 = frequency_vector(t1, domain[0] / t1 as f64);
    let k2 = frequency_vector(t2, domain[1] / t2 as f64);
    let kappa = params.interface_width * params.interface_width;
    let dm = params.dt * params.mobility;
    let mut k2s = Vec::with_capacity(t1 * t2);
    let mut denom = Vec::with_capacity(t1 * t2);
    for &a1 in &k1 {
        for &a2 in &k2 {
            let kk = a1 * a1 + a2 * a2;
            k2s.push(kk);
            denom.push(1.0 + dm * (STABILIZER * kk + kappa * kk * kk));
        }
    }

    let mut fft = Fft2::new(resolution);
    let mut c_hat: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut c_hat);
    let dc = c_hat[0];
    let mut mu_hat = vec![Complex64::new(0.0, 0.0); t1 * t2];

    for step in 1..=params.steps {
        for (m, &v) in mu_hat.iter_mut().zip(&c) {
            *m = Complex64::new(2.0 * v * (1.0 - v) * (1.0 - 2.0 * v), 0.0);
        }
        fft.forward(&mut mu_hat);
        for i in 0..c_hat.len() {
            let kk = k2s[i];
            c_hat[i] = (c_hat[i] * (1.0 + dm * STABILIZER * kk) - mu_hat[i] * (dm * kk)) / denom[i];
        }
        c_hat[0] = dc;
        let mut buf = c_hat.clone();
        fft.inverse(&mut buf);
        for (v, z) in c.iter_mut().zip(&buf) {
            *v = z.re;
        }
        check_bounds(&c, step)?;
    }
    log::debug!(
        "cahn-hilliard: {} steps, mean {initial_mean:.6}",
        params.steps
    );
    Ok(ChState {
        shape: resolution,
        final_mean: mean(&c),
        concentration: c,
        initial_mean,
    })
}

/// Spinodal two-phase cell: soft (0) where the concentration exceeds the threshold, hard (1) elsewhere.
pub fn generate_spinodal_rve(
    params: &SpinodalParams,
    domain: [f64; 2],
    resolution: [usize; 2],
    seed: u64,
) -> Result<Microstructure> {
    let state = cahn_hilliard(params, domain, resolution, seed)?;
    let grid = state
        .concentration
        .iter()
        .map(|&v| if v > params.threshold { 0 } else { 1 })
        .collect();
    Microstructure::from_grid(
        resolution,
        domain,
        grid,
        seed,
        Origin::Spinodal {
            params: params.clone(),
        },
    )
}
