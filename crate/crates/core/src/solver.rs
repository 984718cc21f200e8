//! Fixed-point FFT solver for the periodic Lippmann-Schwinger equation
//! under an imposed mean strain.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::green::{green_operator, reference_material, FreqGrid, FreqScheme, GreenField};
use crate::grid::{StiffnessField, StrainField, StressField};
use crate::tensor::{contract_42, stiffness_from_lame, Lame, Voigt2, Voigt4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: FreqScheme,
    pub record_history: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            scheme: FreqScheme::RotatedGrid,
            record_history: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "solver tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub strain: StrainField,
    pub stress: StressField,
    pub iterations: usize,
    /// Every residual when history recording is on, otherwise only the last one.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
    /// Largest componentwise `|mean(ε⁽ⁿ⁾) − ε̄|` seen over all iterations.
    pub max_mean_drift: f64,
}

/// Equilibrium residual of a Fourier-space stress field.
///
/// `Tol = sqrt( Σ_ξ |ξ·σ̂(ξ)|² / (T1·T2 · σ̂(0):σ̂(0)) )`
pub fn convergence_metric(stress_hat: &[Vec<Complex64>; 3], freqs: &FreqGrid) -> Result<f64> {
    let [s11, s22, s12] = stress_hat;
    let n = freqs.len();
    let mean_sq = s11[0].norm_sqr() + s22[0].norm_sqr() + 2.0 * s12[0].norm_sqr();
    if mean_sq == 0.0 {
        return Err(Error::ZeroMeanStress);
    }
    let mut acc = 0.0;
    for k in 0..n {
        let (a, b) = (freqs.xi1[k], freqs.xi2[k]);
        let r1 = s11[k] * a + s12[k] * b;
        let r2 = s12[k] * a + s22[k] * b;
        acc += r1.norm_sqr() + r2.norm_sqr();
    }
    Ok((acc / (n as f64 * mean_sq)).sqrt())
}

/// A solver bound to one stiffness field. The Green operator and reference
/// medium are built once and shared by every load case.
#[derive(Clone)]
pub struct LsSolver {
    stiffness: Arc<StiffnessField>,
    reference: Voigt4,
    green: Arc<GreenField>,
    freqs: Arc<FreqGrid>,
    config: SolverConfig,
}

impl LsSolver {
    pub fn new(c_field: &StiffnessField, config: SolverConfig) -> Result<Self> {
        Self::from_arc(Arc::new(c_field.clone()), config)
    }

    pub fn from_arc(c_field: Arc<StiffnessField>, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        for (k, c) in c_field.as_slice().iter().enumerate() {
            if !c.is_symmetric(1e-12) || c.0.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!(
                    "pixel {k}: stiffness is not symmetric"
                )));
            }
        }
        let lame: Vec<Lame> = c_field
            .as_slice()
            .iter()
            .map(Lame::from_stiffness)
            .collect();
        let lame0 = reference_material(&lame)?;
        let freqs = FreqGrid::new(c_field.shape(), c_field.pixel_size(), config.scheme);
        let green = green_operator(&freqs, lame0)?;
        Ok(Self {
            reference: stiffness_from_lame(lame0),
            stiffness: c_field,
            green: Arc::new(green),
            freqs: Arc::new(freqs),
            config,
        })
    }

    pub fn reference_lame(&self) -> Lame {
        self.green.lame0
    }

    pub fn green(&self) -> &GreenField {
        &self.green
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn stiffness(&self) -> &StiffnessField {
        &self.stiffness
    }

    /// Runs the fixed-point scheme for one macro strain.
    pub fn solve(&self, macro_strain: Voigt2) -> Result<SolveResult> {
        let c_field = &*self.stiffness;
        let shape = c_field.shape();
        let pixel = c_field.pixel_size();
        let n = c_field.len();
        let cs = c_field.as_slice();

        if macro_strain == Voigt2::ZERO {
            let zero = StrainField::filled(shape, pixel, Voigt2::ZERO);
            return Ok(SolveResult {
                strain: zero.clone(),
                stress: zero,
                iterations: 0,
                residual_history: vec![0.0],
                final_residual: 0.0,
                converged: true,
                max_mean_drift: 0.0,
            });
        }

        let mut fft = Fft2::new(shape);
        let mut strain = vec![macro_strain; n];
        let mut stress: Vec<Voigt2> = cs.iter().map(|c| contract_42(c, &macro_strain)).collect();
        let mut comps: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); n]);
        let mut history = Vec::new();
        let mut max_drift: f64 = 0.0;
        let mut residual = f64::INFINITY;

        for iter in 1..=self.config.max_iter {
            // τ = σ − ℂ⁰:ε
            for k in 0..n {
                let tau = stress[k] - contract_42(&self.reference, &strain[k]);
                for c in 0..3 {
                    comps[c][k] = Complex64::new(tau.0[c], 0.0);
                }
            }
            for c in comps.iter_mut() {
                fft.forward(c);
            }
            self.green.apply(&mut comps);
            for c in comps.iter_mut() {
                fft.inverse(c);
            }
            let mut sum = [0.0; 3];
            for k in 0..n {
                let e = Voigt2(std::array::from_fn(|c| macro_strain.0[c] - comps[c][k].re));
                for c in 0..3 {
                    sum[c] += e.0[c];
                }
                strain[k] = e;
                stress[k] = contract_42(&cs[k], &e);
            }
            for c in 0..3 {
                max_drift = max_drift.max((sum[c] / n as f64 - macro_strain.0[c]).abs());
            }

            for k in 0..n {
                for c in 0..3 {
                    comps[c][k] = Complex64::new(stress[k].0[c], 0.0);
                }
            }
            for c in comps.iter_mut() {
                fft.forward(c);
            }
            residual = convergence_metric(&comps, &self.freqs)?;
            if self.config.record_history {
                history.push(residual);
            }
            if !residual.is_finite() {
                break;
            }
            if residual <= self.config.tol {
                if !self.config.record_history {
                    history.push(residual);
                }
                return Ok(SolveResult {
                    strain: StrainField::from_vec(shape, pixel, strain)?,
                    stress: StressField::from_vec(shape, pixel, stress)?,
                    iterations: iter,
                    residual_history: history,
                    final_residual: residual,
                    converged: true,
                    max_mean_drift: max_drift,
                });
            }
        }
        if !self.config.record_history {
            history.push(residual);
        }
        Err(Error::NotConverged {
            iterations: self.config.max_iter,
            last_residual: residual,
            residual_history: history,
        })
    }
}

pub fn solve_unit_load(
    c_field: &StiffnessField,
    macro_strain: Voigt2,
    config: &SolverConfig,
) -> Result<SolveResult> {
    LsSolver::new(c_field, *config)?.solve(macro_strain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{stiffness_from_enu, IsotropicProps};

    fn inclusion_field(n: usize, contrast: f64) -> StiffnessField {
        let cm = stiffness_from_enu(IsotropicProps { e: 1.0, nu: 0.3 }).unwrap();
        let cf = stiffness_from_enu(IsotropicProps {
            e: contrast,
            nu: 0.25,
        })
        .unwrap();
        let r = n as f64 * 0.3;
        let data = (0..n * n)
            .map(|k| {
                let (p, q) = ((k / n) as f64 + 0.5, (k % n) as f64 + 0.5);
                let c = n as f64 / 2.0;
                if (p - c).powi(2) + (q - c).powi(2) < r * r {
                    cf
                } else {
                    cm
                }
            })
            .collect();
        StiffnessField::from_domain([n, n], [1.0, 1.0], data).unwrap()
    }

    #[test]
    fn homogeneous_medium_converges_in_one_iteration() {
        let c = stiffness_from_enu(IsotropicProps { e: 5.0, nu: 0.3 }).unwrap();
        let field = StiffnessField::filled([16, 12], [0.5, 0.25], c);
        let macro_strain = Voigt2::new(0.3, -0.7, 1.1);
        for scheme in [FreqScheme::Continuous, FreqScheme::RotatedGrid] {
            let cfg = SolverConfig {
                scheme,
                ..Default::default()
            };
            let res = solve_unit_load(&field, macro_strain, &cfg).unwrap();
            assert_eq!(res.iterations, 1);
            assert!(res.converged);
            for e in res.strain.as_slice() {
                assert!((*e - macro_strain).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_load_short_circuits() {
        let field = inclusion_field(8, 5.0);
        let res = solve_unit_load(&field, Voigt2::ZERO, &SolverConfig::default()).unwrap();
        assert_eq!(res.iterations, 0);
        assert!(res.converged);
        assert!(res.strain.as_slice().iter().all(|e| *e == Voigt2::ZERO));
    }

    #[test]
    fn metric_uniform_and_zero_stress() {
        let g = FreqGrid::continuous([4, 4], [1.0, 1.0]);
        let mut uniform: [Vec<Complex64>; 3] =
            std::array::from_fn(|_| vec![Complex64::default(); 16]);
        uniform[0][0] = Complex64::new(16.0, 0.0);
        assert_eq!(convergence_metric(&uniform, &g).unwrap(), 0.0);
        let zero: [Vec<Complex64>; 3] = std::array::from_fn(|_| vec![Complex64::default(); 16]);
        assert!(matches!(
            convergence_metric(&zero, &g),
            Err(Error::ZeroMeanStress)
        ));
    }

    #[test]
    fn two_phase_solve_preserves_mean_and_converges() {
        let field = inclusion_field(32, 10.0);
        for scheme in [FreqScheme::Continuous, FreqScheme::RotatedGrid] {
            let cfg = SolverConfig {
                scheme,
                record_history: true,
                ..Default::default()
            };
            let e_bar = Voigt2::new(0.0, 0.0, 1.0);
            let res = solve_unit_load(&field, e_bar, &cfg).unwrap();
            assert!(res.final_residual <= 1e-6);
            assert!(
                res.max_mean_drift <= 1e-10,
                "{scheme:?}: {}",
                res.max_mean_drift
            );
            let m = res.strain.mean();
            assert!((m - e_bar).norm() < 1e-10);
            let h = &res.residual_history;
            assert_eq!(h.len(), res.iterations);
            for i in 0..h.len().saturating_sub(10) {
                assert!(
                    h[i + 10] < h[i],
                    "{scheme:?}: residual not decreasing at {i}"
                );
            }
        }
    }

    #[test]
    fn iteration_cap_reports_history() {
        let field = inclusion_field(16, 50.0);
        let cfg = SolverConfig {
            max_iter: 3,
            record_history: true,
            ..Default::default()
        };
        match solve_unit_load(&field, Voigt2::unit(0), &cfg) {
            Err(Error::NotConverged {
                iterations,
                residual_history,
                ..
            }) => {
                assert_eq!(iterations, 3);
                assert_eq!(residual_history.len(), 3);
            }
            other => panic!(
                "expected non-convergence, got {:?}",
                other.map(|r| r.iterations)
            ),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let field = inclusion_field(8, 2.0);
        let cfg = SolverConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(solve_unit_load(&field, Voigt2::unit(0), &cfg).is_err());
        let cfg = SolverConfig {
            max_iter: 0,
            ..Default::default()
        };
        assert!(solve_unit_load(&field, Voigt2::unit(0), &cfg).is_err());
    }
}
