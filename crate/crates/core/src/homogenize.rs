//! Strain concentration tensors and homogenized stiffness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field2, StiffnessField, StrainField};
use crate::solver::{LsSolver, SolverConfig};
use crate::tensor::{
    contract_42, contract_44, effective_enu, major_asymmetry, symmetrize_major, IsotropicProps,
    Voigt2, Voigt4,
};

/// Relative asymmetry above which `homogenized_stiffness` warns.
pub const ASYMMETRY_WARN: f64 = 1e-6;

/// Per-pixel 𝔸(x); column `j` is the strain under the unit load `e_j`.
#[derive(Debug, Clone)]
pub struct ConcentrationField {
    pub field: Field2<Voigt4>,
    pub config: SolverConfig,
    pub residuals: [f64; 3],
    pub iterations: [usize; 3],
}

impl ConcentrationField {
    /// Wraps an externally produced 𝔸 field (e.g. a surrogate's prediction).
    pub fn external(field: Field2<Voigt4>) -> Self {
        Self {
            field,
            config: SolverConfig::default(),
            residuals: [f64::NAN; 3],
            iterations: [0; 3],
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        self.field.shape()
    }

    /// Largest entry of `|mean(𝔸) − I|`.
    pub fn mean_identity_error(&self) -> f64 {
        self.field.mean().max_abs_diff(&Voigt4::IDENTITY)
    }
}

/// Solves the three unit loads concurrently with one shared Green operator.
pub fn strain_concentration(
    c_field: &StiffnessField,
    config: &SolverConfig,
) -> Result<ConcentrationField> {
    let solver = LsSolver::new(c_field, *config)?;
    concentration_with(&solver)
}

pub fn concentration_with(solver: &LsSolver) -> Result<ConcentrationField> {
    let results: Vec<_> = (0..3)
        .into_par_iter()
        .map(|j| {
            solver.solve(Voigt2::unit(j)).map_err(|e| Error::LoadCase {
                load: j,
                source: Box::new(e),
            })
        })
        .collect();
    let mut solved = Vec::with_capacity(3);
    for r in results {
        solved.push(r?);
    }
    let c_field = solver.stiffness();
    let data = (0..c_field.len())
        .map(|k| {
            let mut a = Voigt4::ZERO;
            for (j, s) in solved.iter().enumerate() {
                a.set_column(j, s.strain.as_slice()[k]);
            }
            a
        })
        .collect();
    Ok(ConcentrationField {
        field: Field2::from_vec(c_field.shape(), c_field.pixel_size(), data)?,
        config: *solver.config(),
        residuals: std::array::from_fn(|j| solved[j].final_residual),
        iterations: std::array::from_fn(|j| solved[j].iterations),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Homogenized {
    /// Symmetrized effective stiffness.
    pub cbar: Voigt4,
    /// `⟨ℂ·𝔸⟩` before symmetrization.
    pub raw: Voigt4,
    /// Major-symmetry defect of `raw`, relative to `‖raw‖`.
    pub asymmetry: f64,
    /// `|C̄[0][0] − C̄[1][1]| / ‖C̄‖`.
    pub anisotropy: f64,
    pub warning: Option<String>,
}

impl Homogenized {
    pub fn effective(&self) -> Result<IsotropicProps> {
        effective_enu(&self.cbar)
    }
}

/// `C̄ = ⟨ℂ(x)·𝔸(x)⟩`, symmetrized, with the removed asymmetry reported.
pub fn homogenized_stiffness(
    c_field: &StiffnessField,
    a: &ConcentrationField,
) -> Result<Homogenized> {
    c_field.same_shape(&a.field)?;
    let n = c_field.len() as f64;
    let raw = c_field
        .as_slice()
        .iter()
        .zip(a.field.as_slice())
        .fold(Voigt4::ZERO, |acc, (c, a)| acc + contract_44(c, a))
        * (1.0 / n);
    let scale = raw.norm();
    let asymmetry = if scale > 0.0 {
        major_asymmetry(&raw) / scale
    } else {
        0.0
    };
    let cbar = symmetrize_major(&raw);
    let warning = (asymmetry > ASYMMETRY_WARN).then(|| {
        let msg =
            format!("homogenized stiffness asymmetry {asymmetry:.3e} exceeds {ASYMMETRY_WARN:e}");
        log::warn!("{msg}");
        msg
    });
    Ok(Homogenized {
        anisotropy: if scale > 0.0 {
            (cbar.0[0][0] - cbar.0[1][1]).abs() / cbar.norm()
        } else {
            0.0
        },
        cbar,
        raw,
        asymmetry,
        warning,
    })
}

/// `ε(x) = 𝔸(x):ε̄`.
pub fn reconstruct_strain(a: &ConcentrationField, macro_strain: Voigt2) -> StrainField {
    a.field.map(|m| contract_42(m, &macro_strain))
}

/// Voigt (arithmetic) and Reuss (harmonic) pixel-average bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub voigt: Voigt4,
    pub reuss: Voigt4,
    pub e_voigt: f64,
    pub e_reuss: f64,
}

pub fn stiffness_bounds(c_field: &StiffnessField) -> Result<Bounds> {
    let n = c_field.len() as f64;
    let voigt = c_field.mean();
    let mut compliance = Voigt4::ZERO;
    for (k, c) in c_field.as_slice().iter().enumerate() {
        let s = c
            .inverse()
            .ok_or_else(|| Error::Domain(format!("pixel {k}: singular stiffness")))?;
        compliance = compliance + s * (1.0 / n);
    }
    let reuss = compliance
        .inverse()
        .ok_or_else(|| Error::Domain("mean compliance is singular".into()))?;
    Ok(Bounds {
        e_voigt: effective_enu(&voigt)?.e,
        e_reuss: effective_enu(&reuss)?.e,
        voigt,
        reuss,
    })
}
