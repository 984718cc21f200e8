//! Periodic two-phase microstructures and per-pixel stiffness assignment.

mod fiber;
mod spinodal;

pub use fiber::{generate_fiber_rve, min_gap_violation, rasterize_fibers, Fiber, FiberRveConfig};
pub use spinodal::{cahn_hilliard, generate_spinodal_rve, ChState, SpinodalParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::StiffnessField;
use crate::tensor::{stiffness_from_enu, IsotropicProps};

/// How a microstructure was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Fibers {
        vof_target: f64,
        r_mean: f64,
        r_std_frac: f64,
        gap: f64,
        /// Common factor applied to the sampled radii to hit the target fraction.
        radius_scale: f64,
    },
    Spinodal {
        params: SpinodalParams,
    },
    Uniform {
        phase: u8,
    },
    External,
}

/// Periodic boolean pixel grid (1 = fiber / hard phase, 0 = matrix / soft phase).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microstructure {
    pub shape: [usize; 2],
    /// Cell size in μm.
    pub domain: [f64; 2],
    #[serde(skip)]
    pub grid: Vec<u8>,
    pub fibers: Option<Vec<Fiber>>,
    pub achieved_vof: f64,
    pub seed: u64,
    pub origin: Origin,
}

impl Microstructure {
    pub fn from_grid(
        shape: [usize; 2],
        domain: [f64; 2],
        grid: Vec<u8>,
        seed: u64,
        origin: Origin,
    ) -> Result<Self> {
        if grid.len() != shape[0] * shape[1] || grid.is_empty() {
            return Err(Error::Shape(format!(
                "{} pixels for shape {shape:?}",
                grid.len()
            )));
        }
        if grid.iter().any(|&v| v > 1) {
            return Err(Error::Shape("microstructure pixels must be 0 or 1".into()));
        }
        Ok(Self {
            achieved_vof: volume_fraction(&grid),
            shape,
            domain,
            grid,
            fibers: None,
            seed,
            origin,
        })
    }

    /// A single-phase cell.
    pub fn uniform(shape: [usize; 2], domain: [f64; 2], phase: u8) -> Self {
        Self::from_grid(
            shape,
            domain,
            vec![phase.min(1); shape[0] * shape[1]],
            0,
            Origin::Uniform { phase },
        )
        .expect("valid uniform grid")
    }

    pub fn pixel_size(&self) -> [f64; 2] {
        [
            self.domain[0] / self.shape[0] as f64,
            self.domain[1] / self.shape[1] as f64,
        ]
    }

    /// Grayscale raster with values 0 and 255.
    pub fn to_gray(&self) -> Vec<u8> {
        self.grid
            .iter()
            .map(|&v| if v == 1 { 255 } else { 0 })
            .collect()
    }
}

pub fn volume_fraction(grid: &[u8]) -> f64 {
    grid.iter().filter(|&&v| v == 1).count() as f64 / grid.len() as f64
}

/// Per-pixel stiffness: fiber properties where the grid is 1, matrix properties elsewhere.
pub fn assign_properties(
    m: &Microstructure,
    fiber: IsotropicProps,
    matrix: IsotropicProps,
) -> Result<StiffnessField> {
    let cf = stiffness_from_enu(fiber)?;
    let cm = stiffness_from_enu(matrix)?;
    let data = m
        .grid
        .iter()
        .map(|&v| if v == 1 { cf } else { cm })
        .collect();
    StiffnessField::from_domain(m.shape, m.domain, data)
}

/// Wraps a coordinate difference into `[-L/2, L/2]`.
#[inline]
pub(crate) fn min_image(d: f64, l: f64) -> f64 {
    d - l * (d / l).round()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HTA: IsotropicProps = IsotropicProps { e: 28.0, nu: 0.33 };
    const EPOXY_6376: IsotropicProps = IsotropicProps { e: 3.63, nu: 0.34 };

    #[test]
    fn equal_phases_give_homogeneous_field() {
        let grid: Vec<u8> = (0..64).map(|k| (k % 3 == 0) as u8).collect();
        let m = Microstructure::from_grid([8, 8], [1.0, 1.0], grid, 0, Origin::External).unwrap();
        let f = assign_properties(&m, EPOXY_6376, EPOXY_6376).unwrap();
        assert!(f.is_homogeneous());
    }

    #[test]
    fn matrix_only_grid() {
        let m = Microstructure::uniform([4, 6], [2.0, 3.0], 0);
        let f = assign_properties(&m, HTA, EPOXY_6376).unwrap();
        let cm = stiffness_from_enu(EPOXY_6376).unwrap();
        assert!(f.as_slice().iter().all(|c| *c == cm));
        assert_eq!(f.pixel_size(), [0.5, 0.5]);
    }

    #[test]
    fn two_phase_counts_match() {
        let grid: Vec<u8> = (0..100).map(|k| ((k * 7) % 5 < 2) as u8).collect();
        let ones = grid.iter().filter(|&&v| v == 1).count();
        let m = Microstructure::from_grid([10, 10], [1.0, 1.0], grid, 0, Origin::External).unwrap();
        let f = assign_properties(&m, HTA, EPOXY_6376).unwrap();
        let cf = stiffness_from_enu(HTA).unwrap();
        let cm = stiffness_from_enu(EPOXY_6376).unwrap();
        assert_ne!(cf, cm);
        let nf = f.as_slice().iter().filter(|c| **c == cf).count();
        let nm = f.as_slice().iter().filter(|c| **c == cm).count();
        assert_eq!((nf, nm), (ones, 100 - ones));
        assert!((m.achieved_vof - ones as f64 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_props_propagate() {
        let m = Microstructure::uniform([2, 2], [1.0, 1.0], 1);
        assert!(assign_properties(&m, IsotropicProps { e: 1.0, nu: 0.5 }, EPOXY_6376).is_err());
    }

    #[test]
    fn rejects_non_binary_grid() {
        assert!(
            Microstructure::from_grid([1, 2], [1.0, 1.0], vec![0, 2], 0, Origin::External).is_err()
        );
        assert!(
            Microstructure::from_grid([2, 2], [1.0, 1.0], vec![0, 1], 0, Origin::External).is_err()
        );
    }
}
