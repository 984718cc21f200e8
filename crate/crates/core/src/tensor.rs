//! Two-dimensional Voigt algebra and isotropic elasticity conversions.
//!
//! Strain and stress vectors are stored as `(x11, x22, x12)` with the
//! tensorial shear component. Stiffness matrices carry `2μ` in the shear
//! diagonal so that `σ12 = 2μ·ε12`; the tensor component `C1212` is the
//! `(2,2)` entry divided by two.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Young's modulus (GPa) and Poisson ratio of an isotropic phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicProps {
    #[serde(rename = "E")]
    pub e: f64,
    pub nu: f64,
}

impl IsotropicProps {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        let p = Self { e, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.e.is_finite()) {
            return Err(Error::Domain(format!(
                "Young's modulus must be > 0, got {}",
                self.e
            )));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::Domain(format!(
                "Poisson ratio must lie in (-1, 0.5), got {}",
                self.nu
            )));
        }
        Ok(())
    }
}

/// Lamé constants (GPa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lame {
    pub lambda: f64,
    pub mu: f64,
}

impl Lame {
    /// Lamé constants of an isotropic Voigt stiffness, read from `m[0][1]` and `m[2][2] / 2`.
    pub fn from_stiffness(c: &Voigt4) -> Self {
        Self {
            lambda: c.0[0][1],
            mu: 0.5 * c.0[2][2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Voigt2(pub [f64; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Voigt4(pub [[f64; 3]; 3]);

impl Voigt2 {
    pub const ZERO: Voigt2 = Voigt2([0.0; 3]);

    pub fn new(e11: f64, e22: f64, e12: f64) -> Self {
        Self([e11, e22, e12])
    }

    /// Unit load `e_j` for `j` in `0..3`.
    pub fn unit(j: usize) -> Self {
        let mut v = [0.0; 3];
        v[j] = 1.0;
        Self(v)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Voigt4 {
    pub const ZERO: Voigt4 = Voigt4([[0.0; 3]; 3]);
    pub const IDENTITY: Voigt4 = Voigt4([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Voigt4(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i])))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Voigt4) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.norm().max(f64::MIN_POSITIVE);
        self.max_abs_diff(&self.transpose()) <= rel_tol * scale
    }

    pub fn column(&self, j: usize) -> Voigt2 {
        Voigt2([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn set_column(&mut self, j: usize, v: Voigt2) {
        for i in 0..3 {
            self.0[i][j] = v.0[i];
        }
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Matrix inverse, `None` when singular.
    pub fn inverse(&self) -> Option<Voigt4> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Some(Voigt4(adj) * (1.0 / det))
    }
}

impl Index<(usize, usize)> for Voigt4 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Voigt4 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Voigt2 {
    type Output = Voigt2;
    fn add(self, rhs: Voigt2) -> Voigt2 {
        Voigt2(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl Sub for Voigt2 {
    type Output = Voigt2;
    fn sub(self, rhs: Voigt2) -> Voigt2 {
        Voigt2(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Mul<f64> for Voigt2 {
    type Output = Voigt2;
    fn mul(self, s: f64) -> Voigt2 {
        Voigt2(self.0.map(|x| x * s))
    }
}

impl Add for Voigt4 {
    type Output = Voigt4;
    fn add(self, rhs: Voigt4) -> Voigt4 {
        Voigt4(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] + rhs.0[i][j])
        }))
    }
}

impl Sub for Voigt4 {
    type Output = Voigt4;
    fn sub(self, rhs: Voigt4) -> Voigt4 {
        Voigt4(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j] - rhs.0[i][j])
        }))
    }
}

impl Mul<f64> for Voigt4 {
    type Output = Voigt4;
    fn mul(self, s: f64) -> Voigt4 {
        Voigt4(self.0.map(|row| row.map(|x| x * s)))
    }
}

impl Mul<Voigt2> for Voigt4 {
    type Output = Voigt2;
    fn mul(self, e: Voigt2) -> Voigt2 {
        contract_42(&self, &e)
    }
}

impl Mul<Voigt4> for Voigt4 {
    type Output = Voigt4;
    fn mul(self, a: Voigt4) -> Voigt4 {
        contract_44(&self, &a)
    }
}

pub fn lame_from_enu(props: IsotropicProps) -> Result<Lame> {
    props.validate()?;
    let IsotropicProps { e, nu } = props;
    Ok(Lame {
        lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        mu: e / (2.0 * (1.0 + nu)),
    })
}

pub fn stiffness_from_lame(l: Lame) -> Voigt4 {
    let Lame { lambda, mu } = l;
    let d = lambda + 2.0 * mu;
    Voigt4([[d, lambda, 0.0], [lambda, d, 0.0], [0.0, 0.0, 2.0 * mu]])
}

/// Stiffness of an isotropic phase given by `(E, ν)`.
pub fn stiffness_from_enu(props: IsotropicProps) -> Result<Voigt4> {
    lame_from_enu(props).map(stiffness_from_lame)
}

/// Young's modulus and Poisson ratio recovered from `C1111 = m[0][0]` and
/// `C1212 = m[2][2] / 2` of a homogenized stiffness.
pub fn effective_enu(cbar: &Voigt4) -> Result<IsotropicProps> {
    let c1111 = cbar.0[0][0];
    let c1212 = 0.5 * cbar.0[2][2];
    let denom = c1111 - c1212;
    if denom == 0.0 {
        return Err(Error::Singular(c1111));
    }
    Ok(IsotropicProps {
        e: c1212 * (3.0 * c1111 - 4.0 * c1212) / denom,
        nu: (c1111 - 2.0 * c1212) / (2.0 * denom),
    })
}

#[inline]
pub fn contract_42(c: &Voigt4, e: &Voigt2) -> Voigt2 {
    let m = &c.0;
    let v = &e.0;
    Voigt2([
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ])
}

#[inline]
pub fn contract_44(c: &Voigt4, a: &Voigt4) -> Voigt4 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (0..3).map(|k| c.0[i][k] * a.0[k][j]).sum();
        }
    }
    Voigt4(out)
}

/// Shear weights relating the Voigt matrices to tensor components:
/// `m[a][b] = C_ab * W[b]` for stiffness-like operators on tensorial strain.
pub const SHEAR_WEIGHTS: [f64; 3] = [1.0, 1.0, 2.0];

/// Part of `c` that breaks major symmetry of the underlying tensor, measured
/// on `diag(W)·c` so that the `2μ` shear convention does not register as asymmetry.
pub fn major_asymmetry(c: &Voigt4) -> f64 {
    let w = SHEAR_WEIGHTS;
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            worst = worst.max((w[i] * c.0[i][j] - w[j] * c.0[j][i]).abs());
        }
    }
    worst
}

/// Restores major symmetry of the underlying tensor (average of `C_ijkl` and `C_klij`).
pub fn symmetrize_major(c: &Voigt4) -> Voigt4 {
    let w = SHEAR_WEIGHTS;
    Voigt4(std::array::from_fn(|i| {
        std::array::from_fn(|j| 0.5 * (c.0[i][j] + w[j] * c.0[j][i] / w[i]))
    }))
}
