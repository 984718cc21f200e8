//! Plane-strain bilinear quadrilaterals, global assembly and the Newton loop.
//!
//! Strains are tensorial Voigt vectors and tangents use the `2μ` shear entry, so
//! element matrices are `K = ∫ B_engᵀ · C̄ · B_tens dA` and `f = ∫ B_engᵀ · σ dA`.

use serde::{Deserialize, Serialize};

use super::banded::BandedCholesky;
use super::mesh::MacroMesh;
use crate::error::{Error, Result};
use crate::tensor::{Voigt2, Voigt4};

const HOURGLASS_BASE: [f64; 4] = [1.0, -1.0, 1.0, -1.0];
const NATURAL: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    /// Centroid quadrature plus hourglass stiffness.
    #[default]
    Reduced,
    /// 2×2 Gauss quadrature.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemOptions {
    pub integration: Integration,
    /// Hourglass stiffness as a fraction of the element stiffness scale.
    pub hourglass: f64,
    /// Convergence threshold on `‖R(free)‖₂`.
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for FemOptions {
    fn default() -> Self {
        Self {
            integration: Integration::Reduced,
            hourglass: 0.005,
            tol: 1e-7,
            max_newton: 25,
        }
    }
}

/// Shape-function gradients and Jacobian determinant at a natural point.
fn gradients(x: &[[f64; 2]; 4], xi: f64, eta: f64) -> ([[f64; 2]; 4], f64) {
    let dn: [[f64; 2]; 4] = std::array::from_fn(|a| {
        let [sa, ta] = NATURAL[a];
        [0.25 * sa * (1.0 + ta * eta), 0.25 * ta * (1.0 + sa * xi)]
    });
    let mut j = [[0.0; 2]; 2];
    for a in 0..4 {
        for r in 0..2 {
            for c in 0..2 {
                j[r][c] += dn[a][r] * x[a][c];
            }
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let inv = [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ];
    let grad = std::array::from_fn(|a| {
        [
            inv[0][0] * dn[a][0] + inv[0][1] * dn[a][1],
            inv[1][0] * dn[a][0] + inv[1][1] * dn[a][1],
        ]
    });
    (grad, det)
}

/// Tensorial strain `(ε11, ε22, ε12)` from nodal displacements.
fn strain(grad: &[[f64; 2]; 4], u: &[f64; 8]) -> Voigt2 {
    let mut e = [0.0; 3];
    for a in 0..4 {
        let (ux, uy) = (u[2 * a], u[2 * a + 1]);
        e[0] += grad[a][0] * ux;
        e[1] += grad[a][1] * uy;
        e[2] += 0.5 * (grad[a][1] * ux + grad[a][0] * uy);
    }
    Voigt2(e)
}

/// Engineering B matrix (3 × 8).
fn b_eng(grad: &[[f64; 2]; 4]) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for a in 0..4 {
        b[0][2 * a] = grad[a][0];
        b[1][2 * a + 1] = grad[a][1];
        b[2][2 * a] = grad[a][1];
        b[2][2 * a + 1] = grad[a][0];
    }
    b
}

/// Engineering-strain form `D = C̄·diag(1, 1, ½)`.
fn engineering(c: &Voigt4) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| c.0[i][j] * if j == 2 { 0.5 } else { 1.0 }))
}

fn quadrature(integration: Integration) -> Vec<([f64; 2], f64)> {
    match integration {
        Integration::Reduced => vec![([0.0, 0.0], 4.0)],
        Integration::Full => {
            let g = 1.0 / 3f64.sqrt();
            NATURAL
                .iter()
                .map(|p| ([p[0] * g, p[1] * g], 1.0))
                .collect()
        }
    }
}

/// Element geometry needed by assembly and recovery.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub coords: [[f64; 2]; 4],
    pub dofs: [usize; 8],
    pub area: f64,
    centroid_grad: [[f64; 2]; 4],
}

impl ElementGeometry {
    pub fn new(mesh: &MacroMesh, e: usize) -> Self {
        let conn = mesh.elements[e];
        let coords = conn.map(|n| mesh.nodes[n]);
        let (grad, det) = gradients(&coords, 0.0, 0.0);
        let dofs = std::array::from_fn(|k| 2 * conn[k / 2] + k % 2);
        Self {
            coords,
            dofs,
            area: 4.0 * det,
            centroid_grad: grad,
        }
    }

    pub fn gather(&self, s: &[f64]) -> [f64; 8] {
        self.dofs.map(|d| s[d])
    }

    /// Macrostrain at the single integration point.
    pub fn centroid_strain(&self, u: &[f64; 8]) -> Voigt2 {
        strain(&self.centroid_grad, u)
    }

    /// Flanagan-Belytschko hourglass vector, orthogonal to linear fields.
    fn hourglass_vector(&self) -> [f64; 4] {
        let hx: f64 = (0..4).map(|a| HOURGLASS_BASE[a] * self.coords[a][0]).sum();
        let hy: f64 = (0..4).map(|a| HOURGLASS_BASE[a] * self.coords[a][1]).sum();
        std::array::from_fn(|a| {
            0.25 * (HOURGLASS_BASE[a]
                - hx * self.centroid_grad[a][0]
                - hy * self.centroid_grad[a][1])
        })
    }

    /// `α · max(C̄11, C̄22) · A · Σ|∇N_a|²`.
    fn hourglass_stiffness(&self, c: &Voigt4, opts: &FemOptions) -> f64 {
        let bb: f64 = self
            .centroid_grad
            .iter()
            .map(|v| v[0] * v[0] + v[1] * v[1])
            .sum();
        opts.hourglass * c.0[0][0].max(c.0[1][1]) * self.area * bb
    }

    /// Element stiffness (8 × 8).
    pub fn stiffness(&self, c: &Voigt4, opts: &FemOptions) -> [[f64; 8]; 8] {
        let d = engineering(c);
        let mut k = [[0.0; 8]; 8];
        for (p, w) in quadrature(opts.integration) {
            let (grad, det) = gradients(&self.coords, p[0], p[1]);
            let b = b_eng(&grad);
            for r in 0..8 {
                for s in 0..8 {
                    let mut acc = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            acc += b[i][r] * d[i][j] * b[j][s];
                        }
                    }
                    k[r][s] += acc * w * det;
                }
            }
        }
        if opts.integration == Integration::Reduced && opts.hourglass > 0.0 {
            let g = self.hourglass_vector();
            let kappa = self.hourglass_stiffness(c, opts);
            for a in 0..4 {
                for b in 0..4 {
                    let v = kappa * g[a] * g[b];
                    k[2 * a][2 * b] += v;
                    k[2 * a + 1][2 * b + 1] += v;
                }
            }
        }
        k
    }

    /// Internal force (8) for a linear element response with tangent `c`.
    pub fn internal_force(&self, c: &Voigt4, u: &[f64; 8], opts: &FemOptions) -> [f64; 8] {
        let mut f = [0.0; 8];
        match opts.integration {
            Integration::Reduced => {
                let sigma = *c * self.centroid_strain(u);
                let b = b_eng(&self.centroid_grad);
                for r in 0..8 {
                    f[r] = self.area * (0..3).map(|i| b[i][r] * sigma.0[i]).sum::<f64>();
                }
                if opts.hourglass > 0.0 {
                    let g = self.hourglass_vector();
                    let kappa = self.hourglass_stiffness(c, opts);
                    let qx: f64 = (0..4).map(|a| g[a] * u[2 * a]).sum();
                    let qy: f64 = (0..4).map(|a| g[a] * u[2 * a + 1]).sum();
                    for a in 0..4 {
                        f[2 * a] += kappa * g[a] * qx;
                        f[2 * a + 1] += kappa * g[a] * qy;
                    }
                }
            }
            Integration::Full => {
                for (p, w) in quadrature(Integration::Full) {
                    let (grad, det) = gradients(&self.coords, p[0], p[1]);
                    let sigma = *c * strain(&grad, u);
                    let b = b_eng(&grad);
                    for r in 0..8 {
                        f[r] += w * det * (0..3).map(|i| b[i][r] * sigma.0[i]).sum::<f64>();
                    }
                }
            }
        }
        f
    }
}

/// Global internal force vector.
pub fn internal_forces(
    mesh: &MacroMesh,
    geo: &[ElementGeometry],
    tangents: &[Voigt4],
    s: &[f64],
    opts: &FemOptions,
) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_dofs()];
    for (g, c) in geo.iter().zip(tangents) {
        let fe = g.internal_force(c, &g.gather(s), opts);
        for (k, &d) in g.dofs.iter().enumerate() {
            f[d] += fe[k];
        }
    }
    f
}

/// Dense global stiffness (row-major, `n_dofs²`), for verification.
pub fn assemble_dense(mesh: &MacroMesh, tangents: &[Voigt4], opts: &FemOptions) -> Vec<f64> {
    let n = mesh.n_dofs();
    let mut k = vec![0.0; n * n];
    for (e, c) in tangents.iter().enumerate() {
        let g = ElementGeometry::new(mesh, e);
        let ke = g.stiffness(c, opts);
        for (r, &dr) in g.dofs.iter().enumerate() {
            for (s, &ds) in g.dofs.iter().enumerate() {
                k[dr * n + ds] += ke[r][s];
            }
        }
    }
    k
}

/// Free-DOF stiffness in banded storage, factored.
pub fn factor_free(
    mesh: &MacroMesh,
    geo: &[ElementGeometry],
    tangents: &[Voigt4],
    opts: &FemOptions,
) -> Result<BandedCholesky> {
    let mut slot = vec![usize::MAX; mesh.n_dofs()];
    for (i, &d) in mesh.free.iter().enumerate() {
        slot[d] = i;
    }
    let mut band = 0;
    for g in geo {
        let idx: Vec<usize> = g
            .dofs
            .iter()
            .map(|&d| slot[d])
            .filter(|&i| i != usize::MAX)
            .collect();
        if let (Some(lo), Some(hi)) = (idx.iter().min(), idx.iter().max()) {
            band = band.max(hi - lo);
        }
    }
    let mut k = BandedCholesky::zeros(mesh.free.len(), band);
    for (g, c) in geo.iter().zip(tangents) {
        let ke = g.stiffness(c, opts);
        for (r, &dr) in g.dofs.iter().enumerate() {
            for (s, &ds) in g.dofs.iter().enumerate() {
                let (i, j) = (slot[dr], slot[ds]);
                if i != usize::MAX && j != usize::MAX && j <= i {
                    k.add(i, j, ke[r][s]);
                }
            }
        }
    }
    k.factor()?;
    Ok(k)
}

/// Outcome of one load step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub applied: f64,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub reaction: f64,
}

/// Newton solve of one step: loaded DOFs pinned to `applied`, fixed DOFs to 0.
///
/// The update is `s_f ← s_f + K_ff⁻¹ R_f` with `R = F_ext − F_int`.
pub fn newton_step(
    mesh: &MacroMesh,
    geo: &[ElementGeometry],
    tangents: &[Voigt4],
    k_ff: &BandedCholesky,
    s: &mut [f64],
    applied: f64,
    opts: &FemOptions,
) -> Result<(StepResult, Vec<f64>)> {
    for &d in &mesh.fixed {
        s[d] = 0.0;
    }
    for &d in &mesh.loaded {
        s[d] = applied;
    }
    let f_ext = vec![0.0; mesh.n_dofs()];
    let mut iterations = 0;
    loop {
        let f_int = internal_forces(mesh, geo, tangents, s, opts);
        let r: Vec<f64> = mesh.free.iter().map(|&d| f_ext[d] - f_int[d]).collect();
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= opts.tol {
            let reaction = mesh.loaded.iter().map(|&d| f_int[d]).sum();
            let step = StepResult {
                applied,
                newton_iterations: iterations,
                residual_norm: norm,
                reaction,
            };
            return Ok((step, f_int));
        }
        if iterations >= opts.max_newton {
            return Err(Error::Newton {
                iterations,
                residual: norm,
            });
        }
        let ds = k_ff.solve(&r);
        for (&d, v) in mesh.free.iter().zip(ds) {
            s[d] += v;
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{stiffness_from_enu, IsotropicProps};

    fn material() -> Voigt4 {
        stiffness_from_enu(IsotropicProps { e: 3.35, nu: 0.35 }).unwrap()
    }

    #[test]
    fn uniform_strain_is_reproduced_at_the_integration_point() {
        let mesh = MacroMesh::plate(1, 1, [0.05, 0.05]).unwrap();
        let g = ElementGeometry::new(&mesh, 0);
        let delta = 1e-3;
        // u = (δx, 0)
        let s: Vec<f64> = mesh
            .nodes
            .iter()
            .flat_map(|p| [delta * p[0], 0.0])
            .collect();
        let eps = g.centroid_strain(&g.gather(&s));
        assert!((eps - Voigt2::new(delta, 0.0, 0.0)).norm() < 1e-15);
        let c = material();
        assert_eq!(c * eps, crate::tensor::contract_42(&c, &eps));
        let exact = crate::tensor::contract_42(&c, &Voigt2::new(delta, 0.0, 0.0));
        assert!((c * eps - exact).norm() <= 1e-14 * exact.norm());
        // simple shear u = (γy, 0): tensorial shear is γ/2
        let s: Vec<f64> = mesh
            .nodes
            .iter()
            .flat_map(|p| [delta * p[1], 0.0])
            .collect();
        assert!(
            (g.centroid_strain(&g.gather(&s)) - Voigt2::new(0.0, 0.0, delta / 2.0)).norm() < 1e-15
        );
    }

    #[test]
    fn stiffness_is_symmetric_with_three_rigid_modes() {
        let mesh = MacroMesh::plate(1, 1, [0.05, 0.08]).unwrap();
        let g = ElementGeometry::new(&mesh, 0);
        for integration in [Integration::Reduced, Integration::Full] {
            let opts = FemOptions {
                integration,
                ..Default::default()
            };
            let k = g.stiffness(&material(), &opts);
            let mut ks = nalgebra::DMatrix::<f64>::zeros(8, 8);
            for r in 0..8 {
                for s in 0..8 {
                    assert!((k[r][s] - k[s][r]).abs() <= 1e-12 * k[0][0].abs());
                    ks[(r, s)] = k[r][s];
                }
            }
            let ev = ks.symmetric_eigen().eigenvalues;
            let zero = ev.iter().filter(|v| v.abs() < 1e-9 * k[0][0]).count();
            assert_eq!(zero, 3, "{integration:?}: {ev}");
            // internal force equals K·u for this linear element
            let u = [0.1, -0.2, 0.3, 0.05, -0.1, 0.2, 0.0, 0.4];
            let f = g.internal_force(&material(), &u, &opts);
            for r in 0..8 {
                let ku: f64 = (0..8).map(|s| k[r][s] * u[s]).sum();
                assert!((ku - f[r]).abs() < 1e-12 * k[0][0]);
            }
        }
    }

    #[test]
    fn one_point_without_hourglass_control_is_rank_deficient() {
        let mesh = MacroMesh::plate(1, 1, [1.0, 1.0]).unwrap();
        let g = ElementGeometry::new(&mesh, 0);
        let opts = FemOptions {
            hourglass: 0.0,
            ..Default::default()
        };
        let k = g.stiffness(&material(), &opts);
        let ks = nalgebra::DMatrix::from_fn(8, 8, |r, s| k[r][s]);
        let zero = ks
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .filter(|v| v.abs() < 1e-9)
            .count();
        assert_eq!(zero, 5);
    }
}
