//! Structured quadrilateral plate mesh with the clamped-bottom / pulled-top pattern.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// DOF `2n` is the horizontal, `2n + 1` the vertical displacement of node `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMesh {
    pub nx: usize,
    pub ny: usize,
    /// Node coordinates (mm).
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node indices, one RVE per element.
    pub elements: Vec<[usize; 4]>,
    /// DOFs held at zero.
    pub fixed: Vec<usize>,
    /// DOFs with prescribed (loading) displacement.
    pub loaded: Vec<usize>,
    /// Unconstrained DOFs, ascending.
    pub free: Vec<usize>,
}

impl MacroMesh {
    /// `nx × ny` elements of size `h = [hx, hy]`; bottom edge clamped, top edge
    /// driven vertically and free horizontally.
    pub fn plate(nx: usize, ny: usize, h: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 || !(h[0] > 0.0 && h[1] > 0.0) {
            return Err(Error::Config(format!(
                "bad plate {nx}x{ny} with element size {h:?}"
            )));
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 * h[0], j as f64 * h[1]]);
            }
        }
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([
                    node(i, j),
                    node(i + 1, j),
                    node(i + 1, j + 1),
                    node(i, j + 1),
                ]);
            }
        }
        let fixed: Vec<usize> = (0..=nx)
            .flat_map(|i| [2 * node(i, 0), 2 * node(i, 0) + 1])
            .collect();
        let loaded: Vec<usize> = (0..=nx).map(|i| 2 * node(i, ny) + 1).collect();
        let mut mesh = Self {
            nx,
            ny,
            nodes,
            elements,
            fixed,
            loaded,
            free: Vec::new(),
        };
        mesh.free = mesh.complement();
        mesh.check()?;
        Ok(mesh)
    }

    fn complement(&self) -> Vec<usize> {
        let mut constrained = vec![false; self.n_dofs()];
        for &d in self.fixed.iter().chain(&self.loaded) {
            constrained[d] = true;
        }
        (0..self.n_dofs()).filter(|&d| !constrained[d]).collect()
    }

    /// Connectivity and orientation check.
    pub fn check(&self) -> Result<()> {
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.iter().any(|&n| n >= self.nodes.len()) {
                return Err(Error::Config(format!(
                    "element {e} references a missing node"
                )));
            }
            let x = conn.map(|n| self.nodes[n]);
            // Jacobian determinant at the centroid is a quarter of the signed area
            let area = 0.5
                * ((x[2][0] - x[0][0]) * (x[3][1] - x[1][1])
                    - (x[3][0] - x[1][0]) * (x[2][1] - x[0][1]));
            if !(area > 0.0) {
                return Err(Error::Config(format!(
                    "element {e} is inverted or degenerate"
                )));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn height(&self) -> f64 {
        self.nodes
            .iter()
            .map(|p| p[1])
            .fold(f64::NEG_INFINITY, f64::max)
            - self
                .nodes
                .iter()
                .map(|p| p[1])
                .fold(f64::INFINITY, f64::min)
    }

    pub fn centroids(&self) -> Vec<[f64; 2]> {
        self.elements
            .iter()
            .map(|conn| {
                let s = conn.iter().fold([0.0, 0.0], |a, &n| {
                    [a[0] + self.nodes[n][0], a[1] + self.nodes[n][1]]
                });
                [s[0] / 4.0, s[1] / 4.0]
            })
            .collect()
    }

    /// Node index mirrored about the vertical center line.
    pub fn mirror_node(&self, n: usize) -> usize {
        let (i, j) = (n % (self.nx + 1), n / (self.nx + 1));
        j * (self.nx + 1) + (self.nx - i)
    }
}
