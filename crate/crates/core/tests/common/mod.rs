//! Independent reference computations shared by the integration targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// Plane-strain Lamé pair `(λ, μ)` from `(E, ν)`.
pub fn lame(e: f64, nu: f64) -> (f64, f64) {
    (
        e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        e / (2.0 * (1.0 + nu)),
    )
}

fn signed(i: usize, t: usize) -> i64 {
    if 2 * i < t {
        i as i64
    } else {
        i as i64 - t as i64
    }
}

/// Rotated-grid frequency of bin `(p, q)`; Nyquist cosines are exactly zero.
fn rotated_xi(p: usize, q: usize, shape: [usize; 2], h: [f64; 2]) -> [f64; 2] {
    let half = |i: usize, t: usize| {
        let k = signed(i, t);
        if t.is_multiple_of(2) && 2 * k.unsigned_abs() as usize == t {
            (k.signum() as f64, 0.0)
        } else {
            let a = PI * k as f64 / t as f64;
            (a.sin(), a.cos())
        }
    };
    let (s1, c1) = half(p, shape[0]);
    let (s2, c2) = half(q, shape[1]);
    [2.0 / h[0] * s1 * c2, 2.0 / h[1] * c1 * s2]
}

/// Full index-form Green tensor `Γ_ijkl(ξ)` of an isotropic medium; zero at `ξ = 0`.
fn green_tensor(xi: [f64; 2], lambda: f64, mu: f64) -> [[[[f64; 2]; 2]; 2]; 2] {
    let mut g = [[[[0.0; 2]; 2]; 2]; 2];
    let n2 = xi[0] * xi[0] + xi[1] * xi[1];
    if n2 == 0.0 {
        return g;
    }
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let c2 = (lambda + mu) / (mu * (lambda + 2.0 * mu));
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let a = d(k, i) * xi[l] * xi[j]
                        + d(l, i) * xi[k] * xi[j]
                        + d(k, j) * xi[l] * xi[i]
                        + d(l, j) * xi[k] * xi[i];
                    g[i][j][k][l] =
                        a / (4.0 * mu * n2) - c2 * xi[i] * xi[j] * xi[k] * xi[l] / (n2 * n2);
                }
            }
        }
    }
    g
}

/// Rotated-grid Green operator in real space: `kernel[d]` maps a tensorial
/// `(τ11, τ22, τ12)` at offset `d` to `(ε11, ε22, ε12)`, by direct DFT sums.
pub fn real_space_green(
    shape: [usize; 2],
    h: [f64; 2],
    lambda0: f64,
    mu0: f64,
) -> Vec<[[f64; 3]; 3]> {
    let [t1, t2] = shape;
    let n = t1 * t2;
    let idx = [(0, 0), (1, 1), (0, 1)];
    let hat: Vec<[[f64; 3]; 3]> = (0..n)
        .map(|k| {
            let g = green_tensor(rotated_xi(k / t2, k % t2, shape, h), lambda0, mu0);
            let mut m = [[0.0; 3]; 3];
            for (r, &(i, j)) in idx.iter().enumerate() {
                for (c, &(k, l)) in idx.iter().enumerate() {
                    // τ12 and τ21 both contribute
                    m[r][c] = if k == l {
                        g[i][j][k][l]
                    } else {
                        g[i][j][k][l] + g[i][j][l][k]
                    };
                }
            }
            m
        })
        .collect();
    (0..n)
        .map(|d| {
            let (d1, d2) = ((d / t2) as f64, (d % t2) as f64);
            let mut m = [[0.0; 3]; 3];
            for (k, gk) in hat.iter().enumerate() {
                let (k1, k2) = (signed(k / t2, t1) as f64, signed(k % t2, t2) as f64);
                let phase = 2.0 * PI * (k1 * d1 / t1 as f64 + k2 * d2 / t2 as f64);
                let w = phase.cos() / n as f64;
                for r in 0..3 {
                    for c in 0..3 {
                        m[r][c] += w * gk[r][c];
                    }
                }
            }
            m
        })
        .collect()
}

/// Isotropic stiffness acting on tensorial strain `(ε11, ε22, ε12)`.
pub fn stiffness(lambda: f64, mu: f64) -> [[f64; 3]; 3] {
    [
        [lambda + 2.0 * mu, lambda, 0.0],
        [lambda, lambda + 2.0 * mu, 0.0],
        [0.0, 0.0, 2.0 * mu],
    ]
}

/// Solves `ε + Γ⁰ * ((ℂ − ℂ⁰) ε) = ε̄` as one dense system; `phases` holds `(λ, μ)` per pixel.
pub fn dense_solve(
    phases: &[(f64, f64)],
    shape: [usize; 2],
    h: [f64; 2],
    macro_strain: [f64; 3],
) -> Vec<[f64; 3]> {
    let [t1, t2] = shape;
    let n = t1 * t2;
    let lmin = phases.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let lmax = phases.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mmin = phases.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mmax = phases.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (l0, m0) = (0.5 * (lmin + lmax), 0.5 * (mmin + mmax));
    let c0 = stiffness(l0, m0);
    let kernel = real_space_green(shape, h, l0, m0);
    let mut a = DMatrix::<f64>::identity(3 * n, 3 * n);
    for x in 0..n {
        for y in 0..n {
            let d1 = (x / t2 + t1 - y / t2) % t1;
            let d2 = (x % t2 + t2 - y % t2) % t2;
            let g = &kernel[d1 * t2 + d2];
            let c = stiffness(phases[y].0, phases[y].1);
            for r in 0..3 {
                for s in 0..3 {
                    let mut v = 0.0;
                    for m in 0..3 {
                        v += g[r][m] * (c[m][s] - c0[m][s]);
                    }
                    a[(3 * x + r, 3 * y + s)] += v;
                }
            }
        }
    }
    let b = DVector::from_fn(3 * n, |i, _| macro_strain[i % 3]);
    let e = a.lu().solve(&b).expect("oracle system is nonsingular");
    (0..n)
        .map(|k| [e[3 * k], e[3 * k + 1], e[3 * k + 2]])
        .collect()
}

/// `‖a − b‖₂ / ‖b‖₂` over all components.
pub fn rel_l2(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in a.iter().zip(b) {
        for c in 0..3 {
            num += (x[c] - y[c]).powi(2);
            den += y[c] * y[c];
        }
    }
    (num / den).sqrt()
}
