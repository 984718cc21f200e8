//! Discrete frequency grids and the periodic Green operator of an isotropic
//! reference medium.
//!
//! The Voigt matrices produced here act on a stress-like vector with
//! tensorial shear `(τ11, τ22, τ12)` and return a strain-like vector whose
//! third entry is the *engineering* shear `2ε12`. [`GreenField::apply`]
//! converts the output back to tensorial shear before it reaches the solver.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::tensor::{Lame, Voigt2, Voigt4};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqScheme {
    Continuous,
    #[default]
    RotatedGrid,
}

/// Signed FFT bin index of position `i` in a length-`t` transform.
fn signed_bin(i: usize, t: usize) -> i64 {
    let half = t.div_ceil(2);
    if i < half {
        i as i64
    } else {
        i as i64 - t as i64
    }
}

/// Frequencies `(2π / (h T)) · k` in FFT order.
pub fn frequency_vector(t: usize, h: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (h * t as f64);
    (0..t).map(|i| scale * signed_bin(i, t) as f64).collect()
}

/// Per-pixel frequency vectors of a `T1 × T2` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    pub shape: [usize; 2],
    pub pixel: [f64; 2],
    pub scheme: FreqScheme,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
}

impl FreqGrid {
    pub fn continuous(shape: [usize; 2], pixel: [f64; 2]) -> Self {
        let f1 = frequency_vector(shape[0], pixel[0]);
        let f2 = frequency_vector(shape[1], pixel[1]);
        let n = shape[0] * shape[1];
        let mut xi1 = Vec::with_capacity(n);
        let mut xi2 = Vec::with_capacity(n);
        for &a in &f1 {
            for &b in &f2 {
                xi1.push(a);
                xi2.push(b);
            }
        }
        Self {
            shape,
            pixel,
            scheme: FreqScheme::Continuous,
            xi1,
            xi2,
        }
    }

    pub fn new(shape: [usize; 2], pixel: [f64; 2], scheme: FreqScheme) -> Self {
        let g = Self::continuous(shape, pixel);
        match scheme {
            FreqScheme::Continuous => g,
            FreqScheme::RotatedGrid => modified_frequencies(&g).expect("continuous input"),
        }
    }

    pub fn len(&self) -> usize {
        self.xi1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi1.is_empty()
    }

    /// True when bin `(p, q)` lies on the Nyquist line of an even axis.
    pub fn is_nyquist(&self, p: usize, q: usize) -> bool {
        let [t1, t2] = self.shape;
        (t1 % 2 == 0 && p == t1 / 2) || (t2 % 2 == 0 && q == t2 / 2)
    }
}

/// `sin(πk/T)` and `cos(πk/T)` with the Nyquist bin snapped to exact values.
fn half_angle(i: usize, t: usize) -> (f64, f64) {
    let k = signed_bin(i, t);
    if t.is_multiple_of(2) && 2 * k.unsigned_abs() as usize == t {
        return (k.signum() as f64, 0.0);
    }
    let half = PI * k as f64 / t as f64;
    (half.sin(), half.cos())
}

/// Rotated-grid modified frequencies. The trigonometric arguments are the
/// per-pixel phase angles `θ_i = h_i ξ_i`.
pub fn modified_frequencies(g: &FreqGrid) -> Result<FreqGrid> {
    if g.scheme != FreqScheme::Continuous {
        return Err(Error::Config(
            "modified frequencies require a continuous grid".into(),
        ));
    }
    let [t1, t2] = g.shape;
    let [h1, h2] = g.pixel;
    let mut xi1 = Vec::with_capacity(g.len());
    let mut xi2 = Vec::with_capacity(g.len());
    for p in 0..t1 {
        let (s1, c1) = half_angle(p, t1);
        for q in 0..t2 {
            let (s2, c2) = half_angle(q, t2);
            xi1.push(2.0 / h1 * s1 * c2);
            xi2.push(2.0 / h2 * c1 * s2);
        }
    }
    Ok(FreqGrid {
        shape: g.shape,
        pixel: g.pixel,
        scheme: FreqScheme::RotatedGrid,
        xi1,
        xi2,
    })
}

/// Voigt form of `Ĝ⁽¹⁾(ξ)`; `ξ` must be nonzero.
pub fn green_part1(xi: [f64; 2]) -> Voigt4 {
    let [a, b] = xi;
    let n2 = a * a + b * b;
    let (aa, bb, ab) = (4.0 * a * a / n2, 4.0 * b * b / n2, 4.0 * a * b / n2);
    Voigt4([
        [aa, 0.0, ab],
        [0.0, bb, ab],
        [ab, ab, 4.0 * (a * a + b * b) / n2],
    ])
}

/// Voigt form of `Ĝ⁽²⁾(ξ)`; `ξ` must be nonzero.
pub fn green_part2(xi: [f64; 2]) -> Voigt4 {
    let [a, b] = xi;
    let n2 = a * a + b * b;
    let n4 = n2 * n2;
    let (a2, b2) = (a * a, b * b);
    let m = [
        [a2 * a2 / n4, a2 * b2 / n4, 2.0 * a2 * a * b / n4],
        [a2 * b2 / n4, b2 * b2 / n4, 2.0 * a * b2 * b / n4],
        [
            2.0 * a2 * a * b / n4,
            2.0 * a * b2 * b / n4,
            4.0 * a2 * b2 / n4,
        ],
    ];
    Voigt4(m) * -1.0
}

fn check_medium(lame0: Lame) -> Result<()> {
    if !(lame0.mu > 0.0) {
        return Err(Error::Domain(format!(
            "reference shear modulus must be > 0, got {}",
            lame0.mu
        )));
    }
    if 2.0 * lame0.mu + lame0.lambda == 0.0 {
        return Err(Error::DegenerateMedium);
    }
    Ok(())
}

/// `Ĝ⁽⁰⁾(ξ)` for one frequency vector; zero at `ξ = 0`.
pub fn green_at(xi: [f64; 2], lame0: Lame) -> Result<Voigt4> {
    check_medium(lame0)?;
    Ok(green_at_unchecked(xi, lame0))
}

fn green_at_unchecked(xi: [f64; 2], lame0: Lame) -> Voigt4 {
    if xi == [0.0, 0.0] {
        return Voigt4::ZERO;
    }
    let Lame { lambda, mu } = lame0;
    let c1 = 1.0 / (4.0 * mu);
    let c2 = (mu + lambda) / (mu * (2.0 * mu + lambda));
    green_part1(xi) * c1 + green_part2(xi) * c2
}

/// Compliance of the reference medium in the same (engineering-shear output) form.
fn reference_compliance(lame0: Lame) -> Voigt4 {
    let Lame { lambda, mu } = lame0;
    let d = lambda + 2.0 * mu;
    Voigt4([[d, lambda, 0.0], [lambda, d, 0.0], [0.0, 0.0, mu]])
        .inverse()
        .expect("reference medium is positive definite")
}

/// Precomputed Green operator on a frequency grid.
#[derive(Debug, Clone)]
pub struct GreenField {
    pub shape: [usize; 2],
    pub scheme: FreqScheme,
    pub lame0: Lame,
    pub values: Vec<Voigt4>,
}

/// Builds `Ĝ⁽⁰⁾` on every bin of `g`.
///
/// Bins whose frequency vector is exactly zero (the DC bin, and for the
/// rotated grid also the checkerboard corner of an even grid) get the zero
/// matrix. For the continuous scheme the Nyquist lines of even axes get the
/// reference compliance, which keeps the operator Hermitian and forces the
/// stress at those unpaired frequencies to vanish.
pub fn green_operator(g: &FreqGrid, lame0: Lame) -> Result<GreenField> {
    check_medium(lame0)?;
    let [t1, t2] = g.shape;
    let mut values = Vec::with_capacity(g.len());
    let compliance = reference_compliance(lame0);
    for p in 0..t1 {
        for q in 0..t2 {
            let k = p * t2 + q;
            let xi = [g.xi1[k], g.xi2[k]];
            if xi == [0.0, 0.0] {
                values.push(Voigt4::ZERO);
                continue;
            }
            if g.scheme == FreqScheme::Continuous && g.is_nyquist(p, q) {
                values.push(compliance);
                continue;
            }
            values.push(green_at_unchecked(xi, lame0));
        }
    }
    Ok(GreenField {
        shape: g.shape,
        scheme: g.scheme,
        lame0,
        values,
    })
}

impl GreenField {
    /// Replaces the three Fourier components of a polarization field by the
    /// tensorial strain fluctuation magnitude `Ĝ⁽⁰⁾ : τ̂` (callers subtract it).
    pub fn apply(&self, comps: &mut [Vec<Complex64>; 3]) {
        let [c0, c1, c2] = comps;
        for (k, g) in self.values.iter().enumerate() {
            let t = [c0[k], c1[k], c2[k]];
            let m = &g.0;
            let out = [
                t[0] * m[0][0] + t[1] * m[0][1] + t[2] * m[0][2],
                t[0] * m[1][0] + t[1] * m[1][1] + t[2] * m[1][2],
                t[0] * m[2][0] + t[1] * m[2][1] + t[2] * m[2][2],
            ];
            c0[k] = out[0];
            c1[k] = out[1];
            // engineering -> tensorial shear
            c2[k] = out[2] * 0.5;
        }
    }

    /// Applies the operator to a real pixel field; returns the real part and
    /// the largest imaginary residue relative to the output norm.
    pub fn convolve_real(&self, fft: &mut Fft2, field: &[Voigt2]) -> (Vec<Voigt2>, f64) {
        let mut comps: [Vec<Complex64>; 3] =
            std::array::from_fn(|c| field.iter().map(|v| Complex64::new(v.0[c], 0.0)).collect());
        for c in comps.iter_mut() {
            fft.forward(c);
        }
        self.apply(&mut comps);
        for c in comps.iter_mut() {
            fft.inverse(c);
        }
        let mut max_imag: f64 = 0.0;
        let mut norm2 = 0.0;
        let out = (0..field.len())
            .map(|k| {
                Voigt2(std::array::from_fn(|c| {
                    let z = comps[c][k];
                    max_imag = max_imag.max(z.im.abs());
                    norm2 += z.re * z.re;
                    z.re
                }))
            })
            .collect();
        let norm = norm2.sqrt();
        let rel = if norm > 0.0 {
            max_imag / norm
        } else {
            max_imag
        };
        (out, rel)
    }
}

/// Reference medium with Lamé constants at the midpoint of the field's range.
pub fn reference_material(lame_field: &[Lame]) -> Result<Lame> {
    if lame_field.is_empty() {
        return Err(Error::Shape("empty Lamé field".into()));
    }
    let (mut lmin, mut lmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut mmin, mut mmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in lame_field {
        lmin = lmin.min(l.lambda);
        lmax = lmax.max(l.lambda);
        mmin = mmin.min(l.mu);
        mmax = mmax.max(l.mu);
    }
    Ok(Lame {
        lambda: 0.5 * (lmin + lmax),
        mu: 0.5 * (mmin + mmax),
    })
}
