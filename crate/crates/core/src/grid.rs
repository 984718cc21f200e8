//! Periodic pixel fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Voigt2, Voigt4};

/// A `T1 × T2` periodic field stored row-major (`index = p * T2 + q`),
/// together with the pixel size along each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2<T> {
    shape: [usize; 2],
    pixel: [f64; 2],
    data: Vec<T>,
}

pub type StiffnessField = Field2<Voigt4>;
pub type StrainField = Field2<Voigt2>;
pub type StressField = Field2<Voigt2>;

impl<T: Clone> Field2<T> {
    pub fn filled(shape: [usize; 2], pixel: [f64; 2], value: T) -> Self {
        Self {
            shape,
            pixel,
            data: vec![value; shape[0] * shape[1]],
        }
    }
}

impl<T> Field2<T> {
    pub fn from_vec(shape: [usize; 2], pixel: [f64; 2], data: Vec<T>) -> Result<Self> {
        if shape[0] == 0 || shape[1] == 0 {
            return Err(Error::Shape(format!("empty grid {shape:?}")));
        }
        if data.len() != shape[0] * shape[1] {
            return Err(Error::Shape(format!(
                "{} values for a {}x{} grid",
                data.len(),
                shape[0],
                shape[1]
            )));
        }
        if !(pixel[0] > 0.0 && pixel[1] > 0.0) {
            return Err(Error::Shape(format!(
                "pixel size must be positive, got {pixel:?}"
            )));
        }
        Ok(Self { shape, pixel, data })
    }

    /// Pixel sizes chosen so the cell has the given physical size.
    pub fn from_domain(shape: [usize; 2], domain: [f64; 2], data: Vec<T>) -> Result<Self> {
        let pixel = [domain[0] / shape[0] as f64, domain[1] / shape[1] as f64];
        Self::from_vec(shape, pixel, data)
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Field2<U> {
        Field2 {
            shape: self.shape,
            pixel: self.pixel,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn pixel_size(&self) -> [f64; 2] {
        self.pixel
    }

    pub fn domain(&self) -> [f64; 2] {
        [
            self.pixel[0] * self.shape[0] as f64,
            self.pixel[1] * self.shape[1] as f64,
        ]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, p: usize, q: usize) -> &T {
        &self.data[p * self.shape[1] + q]
    }

    pub fn same_shape<U>(&self, other: &Field2<U>) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

impl Field2<Voigt2> {
    pub fn mean(&self) -> Voigt2 {
        let mut acc = [0.0; 3];
        for v in &self.data {
            for (a, x) in acc.iter_mut().zip(v.0) {
                *a += x;
            }
        }
        let n = self.data.len() as f64;
        Voigt2(acc.map(|a| a / n))
    }

    /// Root-sum-square over all pixels and components.
    pub fn l2_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| v.0.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

impl Field2<Voigt4> {
    pub fn mean(&self) -> Voigt4 {
        let mut acc = Voigt4::ZERO;
        for m in &self.data {
            acc = acc + *m;
        }
        acc * (1.0 / self.data.len() as f64)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.data.iter().all(|m| *m == self.data[0])
    }
}
