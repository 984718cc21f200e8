//! Self-describing binary arrays: one JSON header line, then the raw payload.
//!
//! ```text
//! {"dtype": "f64", "shape": [64, 64, 3, 3], "order": "C", "byte_order": "LE"}\n
//! <little-endian, C-order bytes>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::Field2;
use crate::tensor::{Voigt2, Voigt4};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F64,
    U8,
}

impl Dtype {
    pub fn name(self) -> &'static str {
        match self {
            Dtype::F64 => "f64",
            Dtype::U8 => "u8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::U8 => 1,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "f64" => Some(Dtype::F64),
            "u8" => Some(Dtype::U8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    U8(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dtype: String,
    shape: Vec<usize>,
    order: String,
    byte_order: String,
}

impl ArrayFile {
    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        Self::checked(shape, ArrayData::F64(data))
    }

    pub fn u8(shape: Vec<usize>, data: Vec<u8>) -> Result<Self> {
        Self::checked(shape, ArrayData::U8(data))
    }

    fn checked(shape: Vec<usize>, data: ArrayData) -> Result<Self> {
        let a = Self { shape, data };
        if a.len() != a.shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "{} values for shape {:?}",
                a.len(),
                a.shape
            )));
        }
        Ok(a)
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            ArrayData::F64(_) => Dtype::F64,
            ArrayData::U8(_) => Dtype::U8,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ArrayData::F64(v) => v.len(),
            ArrayData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn header(&self) -> String {
        let dims: Vec<String> = self.shape.iter().map(|d| d.to_string()).collect();
        format!(
            "{{\"dtype\": \"{}\", \"shape\": [{}], \"order\": \"C\", \"byte_order\": \"LE\"}}\n",
            self.dtype().name(),
            dims.join(", ")
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header();
        let mut out = Vec::with_capacity(header.len() + self.len() * self.dtype().size());
        out.extend_from_slice(header.as_bytes());
        match &self.data {
            ArrayData::F64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::U8(v) => out.extend_from_slice(v),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or("missing header line")?;
        let text =
            std::str::from_utf8(&bytes[..nl]).map_err(|e| format!("header is not UTF-8: {e}"))?;
        let h: Header = serde_json::from_str(text).map_err(|e| format!("bad header: {e}"))?;
        let dtype =
            Dtype::parse(&h.dtype).ok_or_else(|| format!("unsupported dtype {:?}", h.dtype))?;
        if h.order != "C" || h.byte_order != "LE" {
            return Err(format!(
                "unsupported layout order={} byte_order={}",
                h.order, h.byte_order
            ));
        }
        let n: usize = h.shape.iter().product();
        let payload = &bytes[nl + 1..];
        if payload.len() != n * dtype.size() {
            return Err(format!(
                "payload is {} bytes, shape {:?} of {} needs {}",
                payload.len(),
                h.shape,
                dtype.name(),
                n * dtype.size()
            ));
        }
        let data = match dtype {
            Dtype::F64 => ArrayData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            ),
            Dtype::U8 => ArrayData::U8(payload.to_vec()),
        };
        Ok(Self {
            shape: h.shape,
            data,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path.as_ref())?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes).map_err(|msg| Error::format(path, msg))
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            ArrayData::F64(v) => Some(v),
            ArrayData::U8(_) => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            ArrayData::U8(v) => Some(v),
            ArrayData::F64(_) => None,
        }
    }

    /// Values widened to f64, whatever the stored dtype.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.data {
            ArrayData::F64(v) => v.clone(),
            ArrayData::U8(v) => v.iter().map(|&b| b as f64).collect(),
        }
    }
}

/// `(T1, T2, 3, 3)` array of a per-pixel Voigt4 field.
pub fn voigt4_to_array(f: &Field2<Voigt4>) -> ArrayFile {
    let [t1, t2] = f.shape();
    let data = f
        .as_slice()
        .iter()
        .flat_map(|m| m.0.into_iter().flatten())
        .collect();
    ArrayFile {
        shape: vec![t1, t2, 3, 3],
        data: ArrayData::F64(data),
    }
}

pub fn voigt4_from_array(a: &ArrayFile, pixel: [f64; 2]) -> Result<Field2<Voigt4>> {
    let v = a
        .as_f64()
        .ok_or_else(|| Error::Shape("expected an f64 array".into()))?;
    if a.shape.len() != 4 || a.shape[2..] != [3, 3] {
        return Err(Error::Shape(format!(
            "expected (T1, T2, 3, 3), got {:?}",
            a.shape
        )));
    }
    let data = v
        .chunks_exact(9)
        .map(|c| Voigt4([[c[0], c[1], c[2]], [c[3], c[4], c[5]], [c[6], c[7], c[8]]]))
        .collect();
    Field2::from_vec([a.shape[0], a.shape[1]], pixel, data)
}

/// `(T1, T2, 3)` array of a per-pixel Voigt2 field.
pub fn voigt2_to_array(f: &Field2<Voigt2>) -> ArrayFile {
    let [t1, t2] = f.shape();
    let data = f.as_slice().iter().flat_map(|v| v.0).collect();
    ArrayFile {
        shape: vec![t1, t2, 3],
        data: ArrayData::F64(data),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_grammar_is_exact() {
        let a = ArrayFile::f64(vec![64, 64, 3, 3], vec![0.0; 64 * 64 * 9]).unwrap();
        assert_eq!(
            a.header(),
            "{\"dtype\": \"f64\", \"shape\": [64, 64, 3, 3], \"order\": \"C\", \"byte_order\": \"LE\"}\n"
        );
        let b = ArrayFile::u8(vec![2, 3], vec![0, 1, 0, 1, 1, 0]).unwrap();
        assert!(b
            .header()
            .starts_with("{\"dtype\": \"u8\", \"shape\": [2, 3],"));
        assert_eq!(b.to_bytes().len(), b.header().len() + 6);
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let vals = vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300, f64::NAN, -7.25];
        let a = ArrayFile::f64(vec![3, 2], vals.clone()).unwrap();
        let b = ArrayFile::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(b.shape, vec![3, 2]);
        let got = b.as_f64().unwrap();
        assert!(got
            .iter()
            .zip(&vals)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_malformed_input() {
        let a = ArrayFile::u8(vec![4], vec![1, 2, 3, 4]).unwrap();
        let mut bytes = a.to_bytes();
        bytes.pop();
        assert!(ArrayFile::from_bytes(&bytes)
            .unwrap_err()
            .contains("payload"));
        assert!(ArrayFile::from_bytes(b"no newline").is_err());
        assert!(ArrayFile::from_bytes(
            b"{\"dtype\": \"f32\", \"shape\": [], \"order\": \"C\", \"byte_order\": \"LE\"}\n"
        )
        .is_err());
        assert!(ArrayFile::from_bytes(
            b"{\"dtype\": \"u8\", \"shape\": [1], \"order\": \"F\", \"byte_order\": \"LE\"}\nx"
        )
        .is_err());
        assert!(ArrayFile::f64(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn voigt4_layout_is_row_major_per_pixel() {
        let m = Voigt4([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]]);
        let f = Field2::from_vec([1, 2], [1.0, 1.0], vec![m, m * 2.0]).unwrap();
        let a = voigt4_to_array(&f);
        assert_eq!(a.shape, vec![1, 2, 3, 3]);
        assert_eq!(&a.as_f64().unwrap()[..4], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.as_f64().unwrap()[9], 2.0);
        let back = voigt4_from_array(&a, [1.0, 1.0]).unwrap();
        assert_eq!(back, f);
    }
}
