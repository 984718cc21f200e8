//! Grayscale PGM (P5) export of grids and stored fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arrayfile::ArrayFile;
use crate::error::{Error, Result};

/// Binary PGM bytes; `gray` is row-major with `height` rows of `width` bytes.
pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Result<Vec<u8>> {
    if gray.len() != width * height || gray.is_empty() {
        return Err(Error::Shape(format!(
            "{} bytes for a {width}x{height} image",
            gray.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    fs::write(path, encode_pgm(width, height, gray)?)?;
    Ok(())
}

/// Parses a P5 image with maxval 255; returns `(width, height, raster)`.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u8>), String> {
    let mut fields = Vec::with_capacity(4);
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(format!(
            "not an 8-bit P5 image: {} / {}",
            fields[0], fields[3]
        ));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| format!("bad dimension {s:?}: {e}"))
    };
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let raster = bytes.get(i + 1..).unwrap_or_default();
    if raster.len() != w * h {
        return Err(format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            w * h
        ));
    }
    Ok((w, h, raster.to_vec()))
}

/// Normalization echoed next to every exported image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSidecar {
    pub source: PathBuf,
    pub component: Option<usize>,
    pub width: usize,
    pub height: usize,
    pub min: f64,
    pub max: f64,
    /// Set when min == max and the image was written all zero.
    pub degenerate: bool,
}

/// Sidecar path for an image: `<out>.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Selects one 2-D slice of a stored array.
///
/// Shapes `(T1, T2)` take no component; `(T1, T2, C)` and `(T1, T2, 3, 3)` take an
/// index into the flattened trailing axes.
pub fn select_component(a: &ArrayFile, component: Option<usize>) -> Result<([usize; 2], Vec<f64>)> {
    if a.shape.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least two axes, got {:?}",
            a.shape
        )));
    }
    let (t1, t2) = (a.shape[0], a.shape[1]);
    let stride: usize = a.shape[2..].iter().product();
    let values = a.to_f64_vec();
    let k = match (stride, component) {
        (1, None | Some(0)) => 0,
        (_, Some(k)) if k < stride => k,
        (_, c) => {
            return Err(Error::Shape(format!(
                "component {c:?} is invalid for shape {:?} ({stride} per pixel)",
                a.shape
            )))
        }
    };
    Ok((
        [t1, t2],
        values.iter().skip(k).step_by(stride).copied().collect(),
    ))
}

/// Min-max normalizes `values` to 0..=255; a constant field maps to all zeros.
pub fn normalize_gray(values: &[f64]) -> (Vec<u8>, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let gray = if span > 0.0 && span.is_finite() {
        values
            .iter()
            .map(|v| ((v - min) / span * 255.0).round() as u8)
            .collect()
    } else {
        vec![0; values.len()]
    };
    (gray, min, max)
}

/// Writes one field component as a PGM (rows = first axis) plus its normalization sidecar.
pub fn export_image(
    field_file: &Path,
    component: Option<usize>,
    out: &Path,
) -> Result<ImageSidecar> {
    let a = ArrayFile::read(field_file)?;
    let ([t1, t2], values) = select_component(&a, component)?;
    let (gray, min, max) = normalize_gray(&values);
    let degenerate = !(max > min);
    if degenerate {
        log::warn!(
            "{}: constant field ({min}); writing an all-zero image",
            field_file.display()
        );
    }
    write_pgm(out, t2, t1, &gray)?;
    let sidecar = ImageSidecar {
        source: field_file.to_path_buf(),
        component,
        width: t2,
        height: t1,
        min,
        max,
        degenerate,
    };
    fs::write(sidecar_path(out), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(sidecar)
}
