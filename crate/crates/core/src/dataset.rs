//! Batch production of (microstructure, properties, 𝔸) samples.
//!
//! Layout of an output directory:
//!
//! ```text
//! manifest.json
//! sample_00000/microstructure.arr   u8  (T1, T2)
//! sample_00000/properties.arr       f64 (4,)  [E_f, ν_f, E_m, ν_m]
//! sample_00000/concentration.arr    f64 (T1, T2, 3, 3)
//! sample_00000/stiffness.arr        f64 (T1, T2, 3, 3), only with `store_stiffness`
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arrayfile::{voigt4_from_array, voigt4_to_array, ArrayFile};
use crate::error::{Error, Result};
use crate::homogenize::strain_concentration;
use crate::rve::{assign_properties, generate_fiber_rve, FiberRveConfig};
use crate::solver::SolverConfig;
use crate::tensor::IsotropicProps;

pub const MANIFEST: &str = "manifest.json";
const MEAN_IDENTITY_TOL: f64 = 1e-8;

/// Sampling ranges for the four phase properties (GPa / dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyBounds {
    pub e_f: [f64; 2],
    pub nu_f: [f64; 2],
    pub e_m: [f64; 2],
    pub nu_m: [f64; 2],
}

impl Default for PropertyBounds {
    fn default() -> Self {
        Self {
            e_f: [5.0, 85.0],
            nu_f: [0.05, 0.45],
            e_m: [2.5, 5.0],
            nu_m: [0.3, 0.4],
        }
    }
}

impl PropertyBounds {
    pub fn as_rows(&self) -> [[f64; 2]; 4] {
        [self.e_f, self.nu_f, self.e_m, self.nu_m]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub resolution: [usize; 2],
    /// RVE size (μm).
    pub domain_size: [f64; 2],
    pub vof_range: [f64; 2],
    pub n_vof_groups: usize,
    pub r_mean: f64,
    pub r_std_frac: f64,
    pub property_bounds: PropertyBounds,
    pub master_seed: u64,
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    /// Also persist the per-pixel stiffness.
    pub store_stiffness: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_samples: 20,
            resolution: [512, 512],
            domain_size: [50.0, 50.0],
            vof_range: [0.4, 0.6],
            n_vof_groups: 20,
            r_mean: 3.5,
            r_std_frac: 0.01,
            property_bounds: PropertyBounds::default(),
            master_seed: 0,
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("dataset"),
            store_stiffness: false,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_vof_groups == 0 {
            return Err(Error::Config(
                "n_samples and n_vof_groups must be >= 1".into(),
            ));
        }
        if !self.n_samples.is_multiple_of(self.n_vof_groups) {
            return Err(Error::Config(format!(
                "n_samples ({}) must be divisible by n_vof_groups ({})",
                self.n_samples, self.n_vof_groups
            )));
        }
        let [lo, hi] = self.vof_range;
        if !(lo <= hi) {
            return Err(Error::Config(format!(
                "vof_range {:?} is not ordered",
                self.vof_range
            )));
        }
        for (name, [lo, hi]) in ["e_f", "nu_f", "e_m", "nu_m"]
            .iter()
            .zip(self.property_bounds.as_rows())
        {
            if !(lo <= hi) {
                return Err(Error::Config(format!(
                    "property bound {name} = [{lo}, {hi}] is not ordered"
                )));
            }
        }
        for (e, nu) in [
            (self.property_bounds.e_f, self.property_bounds.nu_f),
            (self.property_bounds.e_m, self.property_bounds.nu_m),
        ] {
            IsotropicProps::new(e[0], nu[0])?;
            IsotropicProps::new(e[1], nu[1])?;
        }
        self.solver.validate()
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Fiber cell settings of one sample.
    pub fn fiber_config(&self, vof: f64, seed: u64) -> FiberRveConfig {
        FiberRveConfig {
            vof_target: vof,
            r_mean: self.r_mean,
            r_std_frac: self.r_std_frac,
            domain: self.domain_size,
            resolution: self.resolution,
            seed,
            ..Default::default()
        }
    }
}

/// Latin hypercube design: per column, one draw in each of `n` equal strata, in shuffled order.
pub fn lhs_sample(n: usize, bounds: &[[f64; 2]; 4], seed: u64) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = vec![[0.0; 4]; n];
    for (d, [lo, hi]) in bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (row, s) in table.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            row[d] = lo + (hi - lo) * (s as f64 + u) / n as f64;
        }
    }
    table
}

/// `groups` evenly spaced fractions over `range`, each repeated in a contiguous block.
pub fn stratify_vof(n: usize, range: [f64; 2], groups: usize) -> Result<Vec<f64>> {
    if groups == 0 || !n.is_multiple_of(groups) {
        return Err(Error::Config(format!(
            "{n} samples cannot be split into {groups} groups"
        )));
    }
    let [lo, hi] = range;
    let per = n / groups;
    Ok((0..n)
        .map(|i| {
            let g = i / per;
            if groups == 1 {
                lo
            } else {
                lo + g as f64 * (hi - lo) / (groups - 1) as f64
            }
        })
        .collect())
}

/// Per-sample seed: first 8 bytes (LE) of SHA-256(master ‖ index).
pub fn sample_seed(master: u64, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the dataset root.
    pub path: PathBuf,
    pub dtype: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub index: usize,
    pub seed: u64,
    pub vof_label: f64,
    pub achieved_vof: f64,
    /// `[E_f, ν_f, E_m, ν_m]`.
    pub properties: [f64; 4],
    pub residuals: [f64; 3],
    pub iterations: [usize; 3],
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub config_hash: String,
    pub samples: Vec<SampleEntry>,
    pub failures: Vec<SampleFailure>,
}

pub fn sample_dir_name(index: usize) -> String {
    format!("sample_{index:05}")
}

fn write_entry(root: &Path, rel: PathBuf, a: &ArrayFile) -> Result<FileEntry> {
    a.write(root.join(&rel))?;
    Ok(FileEntry {
        path: rel,
        dtype: a.dtype().name().to_string(),
        shape: a.shape.clone(),
    })
}

fn generate_sample(
    cfg: &DatasetConfig,
    index: usize,
    vof: f64,
    props: [f64; 4],
) -> Result<SampleEntry> {
    let seed = sample_seed(cfg.master_seed, index);
    let micro = generate_fiber_rve(&cfg.fiber_config(vof, seed))?;
    let fiber = IsotropicProps::new(props[0], props[1])?;
    let matrix = IsotropicProps::new(props[2], props[3])?;
    let c_field = assign_properties(&micro, fiber, matrix)?;
    let a = strain_concentration(&c_field, &cfg.solver)?;

    let root = &cfg.output_dir;
    let dir = PathBuf::from(sample_dir_name(index));
    fs::create_dir_all(root.join(&dir))?;
    let [t1, t2] = cfg.resolution;
    let mut files = vec![
        write_entry(
            root,
            dir.join("microstructure.arr"),
            &ArrayFile::u8(vec![t1, t2], micro.grid.clone())?,
        )?,
        write_entry(
            root,
            dir.join("properties.arr"),
            &ArrayFile::f64(vec![4], props.to_vec())?,
        )?,
        write_entry(
            root,
            dir.join("concentration.arr"),
            &voigt4_to_array(&a.field),
        )?,
    ];
    if cfg.store_stiffness {
        files.push(write_entry(
            root,
            dir.join("stiffness.arr"),
            &voigt4_to_array(&c_field),
        )?);
    }
    Ok(SampleEntry {
        index,
        seed,
        vof_label: vof,
        achieved_vof: micro.achieved_vof,
        properties: props,
        residuals: a.residuals,
        iterations: a.iterations,
        files,
    })
}

/// Generates every sample on the current rayon pool and writes the manifest last.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let table = lhs_sample(
        cfg.n_samples,
        &cfg.property_bounds.as_rows(),
        cfg.master_seed,
    );
    let vofs = stratify_vof(cfg.n_samples, cfg.vof_range, cfg.n_vof_groups)?;

    let outcomes: Vec<_> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let r = generate_sample(cfg, i, vofs[i], table[i]);
            match &r {
                Ok(s) => log::info!(
                    "sample {i}: vof {:.4}, iterations {:?}",
                    s.achieved_vof,
                    s.iterations
                ),
                Err(e) => log::warn!("sample {i} failed: {e}"),
            }
            (i, r)
        })
        .collect();

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (index, r) in outcomes {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => failures.push(SampleFailure {
                index,
                seed: sample_seed(cfg.master_seed, index),
                reason: e.to_string(),
            }),
        }
    }
    let manifest = Manifest {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        samples,
        failures,
    };
    fs::write(
        cfg.output_dir.join(MANIFEST),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples_checked: usize,
    pub files_checked: usize,
    pub max_mean_identity_error: f64,
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-reads every stored array and re-checks shapes, headers and `mean(𝔸) = I`.
pub fn validate_dataset(dir: &Path) -> Result<ValidationReport> {
    let manifest = read_manifest(dir)?;
    let mut report = ValidationReport::default();
    let mut referenced = BTreeSet::new();
    let [t1, t2] = manifest.config.resolution;
    for s in &manifest.samples {
        report.samples_checked += 1;
        for f in &s.files {
            if !referenced.insert(f.path.clone()) {
                report
                    .violations
                    .push(format!("{} is listed twice", f.path.display()));
            }
            let a = match ArrayFile::read(dir.join(&f.path)) {
                Ok(a) => a,
                Err(e) => {
                    report.violations.push(format!("{}: {e}", f.path.display()));
                    continue;
                }
            };
            report.files_checked += 1;
            if a.shape != f.shape || a.dtype().name() != f.dtype {
                report.violations.push(format!(
                    "{}: header says {} {:?}, manifest says {} {:?}",
                    f.path.display(),
                    a.dtype().name(),
                    a.shape,
                    f.dtype,
                    f.shape
                ));
            }
            let name = f
                .path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            match name {
                "microstructure.arr" => {
                    if a.shape != [t1, t2] || a.as_u8().is_none_or(|g| g.iter().any(|&v| v > 1)) {
                        report
                            .violations
                            .push(format!("{}: not a binary {t1}x{t2} grid", f.path.display()));
                    }
                }
                "concentration.arr" => match voigt4_from_array(&a, [1.0, 1.0]) {
                    Ok(field) => {
                        let err = field.mean().max_abs_diff(&crate::tensor::Voigt4::IDENTITY);
                        report.max_mean_identity_error = report.max_mean_identity_error.max(err);
                        if !(err <= MEAN_IDENTITY_TOL) {
                            report.violations.push(format!(
                                "{}: mean(A) deviates from I by {err:.3e}",
                                f.path.display()
                            ));
                        }
                    }
                    Err(e) => report.violations.push(format!("{}: {e}", f.path.display())),
                },
                _ => {}
            }
        }
    }
    // every array on disk must be referenced
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        for file in fs::read_dir(entry.path())? {
            let rel = PathBuf::from(entry.file_name()).join(file?.file_name());
            if !referenced.contains(&rel) {
                report
                    .violations
                    .push(format!("{} is not in the manifest", rel.display()));
            }
        }
    }
    Ok(report)
}
