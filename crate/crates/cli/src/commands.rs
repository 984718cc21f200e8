//! Subcommand bodies. Each one validates its config, echoes it, runs, and
//! returns a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use micromech::arrayfile::{voigt2_to_array, voigt4_to_array, ArrayFile};
use micromech::dataset::{generate_dataset, validate_dataset, DatasetConfig, MANIFEST};
use micromech::error::{Error, Result};
use micromech::homogenize::{homogenized_stiffness, stiffness_bounds, strain_concentration};
use micromech::image::{export_image, write_pgm};
use micromech::multiscale::{run_plate, PlateConfig};
use micromech::rve::{
    assign_properties, cahn_hilliard, generate_fiber_rve, generate_spinodal_rve, FiberRveConfig,
    Microstructure, Origin, SpinodalParams,
};
use micromech::solver::{solve_unit_load, SolverConfig};
use micromech::tensor::{IsotropicProps, Voigt2};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const CONFIG_ECHO: &str = "config.json";

/// Writes the resolved config next to the outputs before any work starts.
pub fn echo_config<T: Serialize>(out: &Path, cfg: &T) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(
        out.join(CONFIG_ECHO),
        serde_json::to_string_pretty(cfg)? + "\n",
    )?;
    Ok(())
}

fn write_microstructure(out: &Path, m: &Microstructure) -> Result<()> {
    ArrayFile::u8(m.shape.to_vec(), m.grid.clone())?.write(out.join("microstructure.arr"))?;
    write_pgm(
        out.join("microstructure.pgm"),
        m.shape[1],
        m.shape[0],
        &m.to_gray(),
    )?;
    fs::write(
        out.join("microstructure.json"),
        serde_json::to_string_pretty(m)? + "\n",
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinodalConfig {
    pub params: SpinodalParams,
    /// Cell size (μm).
    pub domain: [f64; 2],
    pub resolution: [usize; 2],
    pub seed: u64,
}

impl Default for SpinodalConfig {
    fn default() -> Self {
        Self {
            params: SpinodalParams::default(),
            domain: [50.0, 50.0],
            resolution: [256, 256],
            seed: 0,
        }
    }
}

/// Where a solve or homogenization gets its cell from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RveSource {
    Fibers(FiberRveConfig),
    Spinodal(SpinodalConfig),
    /// A stored `u8` grid.
    File {
        path: PathBuf,
        domain: [f64; 2],
    },
    Uniform {
        resolution: [usize; 2],
        domain: [f64; 2],
        phase: u8,
    },
}

impl Default for RveSource {
    fn default() -> Self {
        RveSource::Fibers(FiberRveConfig::default())
    }
}

impl RveSource {
    fn build(&self) -> Result<Microstructure> {
        match self {
            RveSource::Fibers(c) => generate_fiber_rve(c),
            RveSource::Spinodal(c) => {
                generate_spinodal_rve(&c.params, c.domain, c.resolution, c.seed)
            }
            RveSource::File { path, domain } => {
                let a = ArrayFile::read(path)?;
                let grid = a.as_u8().ok_or_else(|| {
                    Error::Config(format!("{} must hold a u8 grid", path.display()))
                })?;
                if a.shape.len() != 2 {
                    return Err(Error::Shape(format!(
                        "{} has shape {:?}, expected 2-D",
                        path.display(),
                        a.shape
                    )));
                }
                Microstructure::from_grid(
                    [a.shape[0], a.shape[1]],
                    *domain,
                    grid.to_vec(),
                    0,
                    Origin::External,
                )
            }
            RveSource::Uniform {
                resolution,
                domain,
                phase,
            } => {
                if *phase > 1 {
                    return Err(Error::Config(format!(
                        "uniform phase must be 0 or 1, got {phase}"
                    )));
                }
                Ok(Microstructure::uniform(*resolution, *domain, *phase))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            RveSource::Fibers(c) => c.validate(),
            RveSource::Spinodal(c) => c.params.validate(),
            RveSource::File { path, .. } if !path.is_file() => Err(Error::Config(format!(
                "microstructure file {} does not exist",
                path.display()
            ))),
            _ => Ok(()),
        }
    }
}

fn glass() -> IsotropicProps {
    IsotropicProps { e: 74.0, nu: 0.2 }
}

fn epoxy() -> IsotropicProps {
    IsotropicProps { e: 3.35, nu: 0.35 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub rve: RveSource,
    /// Phase 1 (fiber / hard) properties, E in GPa.
    pub fiber: IsotropicProps,
    /// Phase 0 (matrix / soft) properties.
    pub matrix: IsotropicProps,
    /// Imposed mean strain `[ε11, ε22, ε12]`.
    pub macro_strain: Voigt2,
    pub solver: SolverConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rve: RveSource::default(),
            fiber: glass(),
            matrix: epoxy(),
            macro_strain: Voigt2::unit(0),
            solver: SolverConfig::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        self.rve.validate()?;
        self.fiber.validate()?;
        self.matrix.validate()?;
        self.solver.validate()?;
        if !self.macro_strain.is_finite() {
            return Err(Error::Config("macro_strain must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomogenizeConfig {
    pub rve: RveSource,
    pub fiber: IsotropicProps,
    pub matrix: IsotropicProps,
    pub solver: SolverConfig,
    /// Store the strain concentration field as `concentration.arr`.
    pub write_concentration: bool,
}

impl Default for HomogenizeConfig {
    fn default() -> Self {
        Self {
            rve: RveSource::default(),
            fiber: glass(),
            matrix: epoxy(),
            solver: SolverConfig::default(),
            write_concentration: true,
        }
    }
}

impl HomogenizeConfig {
    pub fn validate(&self) -> Result<()> {
        self.rve.validate()?;
        self.fiber.validate()?;
        self.matrix.validate()?;
        self.solver.validate()
    }
}

pub fn gen_rve(cfg: &FiberRveConfig, out: &Path) -> Result<Value> {
    cfg.validate()?;
    echo_config(out, cfg)?;
    let m = generate_fiber_rve(cfg)?;
    write_microstructure(out, &m)?;
    let radius_scale = match &m.origin {
        Origin::Fibers { radius_scale, .. } => Some(*radius_scale),
        _ => None,
    };
    info!(
        "{} fibers, vof {:.4}",
        m.fibers.as_ref().map_or(0, Vec::len),
        m.achieved_vof
    );
    Ok(json!({
        "shape": m.shape,
        "domain": m.domain,
        "vof_target": cfg.vof_target,
        "achieved_vof": m.achieved_vof,
        "n_fibers": m.fibers.as_ref().map_or(0, Vec::len),
        "radius_scale": radius_scale,
    }))
}

pub fn gen_spinodal(cfg: &SpinodalConfig, out: &Path) -> Result<Value> {
    cfg.params.validate()?;
    echo_config(out, cfg)?;
    let state = cahn_hilliard(&cfg.params, cfg.domain, cfg.resolution, cfg.seed)?;
    ArrayFile::f64(cfg.resolution.to_vec(), state.concentration.clone())?
        .write(out.join("concentration.arr"))?;
    let grid = state
        .concentration
        .iter()
        .map(|&v| if v > cfg.params.threshold { 0 } else { 1 })
        .collect();
    let m = Microstructure::from_grid(
        cfg.resolution,
        cfg.domain,
        grid,
        cfg.seed,
        Origin::Spinodal {
            params: cfg.params.clone(),
        },
    )?;
    write_microstructure(out, &m)?;
    let soft = 1.0 - m.achieved_vof;
    if !(0.4..=0.6).contains(&soft) {
        warn!("soft phase fraction {soft:.3} is outside [0.4, 0.6]");
    }
    Ok(json!({
        "shape": m.shape,
        "domain": m.domain,
        "initial_mean": state.initial_mean,
        "final_mean": state.final_mean,
        "mean_drift": state.mean_drift(),
        "soft_fraction": soft,
        "hard_fraction": m.achieved_vof,
    }))
}

pub fn solve(cfg: &SolveConfig, out: &Path) -> Result<Value> {
    cfg.validate()?;
    echo_config(out, cfg)?;
    let m = cfg.rve.build()?;
    write_microstructure(out, &m)?;
    let c = assign_properties(&m, cfg.fiber, cfg.matrix)?;
    let r = solve_unit_load(&c, cfg.macro_strain, &cfg.solver)?;
    voigt2_to_array(&r.strain).write(out.join("strain.arr"))?;
    voigt2_to_array(&r.stress).write(out.join("stress.arr"))?;
    info!(
        "converged in {} iterations, residual {:.3e}",
        r.iterations, r.final_residual
    );
    Ok(json!({
        "shape": m.shape,
        "achieved_vof": m.achieved_vof,
        "iterations": r.iterations,
        "final_residual": r.final_residual,
        "converged": r.converged,
        "max_mean_drift": r.max_mean_drift,
        "residual_history": r.residual_history,
        "mean_strain": r.strain.mean(),
        "mean_stress": r.stress.mean(),
    }))
}

pub fn homogenize(cfg: &HomogenizeConfig, out: &Path) -> Result<Value> {
    cfg.validate()?;
    echo_config(out, cfg)?;
    let m = cfg.rve.build()?;
    write_microstructure(out, &m)?;
    let c = assign_properties(&m, cfg.fiber, cfg.matrix)?;
    let a = strain_concentration(&c, &cfg.solver)?;
    if cfg.write_concentration {
        voigt4_to_array(&a.field).write(out.join("concentration.arr"))?;
    }
    let h = homogenized_stiffness(&c, &a)?;
    if let Some(w) = &h.warning {
        warn!("{w}");
    }
    let eff = h.effective()?;
    let bounds = stiffness_bounds(&c)?;
    info!("E = {:.6} GPa, nu = {:.6}", eff.e, eff.nu);
    Ok(json!({
        "shape": m.shape,
        "achieved_vof": m.achieved_vof,
        "E": eff.e,
        "nu": eff.nu,
        "cbar": h.cbar,
        "raw": h.raw,
        "asymmetry": h.asymmetry,
        "anisotropy": h.anisotropy,
        "warning": h.warning,
        "bounds": bounds,
        "iterations": a.iterations,
        "residuals": a.residuals,
        "mean_identity_error": a.mean_identity_error(),
    }))
}

pub fn dataset(cfg: &DatasetConfig) -> Result<Value> {
    cfg.validate()?;
    echo_config(&cfg.output_dir, cfg)?;
    let manifest = generate_dataset(cfg)?;
    for f in &manifest.failures {
        warn!("sample {} (seed {}) failed: {}", f.index, f.seed, f.reason);
    }
    Ok(json!({
        "output_dir": cfg.output_dir,
        "manifest": cfg.output_dir.join(MANIFEST),
        "config_hash": manifest.config_hash,
        "samples": manifest.samples.len(),
        "failures": manifest.failures.len(),
    }))
}

pub fn multiscale(cfg: &PlateConfig, out: &Path) -> Result<Value> {
    cfg.mesh()?;
    echo_config(out, cfg)?;
    let run = run_plate(cfg, Some(out))?;
    Ok(serde_json::to_value(&run.summary)?)
}

pub fn image(field: &Path, component: Option<usize>, out: &Path) -> Result<Value> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let sidecar = export_image(field, component, out)?;
    Ok(serde_json::to_value(&sidecar)?)
}

/// Returns the report and whether it is clean.
pub fn validate(dir: &Path) -> Result<(Value, bool)> {
    let report = validate_dataset(dir)?;
    for v in &report.violations {
        log::error!("{v}");
    }
    Ok((serde_json::to_value(&report)?, report.ok()))
}
