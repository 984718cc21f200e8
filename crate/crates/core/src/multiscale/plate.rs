//! Two-scale plate: per-element RVE tangents feeding a quasi-static FE solve.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fem::{
    factor_free, internal_forces, newton_step, ElementGeometry, FemOptions, StepResult,
};
use super::kl::{kl_field, GrfConfig};
use super::mesh::MacroMesh;
use crate::arrayfile::{voigt2_to_array, voigt4_from_array, ArrayData, ArrayFile};
use crate::dataset::{sample_seed, stratify_vof};
use crate::error::{Error, Result};
use crate::grid::{StiffnessField, StrainField, StressField};
use crate::homogenize::{
    concentration_with, homogenized_stiffness, ConcentrationField, Homogenized,
};
use crate::rve::{assign_properties, generate_fiber_rve, FiberRveConfig, Microstructure};
use crate::solver::{LsSolver, SolverConfig};
use crate::tensor::{contract_42, IsotropicProps, Voigt2, Voigt4};

/// What one macro element needs to obtain its micro response.
#[derive(Debug, Clone)]
pub struct MicroInput {
    pub micro: Microstructure,
    pub fiber: IsotropicProps,
    pub matrix: IsotropicProps,
    /// Precomputed 𝔸 field `(T1, T2, 3, 3)`; solved from scratch when absent.
    pub concentration: Option<PathBuf>,
}

/// Micro response of one element; the tangent is load independent.
#[derive(Debug, Clone)]
pub struct ElementMicro {
    pub tangent: Homogenized,
    pub iterations: [usize; 3],
    /// Stiffness and concentration grids, kept only on request.
    pub fields: Option<(Arc<StiffnessField>, ConcentrationField)>,
}

/// Computes every element's tangent concurrently.
pub fn prepare_micro(
    inputs: &[MicroInput],
    solver: &SolverConfig,
    keep: &[bool],
) -> Result<Vec<ElementMicro>> {
    inputs
        .par_iter()
        .enumerate()
        .map(|(e, inp)| {
            let c_field = Arc::new(assign_properties(&inp.micro, inp.fiber, inp.matrix)?);
            let a = match &inp.concentration {
                Some(path) => {
                    let field = voigt4_from_array(&ArrayFile::read(path)?, c_field.pixel_size())?;
                    ConcentrationField::external(field)
                }
                None => concentration_with(&LsSolver::from_arc(c_field.clone(), *solver)?)?,
            };
            let tangent = homogenized_stiffness(&c_field, &a)?;
            log::debug!("element {e}: tangent ready, iterations {:?}", a.iterations);
            Ok(ElementMicro {
                iterations: a.iterations,
                fields: keep
                    .get(e)
                    .copied()
                    .unwrap_or(false)
                    .then(|| (c_field, a.clone())),
                tangent,
            })
        })
        .collect()
}

/// `ε(x) = 𝔸(x):ε_M`, `σ(x) = ℂ(x):ε(x)`.
pub fn recover_micro(
    a_field: &ConcentrationField,
    c_field: &StiffnessField,
    macro_strain: Voigt2,
) -> Result<(StrainField, StressField)> {
    c_field.same_shape(&a_field.field)?;
    let strain = a_field.field.map(|a| contract_42(a, &macro_strain));
    let data = strain
        .as_slice()
        .iter()
        .zip(c_field.as_slice())
        .map(|(e, c)| contract_42(c, e))
        .collect();
    let stress = StressField::from_vec(c_field.shape(), c_field.pixel_size(), data)?;
    Ok((strain, stress))
}

/// Converged macro state at the end of one load step.
#[derive(Debug, Clone)]
pub struct MacroState {
    pub step: StepResult,
    /// Nodal displacements (mm).
    pub s: Vec<f64>,
    pub strain: Vec<Voigt2>,
    pub stress: Vec<Voigt2>,
    pub f_int: Vec<f64>,
}

/// Linear quasi-static loading in `load_steps` equal increments up to `s_total`.
pub fn solve_macro(
    mesh: &MacroMesh,
    tangents: &[Voigt4],
    load_steps: usize,
    s_total: f64,
    opts: &FemOptions,
) -> Result<Vec<MacroState>> {
    if tangents.len() != mesh.n_elements() {
        return Err(Error::Shape(format!(
            "{} tangents for {} elements",
            tangents.len(),
            mesh.n_elements()
        )));
    }
    if load_steps == 0 {
        return Err(Error::Config("load_steps must be >= 1".into()));
    }
    let geo: Vec<ElementGeometry> = (0..mesh.n_elements())
        .map(|e| ElementGeometry::new(mesh, e))
        .collect();
    let k_ff = factor_free(mesh, &geo, tangents, opts)?;
    let mut s = vec![0.0; mesh.n_dofs()];
    let mut states = Vec::with_capacity(load_steps);
    for n in 1..=load_steps {
        let applied = s_total * n as f64 / load_steps as f64;
        let (step, f_int) = newton_step(mesh, &geo, tangents, &k_ff, &mut s, applied, opts)?;
        let strain: Vec<Voigt2> = geo
            .iter()
            .map(|g| g.centroid_strain(&g.gather(&s)))
            .collect();
        let stress = strain
            .iter()
            .zip(tangents)
            .map(|(e, c)| contract_42(c, e))
            .collect();
        log::info!(
            "step {n}: applied {applied:.5} mm, reaction {:.6e}, newton {}",
            step.reaction,
            step.newton_iterations
        );
        states.push(MacroState {
            step,
            s: s.clone(),
            strain,
            stress,
            f_int,
        });
    }
    Ok(states)
}

/// Macro solve driven by element micro responses.
pub fn solve_plate(
    mesh: &MacroMesh,
    micro: &[ElementMicro],
    load_steps: usize,
    s_total: f64,
    opts: &FemOptions,
) -> Result<Vec<MacroState>> {
    let tangents: Vec<Voigt4> = micro.iter().map(|m| m.tangent.cbar).collect();
    solve_macro(mesh, &tangents, load_steps, s_total, opts)
}

/// `‖⟨σ(x)⟩ − C̄:ε_M‖ / ‖C̄:ε_M‖` using `⟨σ(x)⟩ = ⟨ℂ·𝔸⟩:ε_M`.
pub fn hill_error(t: &Homogenized, macro_strain: Voigt2) -> f64 {
    let macro_stress = t.cbar * macro_strain;
    let denom = macro_stress.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (t.raw * macro_strain - macro_stress).norm() / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MicroConfig {
    pub resolution: [usize; 2],
    /// RVE size (μm).
    pub domain: [f64; 2],
    pub vof_range: [f64; 2],
    pub n_vof_groups: usize,
    pub r_mean: f64,
    pub r_std_frac: f64,
    pub nu_f: f64,
    pub nu_m: f64,
    pub fiber_modulus: GrfConfig,
    pub matrix_modulus: GrfConfig,
    pub solver: SolverConfig,
    pub seed: u64,
    /// Directory of precomputed `element_XXXXX.arr` concentration fields.
    pub concentration_dir: Option<PathBuf>,
}

impl Default for MicroConfig {
    fn default() -> Self {
        Self {
            resolution: [512, 512],
            domain: [50.0, 50.0],
            vof_range: [0.4, 0.6],
            n_vof_groups: 20,
            r_mean: 3.5,
            r_std_frac: 0.01,
            nu_f: 0.2,
            nu_m: 0.35,
            fiber_modulus: GrfConfig {
                mean: 74.0,
                std: 2.0,
                seed: 1,
                ..Default::default()
            },
            matrix_modulus: GrfConfig {
                mean: 3.35,
                std: 0.1,
                seed: 2,
                ..Default::default()
            },
            solver: SolverConfig {
                tol: 1e-8,
                ..Default::default()
            },
            seed: 0,
            concentration_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlateConfig {
    pub nx: usize,
    pub ny: usize,
    /// Element edge length (mm).
    pub element_size: f64,
    /// Final top displacement (mm); 5% of the plate height when absent.
    pub s_total: Option<f64>,
    pub load_steps: usize,
    pub fem: FemOptions,
    pub micro: MicroConfig,
    /// Elements whose micro strain and stress are written at every step.
    pub recover_elements: Vec<usize>,
}

impl Default for PlateConfig {
    fn default() -> Self {
        Self {
            nx: 40,
            ny: 75,
            element_size: 0.05,
            s_total: None,
            load_steps: 5,
            fem: FemOptions::default(),
            micro: MicroConfig::default(),
            recover_elements: Vec::new(),
        }
    }
}

impl PlateConfig {
    pub fn mesh(&self) -> Result<MacroMesh> {
        MacroMesh::plate(self.nx, self.ny, [self.element_size; 2])
    }

    pub fn applied_total(&self, mesh: &MacroMesh) -> f64 {
        self.s_total.unwrap_or(0.05 * mesh.height())
    }
}

/// Per-element material sample: `[E_f, ν_f, E_m, ν_m]` and vof label.
pub fn element_materials(mesh: &MacroMesh, m: &MicroConfig) -> Result<(Vec<[f64; 4]>, Vec<f64>)> {
    let centroids = mesh.centroids();
    let ef = kl_field(&centroids, &m.fiber_modulus)?;
    let em = kl_field(&centroids, &m.matrix_modulus)?;
    let props = ef
        .iter()
        .zip(&em)
        .map(|(&a, &b)| [a, m.nu_f, b, m.nu_m])
        .collect();
    let groups = stratify_vof(m.n_vof_groups, m.vof_range, m.n_vof_groups)?;
    let mut vof: Vec<f64> = (0..mesh.n_elements())
        .map(|e| groups[e % groups.len()])
        .collect();
    vof.shuffle(&mut ChaCha8Rng::seed_from_u64(m.seed));
    Ok((props, vof))
}

pub fn concentration_file(dir: &Path, element: usize) -> PathBuf {
    dir.join(format!("element_{element:05}.arr"))
}

/// Per-element micro inputs, `[E_f, ν_f, E_m, ν_m]` rows and vof labels.
type ElementInputs = (Vec<MicroInput>, Vec<[f64; 4]>, Vec<f64>);

/// Builds the micro inputs (RVE, phase properties, optional 𝔸 file) of every element.
pub fn micro_inputs(mesh: &MacroMesh, m: &MicroConfig) -> Result<ElementInputs> {
    let (props, vof) = element_materials(mesh, m)?;
    let inputs = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let micro = generate_fiber_rve(&FiberRveConfig {
                vof_target: vof[e],
                r_mean: m.r_mean,
                r_std_frac: m.r_std_frac,
                domain: m.domain,
                resolution: m.resolution,
                seed: sample_seed(m.seed, e),
                ..Default::default()
            })?;
            Ok(MicroInput {
                micro,
                fiber: IsotropicProps::new(props[e][0], props[e][1])?,
                matrix: IsotropicProps::new(props[e][2], props[e][3])?,
                concentration: m
                    .concentration_dir
                    .as_deref()
                    .map(|d| concentration_file(d, e)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((inputs, props, vof))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateSummary {
    pub n_elements: usize,
    pub n_dofs: usize,
    pub s_total: f64,
    pub steps: Vec<StepResult>,
    pub max_hill_error: f64,
    pub max_tangent_asymmetry: f64,
    pub max_micro_iterations: usize,
    pub micro_seconds: f64,
    pub macro_seconds: f64,
}

pub struct PlateRun {
    pub mesh: MacroMesh,
    pub micro: Vec<ElementMicro>,
    pub states: Vec<MacroState>,
    pub summary: PlateSummary,
}

fn nodal(v: &[f64]) -> ArrayFile {
    ArrayFile {
        shape: vec![v.len() / 2, 2],
        data: ArrayData::F64(v.to_vec()),
    }
}

fn per_element(v: &[Voigt2]) -> ArrayFile {
    ArrayFile {
        shape: vec![v.len(), 3],
        data: ArrayData::F64(v.iter().flat_map(|x| x.0).collect()),
    }
}

/// Full two-scale run; writes arrays and a summary under `out` when given.
pub fn run_plate(cfg: &PlateConfig, out: Option<&Path>) -> Result<PlateRun> {
    let mesh = cfg.mesh()?;
    if let Some(&bad) = cfg
        .recover_elements
        .iter()
        .find(|&&e| e >= mesh.n_elements())
    {
        return Err(Error::Config(format!(
            "recover element {bad} is outside the mesh"
        )));
    }
    let t0 = Instant::now();
    let (inputs, props, vof) = micro_inputs(&mesh, &cfg.micro)?;
    let keep: Vec<bool> = (0..mesh.n_elements())
        .map(|e| cfg.recover_elements.contains(&e))
        .collect();
    let micro = prepare_micro(&inputs, &cfg.micro.solver, &keep)?;
    let micro_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let s_total = cfg.applied_total(&mesh);
    let states = solve_plate(&mesh, &micro, cfg.load_steps, s_total, &cfg.fem)?;
    let macro_seconds = t1.elapsed().as_secs_f64();

    let last = states.last().expect("at least one step");
    let max_hill_error = micro
        .iter()
        .zip(&last.strain)
        .map(|(m, e)| hill_error(&m.tangent, *e))
        .fold(0.0, f64::max);
    let summary = PlateSummary {
        n_elements: mesh.n_elements(),
        n_dofs: mesh.n_dofs(),
        s_total,
        steps: states.iter().map(|s| s.step.clone()).collect(),
        max_hill_error,
        max_tangent_asymmetry: micro
            .iter()
            .map(|m| m.tangent.asymmetry)
            .fold(0.0, f64::max),
        max_micro_iterations: micro.iter().flat_map(|m| m.iterations).max().unwrap_or(0),
        micro_seconds,
        macro_seconds,
    };

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let ne = mesh.n_elements();
        ArrayFile::f64(
            vec![ne, 3, 3],
            micro
                .iter()
                .flat_map(|m| m.tangent.cbar.0.into_iter().flatten())
                .collect(),
        )?
        .write(dir.join("tangents.arr"))?;
        ArrayFile::f64(vec![ne, 4], props.into_iter().flatten().collect())?
            .write(dir.join("element_properties.arr"))?;
        ArrayFile::f64(vec![ne], vof)?.write(dir.join("element_vof.arr"))?;
        for (n, st) in states.iter().enumerate() {
            let sd = dir.join(format!("step_{:02}", n + 1));
            fs::create_dir_all(&sd)?;
            nodal(&st.s).write(sd.join("displacement.arr"))?;
            nodal(&st.f_int).write(sd.join("internal_force.arr"))?;
            per_element(&st.strain).write(sd.join("macro_strain.arr"))?;
            per_element(&st.stress).write(sd.join("macro_stress.arr"))?;
            for &e in &cfg.recover_elements {
                let (c, a) = micro[e].fields.as_ref().expect("kept for recovery");
                let (eps, sig) = recover_micro(a, c, st.strain[e])?;
                voigt2_to_array(&eps).write(sd.join(format!("micro_strain_{e:05}.arr")))?;
                voigt2_to_array(&sig).write(sd.join(format!("micro_stress_{e:05}.arr")))?;
            }
        }
        fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
    }
    Ok(PlateRun {
        mesh,
        micro,
        states,
        summary,
    })
}

/// Global equilibrium defect `‖F_int(free)‖ / ‖F_int‖`.
pub fn equilibrium_defect(
    mesh: &MacroMesh,
    tangents: &[Voigt4],
    s: &[f64],
    opts: &FemOptions,
) -> f64 {
    let geo: Vec<ElementGeometry> = (0..mesh.n_elements())
        .map(|e| ElementGeometry::new(mesh, e))
        .collect();
    let f = internal_forces(mesh, &geo, tangents, s, opts);
    let free: f64 = mesh.free.iter().map(|&d| f[d] * f[d]).sum::<f64>().sqrt();
    let all: f64 = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    if all == 0.0 {
        0.0
    } else {
        free / all
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::stiffness_from_enu;

    fn homogeneous(mesh: &MacroMesh) -> Vec<Voigt4> {
        vec![stiffness_from_enu(IsotropicProps { e: 3.35, nu: 0.35 }).unwrap(); mesh.n_elements()]
    }

    #[test]
    fn linear_plate_converges_in_one_newton_step() {
        let mesh = MacroMesh::plate(4, 8, [0.05, 0.05]).unwrap();
        let t = homogeneous(&mesh);
        let opts = FemOptions::default();
        let states = solve_macro(&mesh, &t, 5, 0.02, &opts).unwrap();
        let r1 = states[0].step.reaction;
        assert!(r1 > 0.0);
        for (n, st) in states.iter().enumerate() {
            assert_eq!(st.step.newton_iterations, 1);
            assert!(st.step.residual_norm <= 1e-7);
            assert!(
                (st.step.reaction - r1 * (n + 1) as f64).abs() <= 1e-10 * st.step.reaction.abs()
            );
            assert!(equilibrium_defect(&mesh, &t, &st.s, &opts) <= 1e-9);
        }
    }

    #[test]
    fn mirror_symmetry() {
        let mesh = MacroMesh::plate(5, 6, [0.05, 0.05]).unwrap();
        let t = homogeneous(&mesh);
        for integration in [
            super::super::fem::Integration::Reduced,
            super::super::fem::Integration::Full,
        ] {
            let opts = FemOptions {
                integration,
                ..Default::default()
            };
            let st = solve_macro(&mesh, &t, 1, 0.01, &opts)
                .unwrap()
                .pop()
                .unwrap();
            let scale = st.s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for n in 0..mesh.n_nodes() {
                let m = mesh.mirror_node(n);
                assert!((st.s[2 * n] + st.s[2 * m]).abs() <= 1e-9 * scale);
                assert!((st.s[2 * n + 1] - st.s[2 * m + 1]).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn unsupported_plate_is_singular() {
        let mut mesh = MacroMesh::plate(2, 2, [1.0, 1.0]).unwrap();
        mesh.fixed.clear();
        mesh.free = (0..mesh.n_dofs())
            .filter(|d| !mesh.loaded.contains(d))
            .collect();
        let t = homogeneous(&mesh);
        assert!(matches!(
            solve_macro(&mesh, &t, 1, 0.1, &FemOptions::default()),
            Err(Error::SingularStiffness(_))
        ));
    }

    #[test]
    fn recovery_of_homogeneous_element() {
        let m = Microstructure::uniform([8, 8], [50.0, 50.0], 0);
        let p = IsotropicProps { e: 3.35, nu: 0.35 };
        let inputs = vec![MicroInput {
            micro: m,
            fiber: p,
            matrix: p,
            concentration: None,
        }];
        let em = prepare_micro(&inputs, &SolverConfig::default(), &[true]).unwrap();
        let (c, a) = em[0].fields.as_ref().unwrap();
        let eps_m = Voigt2::new(1e-3, -2e-4, 5e-4);
        let (eps, sig) = recover_micro(a, c, eps_m).unwrap();
        let expect = stiffness_from_enu(p).unwrap() * eps_m;
        assert!(sig
            .as_slice()
            .iter()
            .all(|s| (*s - expect).norm() <= 1e-12 * expect.norm()));
        assert!((eps.mean() - eps_m).norm() <= 1e-15);
        let (z, zs) = recover_micro(a, c, Voigt2::ZERO).unwrap();
        assert!(z
            .as_slice()
            .iter()
            .chain(zs.as_slice())
            .all(|v| *v == Voigt2::ZERO));
        assert_eq!(hill_error(&em[0].tangent, eps_m), 0.0);
    }

    #[test]
    fn materials_follow_groups_and_means() {
        let mesh = MacroMesh::plate(4, 5, [0.05, 0.05]).unwrap();
        let m = MicroConfig {
            fiber_modulus: GrfConfig {
                std: 0.0,
                mean: 74.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let (props, vof) = element_materials(&mesh, &m).unwrap();
        assert!(props
            .iter()
            .all(|p| p[0] == 74.0 && p[1] == 0.2 && p[3] == 0.35));
        let mut sorted = vof.clone();
        sorted.sort_by(f64::total_cmp);
        let expect = stratify_vof(20, [0.4, 0.6], 20).unwrap();
        assert_eq!(sorted, expect);
    }
}
