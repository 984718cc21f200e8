//! Concurrent two-scale plate simulation.

mod banded;
mod fem;
mod kl;
mod mesh;
mod plate;

pub use banded::BandedCholesky;
pub use fem::{
    assemble_dense, internal_forces, ElementGeometry, FemOptions, Integration, StepResult,
};
pub use kl::{kl_field, GrfConfig, KlBasis};
pub use mesh::MacroMesh;
pub use plate::{
    concentration_file, element_materials, equilibrium_defect, hill_error, micro_inputs,
    prepare_micro, recover_micro, run_plate, solve_macro, solve_plate, ElementMicro, MacroState,
    MicroConfig, MicroInput, PlateConfig, PlateRun, PlateSummary,
};
