use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid material: {0}")]
    Domain(String),

    #[error("singular effective stiffness: C1111 == C1212 ({0})")]
    Singular(f64),

    #[error("degenerate reference medium: 2*mu0 + lambda0 = 0")]
    DegenerateMedium,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("zero mean stress: convergence metric is undefined")]
    ZeroMeanStress,

    #[error("no convergence after {iterations} iterations (last residual {last_residual:.3e})")]
    NotConverged {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("load case {load}: {source}")]
    LoadCase {
        load: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fiber packing failed: {0}")]
    Packing(String),

    #[error("spinodal run unstable at step {step}: concentration reached {value}")]
    Unstable { step: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("singular stiffness matrix at equation {0} (mechanism or missing constraints)")]
    SingularStiffness(usize),

    #[error("Newton iteration did not converge in {iterations} iterations (|R| = {residual:.3e})")]
    Newton { iterations: usize, residual: f64 },

    #[error("array file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
