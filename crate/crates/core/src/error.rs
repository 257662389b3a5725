use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("barycentric coordinates sum to {sum}, expected 1")]
    NotBarycentric { sum: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("dual basis system is singular after gauge fixing (d={d}, k={k})")]
    SingularDualSystem { d: usize, k: usize },

    #[error("dual basis identity `{identity}` violated at {location}: residual {residual:e}")]
    DualBasisResidual {
        identity: &'static str,
        location: String,
        residual: f64,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("point {0:?} lies outside the mesh")]
    OutsideDomain(Vec<f64>),

    #[error("singular matrix in {0}")]
    Singular(String),

    #[error("invalid functional: {0}")]
    InvalidFunctional(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
