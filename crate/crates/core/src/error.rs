use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {got} does not match grid cell count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("field `{0}` contains a non-finite value")]
    NonFinite(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("operation requires a radial grid")]
    NotRadial,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scheme `{scheme}` is incompatible with eps = {eps}")]
    SchemeMismatch { scheme: &'static str, eps: u8 },

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("linear solver did not reach relative residual {tol:e} (got {achieved:e})")]
    LinearSolveFailed { tol: f64, achieved: f64 },

    #[error("residual evaluation left the representable range: {0}")]
    Range(String),

    #[error("newton iteration failed: {0}")]
    NewtonFailed(String),

    #[error("simulation broke down at t = {t:e}")]
    Breakdown { t: f64 },

    #[error("power-law fit rejected: {0}")]
    DegenerateFit(String),
}

pub type Result<T> = std::result::Result<T, Error>;
