use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid rank: base rank {base_rank} exceeds row count {rows}")]
    InvalidRank { base_rank: usize, rows: usize },

    #[error("{what}: generation failed after {attempts} attempts")]
    GenerationFailure { what: &'static str, attempts: usize },

    #[error("mixing scheme mismatch: {0}")]
    Scheme(String),

    #[error("mixing matrix construction failed: {0}")]
    Construction(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("constraint is infeasible: b is not in the range of A (relative residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(
        "agent {agent}: tolerance {target:.3e} unreachable within {iterations} iterations (achieved {achieved:.3e})"
    )]
    ToleranceUnreachable {
        agent: usize,
        target: f64,
        achieved: f64,
        iterations: usize,
    },

    #[error("step size {value} outside admissible range (0, {upper})")]
    StepSize { value: f64, upper: f64 },

    #[error("diverged at outer iteration {k}: optimality gap {gap:.3e}")]
    Divergence { k: usize, gap: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI: 1 for configuration problems, 2 for
    /// failures that happen while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Scheme(_) | Error::InvalidSize(_) => 1,
            Error::InvalidArgument(_) => 1,
            Error::InvalidRank { .. } | Error::StepSize { .. } | Error::Shape(_) => 1,
            _ => 2,
        }
    }
}
