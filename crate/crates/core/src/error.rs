use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix")]
    EigenNoConvergence { dim: usize },

    #[error("power iteration did not converge within {iterations} iterations")]
    PowerIterationNoConvergence { iterations: usize },

    #[error("{what} has size {size}, above the configured cap of {cap}")]
    TooLarge {
        what: &'static str,
        size: u128,
        cap: u128,
    },

    #[error("invalid phase-type distribution: {0}")]
    InvalidPhaseType(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("phase-type fit diverged at iteration {iteration}: log-likelihood fell from {previous} to {current}")]
    FitDiverged {
        iteration: usize,
        previous: f64,
        current: f64,
        last: Box<crate::phase_type::PhaseType>,
    },

    #[error("line {line}: {message}")]
    EdgeList { line: usize, message: String },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("too few grid points inside the prevalence band: found {found}, need {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("reference simulator audit violation at jump {jump} (t = {time}): {message}")]
    AuditViolation {
        jump: u64,
        time: f64,
        message: String,
    },

    #[error("rate bookkeeping drift: incremental total {incremental}, recomputed {recomputed}")]
    RateDrift { incremental: f64, recomputed: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors that stem from numerics or size caps rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNoConvergence { .. }
                | Error::PowerIterationNoConvergence { .. }
                | Error::TooLarge { .. }
                | Error::FitDiverged { .. }
                | Error::InsufficientData { .. }
                | Error::RateDrift { .. }
                | Error::NonFinite
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
