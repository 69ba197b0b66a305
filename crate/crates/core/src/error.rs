use thiserror::Error;

use crate::solver::SolveStatus;

pub type Result<T> = std::result::Result<T, QpdError>;

#[derive(Debug, Error)]
pub enum QpdError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("map is not completely positive (min eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),

    #[error("map is not trace preserving (marginal deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("Kraus operators are trace increasing (excess {0:.3e})")]
    TraceIncreasing(f64),

    #[error("channel rank {rank} exceeds bound {bound}")]
    RankExceeded { rank: usize, bound: usize },

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("connectivity violation: {0}")]
    Connectivity(String),

    #[error("target is not in the span of the decomposition set (residual {0:.3e})")]
    NotInSpan(f64),

    #[error("solver finished with status {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("tradeoff curve is not monotone: error rises by {rise:.3e} at budget {budget}")]
    NonMonotone { budget: f64, rise: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
