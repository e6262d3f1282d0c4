use thiserror::Error;

use crate::sdp::SdpSolution;

pub type Result<T, E = QmcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QmcError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("unsupported level: {0}")]
    UnsupportedLevel(String),

    #[error("not in basis: {0}")]
    NotInBasis(String),

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error(
        "solver did not converge after {iterations} iterations \
         (primal {primal_residual:.3e}, dual {dual_residual:.3e}, gap {gap:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
        best: Box<SdpSolution>,
    },

    #[error("degree bound violated at vertex {vertex}: {degree} large edges > d = {d}")]
    DegreeBound { vertex: usize, degree: usize, d: usize, edges: Vec<(usize, usize)> },

    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
