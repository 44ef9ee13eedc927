use thiserror::Error;

/// Errors raised while building or solving a plate problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("cell {cell} is inverted or degenerate (jacobian determinant {det:e})")]
    DegenerateCell { cell: usize, det: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("metric is not symmetric positive definite at ({x:.6}, {y:.6})")]
    MetricNotSpd { x: f64, y: f64 },

    #[error("constraints are rank deficient on cell {cell}")]
    RankDeficientConstraint { cell: usize },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
