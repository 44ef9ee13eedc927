//! Configuration, scenario catalog, drivers and export for the `platebend` command.

pub mod catalog;
pub mod config;
pub mod driver;
pub mod export;
pub mod expr;
pub mod meshes;
pub mod setup;
pub mod study;

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> AppError {
        AppError::Io { path: path.display().to_string(), source }
    }

    /// Process exit code: 2 for configuration, 3 for solver and 1 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Solver(_) => 3,
            AppError::Io { .. } => 1,
        }
    }

    pub fn at_step(self, m: usize) -> AppError {
        match self {
            AppError::Config(s) => AppError::Config(format!("step {m}: {s}")),
            AppError::Solver(s) => AppError::Solver(format!("step {m}: {s}")),
            e => e,
        }
    }
}

impl From<platebend::Error> for AppError {
    fn from(e: platebend::Error) -> AppError {
        use platebend::Error as E;
        match e {
            E::Solver(_) | E::RankDeficientConstraint { .. } => AppError::Solver(e.to_string()),
            E::Io(source) => AppError::Io { path: String::new(), source },
            _ => AppError::Config(e.to_string()),
        }
    }
}
