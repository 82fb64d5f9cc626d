use std::path::PathBuf;

/// Failure of a CLI run; each variant maps to a documented exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {}: file not found", .0.display())]
    MissingFile(PathBuf),
    #[error("malformed measure file {}: {reason}", path.display())]
    Malformed { path: PathBuf, reason: String },
    #[error("solver failure: {0}")]
    Solver(#[from] kinetic_ot_core::Error),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("{failed} of {total} verification checks failed")]
    Verification { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingFile(_) => 2,
            CliError::Malformed { .. } => 3,
            CliError::Solver(_) | CliError::Io(_) => 4,
            CliError::Verification { .. } => 5,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
