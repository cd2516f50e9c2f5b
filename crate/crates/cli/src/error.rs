use std::fmt;
use std::io;
use std::path::PathBuf;

use diffrank::propagation::PropagationError;
use thiserror::Error;

/// A malformed input file, located by 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub source: String,
    pub line: u64,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.source, self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] diffrank::Error),
    #[error("{0}")]
    Usage(String),
    #[error(
        "{q}x{m} needs an estimated {estimate_bytes} bytes, above the {cap_bytes}-byte memory cap"
    )]
    OutOfMemoryGuard {
        q: usize,
        m: usize,
        estimate_bytes: u64,
        cap_bytes: u64,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for non-convergence, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(diffrank::Error::Propagation(PropagationError::DidNotConverge(_))) => {
                EXIT_NOT_CONVERGED
            }
            _ => EXIT_INPUT_ERROR,
        }
    }
}

impl From<diffrank::matrix::MatrixError> for CliError {
    fn from(e: diffrank::matrix::MatrixError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<diffrank::propagation::PropagationError> for CliError {
    fn from(e: PropagationError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<diffrank::scoring::ScoringError> for CliError {
    fn from(e: diffrank::scoring::ScoringError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<diffrank::baselines::BaselineError> for CliError {
    fn from(e: diffrank::baselines::BaselineError) -> Self {
        CliError::Core(e.into())
    }
}

impl From<diffrank::synth::SynthError> for CliError {
    fn from(e: diffrank::synth::SynthError) -> Self {
        CliError::Core(e.into())
    }
}

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
