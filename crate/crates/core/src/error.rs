use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::baselines::BaselineError;
use crate::matrix::MatrixError;
use crate::propagation::PropagationError;
use crate::scoring::ScoringError;
use crate::synth::SynthError;

/// Any failure raised by a multi-step operation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
