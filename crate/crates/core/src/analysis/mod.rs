//! Agreement statistics and robustness studies.

mod stats;
mod studies;

pub use stats::{
    cohen_kappa, consensus_alignment, correlate, correlate_all, icc1, rank_biased_overlap,
    windowed_displacement, Choice, ConsensusReport, CorrelationMethod, CorrelationReport,
    WindowStats, DEFAULT_RBO_PERSISTENCE,
};
pub use studies::{
    dataset_removal_study, leave_one_out_study, model_removal_study, pool_difficulty_correlation,
    removal_subset, DatasetRemoval, PoolCorrelation, RobustnessReport, TrialOutcome,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("need at least {needed} observations, found {found}")]
    TooFew { needed: usize, found: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("an input has zero variance; the coefficient is undefined")]
    ZeroVariance,
    #[error("expected agreement is 1; kappa is undefined")]
    DegenerateAgreement,
    #[error("rankings are not permutations of the same id set")]
    NotSamePermutationDomain,
    #[error("persistence must lie in (0, 1), got {0}")]
    InvalidPersistence(f64),
    #[error("ICC denominator is zero")]
    DegenerateVariance,
    #[error("no pair has a non-skipped judgment")]
    NoValidPairs,
    #[error("at least one rater is required")]
    NoRaters,
    #[error("window size {window} exceeds the {n} ranked items")]
    WindowLargerThanN { window: usize, n: usize },
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("cannot remove {k} of {models} models")]
    InvalidK { k: usize, models: usize },
    #[error("trials must be at least 1")]
    InvalidTrials,
    #[error("dataset removal needs at least two datasets")]
    SingleDataset,
    #[error("question `{0}` has no dataset tag")]
    MissingDatasetTag(String),
    #[error("model pool is empty")]
    EmptyPool,
    #[error("the two pools share fewer than two retained questions")]
    EmptyCommonQuestionSet,
}
