//! Difficulty-aware ranking of models and questions.
//!
//! Given a question × model matrix of graded responses, `diffrank` estimates
//! question difficulty and model competency jointly as the stationary
//! distribution of a damped random walk on the bipartite solve/fail graph.
//! Models earn credit for solving questions few others solve; questions
//! become hard when competent models fail them.
//!
//! ```
//! use diffrank::matrix::{build_matrix, ResponseRecord};
//! use diffrank::pipeline::rank_matrix;
//! use diffrank::PropagationConfig;
//!
//! let records = vec![
//!     ResponseRecord::new("q1", "a", 1.0),
//!     ResponseRecord::new("q1", "b", 0.0),
//!     ResponseRecord::new("q2", "a", 1.0),
//!     ResponseRecord::new("q2", "b", 0.0),
//!     ResponseRecord::new("q3", "a", 0.0),
//!     ResponseRecord::new("q3", "b", 1.0),
//! ];
//! let m = build_matrix(&records).unwrap();
//! let run = rank_matrix(&m, &PropagationConfig::default()).unwrap();
//! assert!(run.scores.pi_m[0] > run.scores.pi_m[1]);
//! ```

pub mod analysis;
pub mod baselines;
mod error;
pub mod matrix;
pub mod pipeline;
pub mod propagation;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{
    build_matrix, build_transitions, filter_extremes, FilterReport, ResponseKind, ResponseMatrix,
    ResponseRecord, TransitionSystem,
};
pub use pipeline::{rank_matrix, rank_matrix_with, RankRun, RunOptions};
pub use propagation::{
    propagate, ConvergenceTrace, PropagationConfig, StationaryScores,
};
pub use scoring::{Normalization, RankReport, Tier, TierScheme};
