//! Comparison scorers: raw accuracy, Simple Rank, dataset-difficulty-weighted
//! accuracy, and 1PL/2PL item response theory fits.

mod irt;

pub use irt::{fit_irt, irt_ability_scores, IrtConfig, IrtFit, IrtModel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::ResponseMatrix;
use crate::scoring::rank_entries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("this baseline requires a binary response matrix")]
    NonBinaryInput,
    #[error("question `{0}` has no dataset tag")]
    MissingTags(String),
    #[error("every dataset was solved perfectly by every model; weights sum to zero")]
    ZeroTotalWeight,
    #[error("expected {expected} tags, found {found}")]
    TagCountMismatch { expected: usize, found: usize },
    #[error("IRT fitting needs at least 2 models and 2 questions")]
    TooSmall,
    #[error("invalid IRT configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("objective became non-finite during optimization")]
    OptimizerDiverged,
    #[error("all abilities are equal; min-max scaling is undefined")]
    DegenerateRange,
}

/// Column means: each model's share of available credit.
pub fn accuracy_scores(m: &ResponseMatrix) -> Vec<f64> {
    let n = m.n_questions() as f64;
    (0..m.n_models()).map(|j| m.column_sum(j) / n).collect()
}

/// Question difficulty as the number of models answering incorrectly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleRank {
    /// `M - S(q)` per question.
    pub error_counts: Vec<f64>,
    /// Competition ranks, hardest first.
    pub ranks: Vec<usize>,
}

pub fn simple_rank(m: &ResponseMatrix) -> Result<SimpleRank, BaselineError> {
    if !m.is_binary() {
        return Err(BaselineError::NonBinaryInput);
    }
    let total = m.n_models() as f64;
    let error_counts: Vec<f64> = (0..m.n_questions()).map(|q| total - m.row_sum(q)).collect();
    let ranks = rank_entries(&error_counts);
    Ok(SimpleRank {
        error_counts,
        ranks,
    })
}

/// Model scores implied by Simple Rank's counting view: the number of
/// questions each model solved, with no weighting by difficulty.
pub fn simple_rank_model_scores(m: &ResponseMatrix) -> Result<Vec<f64>, BaselineError> {
    if !m.is_binary() {
        return Err(BaselineError::NonBinaryInput);
    }
    Ok((0..m.n_models()).map(|j| m.column_sum(j)).collect())
}

/// Weighted accuracy using the matrix's own dataset tags.
pub fn weighted_scores(m: &ResponseMatrix) -> Result<Vec<f64>, BaselineError> {
    let tags = m
        .dataset_tags()
        .iter()
        .enumerate()
        .map(|(q, t)| {
            t.clone()
                .ok_or_else(|| BaselineError::MissingTags(m.question_ids()[q].clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    weighted_scores_with(m, &tags)
}

/// Per model, `Σ_d w_d·acc(model, d) / Σ_d w_d` with `w_d = 1 − ā_d`, where
/// `ā_d` is the mean accuracy of all models on dataset `d`.
pub fn weighted_scores_with<S: AsRef<str>>(
    m: &ResponseMatrix,
    tags: &[S],
) -> Result<Vec<f64>, BaselineError> {
    if tags.len() != m.n_questions() {
        return Err(BaselineError::TagCountMismatch {
            expected: m.n_questions(),
            found: tags.len(),
        });
    }
    let mut names: Vec<&str> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (q, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        match names.iter().position(|n| *n == tag) {
            Some(d) => members[d].push(q),
            None => {
                names.push(tag);
                members.push(vec![q]);
            }
        }
    }
    let nm = m.n_models();
    // acc[d][j]
    let acc: Vec<Vec<f64>> = members
        .iter()
        .map(|qs| {
            (0..nm)
                .map(|j| qs.iter().map(|&q| m.value(q, j)).sum::<f64>() / qs.len() as f64)
                .collect()
        })
        .collect();
    let weights: Vec<f64> = acc
        .iter()
        .map(|row| 1.0 - row.iter().sum::<f64>() / nm as f64)
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(BaselineError::ZeroTotalWeight);
    }
    Ok((0..nm)
        .map(|j| {
            acc.iter()
                .zip(&weights)
                .map(|(row, w)| w * row[j])
                .sum::<f64>()
                / total
        })
        .collect())
}
