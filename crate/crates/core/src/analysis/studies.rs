use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{correlate, correlate_all, CorrelationMethod, CorrelationReport};
use super::AnalysisError;
use crate::error::Result;
use crate::matrix::ResponseMatrix;
use crate::pipeline::{rank_matrix, RankRun};
use crate::propagation::PropagationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub removed_models: Vec<String>,
    pub question_rho: f64,
    pub model_rho: f64,
    /// Questions filtered in this trial beyond those filtered in the full run.
    pub questions_dropped: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub k_removed: usize,
    pub trials: usize,
    pub question_rho_mean: f64,
    pub question_rho_sd: f64,
    pub model_rho_mean: f64,
    pub model_rho_sd: f64,
    pub mean_questions_dropped: f64,
    pub mean_seconds: f64,
    pub per_trial: Vec<TrialOutcome>,
}

/// The `k` model indices removed in trial `trial`, sorted. Each trial draws
/// from its own ChaCha stream, so trials can run in any order.
pub fn removal_subset(n_models: usize, k: usize, seed: u64, trial: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    let mut picked = sample(&mut rng, n_models, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Spearman ρ, extended to constant inputs: two constant vectors order their
/// items identically (1), one constant vector carries no ordering (0).
fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    match correlate(a, b, CorrelationMethod::Spearman) {
        Ok(r) => Ok(r.coefficient),
        Err(AnalysisError::ZeroVariance) => {
            let flat = |v: &[f64]| v.iter().all(|x| *x == v[0]);
            Ok(if flat(a) && flat(b) { 1.0 } else { 0.0 })
        }
        Err(e) => Err(e.into()),
    }
}

/// Spearman ρ between two runs over the questions both retained.
fn question_rho(full: &RankRun, sub: &RankRun) -> Result<f64> {
    let sub_scores = sub.difficulty_by_id();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (id, &v) in full.question_ids.iter().zip(&full.scores.pi_q) {
        if let Some(&w) = sub_scores.get(id.as_str()) {
            a.push(v);
            b.push(w);
        }
    }
    spearman(&a, &b)
}

fn model_rho(full: &RankRun, sub: &RankRun) -> Result<f64> {
    let full_scores = full.competency_by_id();
    let a: Vec<f64> = sub.model_ids.iter().map(|id| full_scores[id.as_str()]).collect();
    spearman(&a, &sub.scores.pi_m)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_removals(
    m: &ResponseMatrix,
    k: usize,
    subsets: impl Iterator<Item = Vec<usize>>,
    cfg: &PropagationConfig,
) -> Result<RobustnessReport> {
    let full = rank_matrix(m, cfg)?;
    let base_filtered = full.filter.filtered_count();
    let mut per_trial = Vec::new();
    for removed in subsets {
        let sub = rank_matrix(&m.without_models(&removed)?, cfg)?;
        per_trial.push(TrialOutcome {
            removed_models: removed.iter().map(|&j| m.model_ids()[j].clone()).collect(),
            question_rho: question_rho(&full, &sub)?,
            model_rho: model_rho(&full, &sub)?,
            questions_dropped: sub.filter.filtered_count() - base_filtered,
            seconds: sub.propagation_seconds,
        });
    }
    let col = |f: fn(&TrialOutcome) -> f64| per_trial.iter().map(f).collect::<Vec<f64>>();
    let (question_rho_mean, question_rho_sd) = mean_sd(&col(|t| t.question_rho));
    let (model_rho_mean, model_rho_sd) = mean_sd(&col(|t| t.model_rho));
    let (mean_questions_dropped, _) = mean_sd(&col(|t| t.questions_dropped as f64));
    let (mean_seconds, _) = mean_sd(&col(|t| t.seconds));
    Ok(RobustnessReport {
        k_removed: k,
        trials: per_trial.len(),
        question_rho_mean,
        question_rho_sd,
        model_rho_mean,
        model_rho_sd,
        mean_questions_dropped,
        mean_seconds,
        per_trial,
    })
}

/// Removes `k` seeded-random models per trial, reruns the ranking, and
/// compares against the full pool. `k = 0` is accepted and reproduces the
/// full run.
pub fn model_removal_study(
    m: &ResponseMatrix,
    k: usize,
    trials: usize,
    cfg: &PropagationConfig,
    seed: u64,
) -> Result<RobustnessReport> {
    let models = m.n_models();
    if k + 2 > models {
        return Err(AnalysisError::InvalidK { k, models }.into());
    }
    if trials == 0 {
        return Err(AnalysisError::InvalidTrials.into());
    }
    run_removals(
        m,
        k,
        (0..trials).map(|t| removal_subset(models, k, seed, t)),
        cfg,
    )
}

/// Removes each model in turn.
pub fn leave_one_out_study(m: &ResponseMatrix, cfg: &PropagationConfig) -> Result<RobustnessReport> {
    let models = m.n_models();
    if models < 3 {
        return Err(AnalysisError::InvalidK { k: 1, models }.into());
    }
    run_removals(m, 1, (0..models).map(|j| vec![j]), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRemoval {
    pub dataset: String,
    pub questions_removed: usize,
    pub model_rho: f64,
}

/// Drops each dataset in turn (in order of first appearance) and reports the
/// Spearman ρ of model competency against the full run.
pub fn dataset_removal_study(
    m: &ResponseMatrix,
    cfg: &PropagationConfig,
) -> Result<Vec<DatasetRemoval>> {
    let mut names: Vec<&str> = Vec::new();
    let mut tag_of = Vec::with_capacity(m.n_questions());
    let mut lookup: HashMap<&str, usize> = HashMap::new();
    for (q, tag) in m.dataset_tags().iter().enumerate() {
        let tag = tag
            .as_deref()
            .ok_or_else(|| AnalysisError::MissingDatasetTag(m.question_ids()[q].clone()))?;
        let d = *lookup.entry(tag).or_insert_with(|| {
            names.push(tag);
            names.len() - 1
        });
        tag_of.push(d);
    }
    if names.len() < 2 {
        return Err(AnalysisError::SingleDataset.into());
    }
    let full = rank_matrix(m, cfg)?;
    names
        .iter()
        .enumerate()
        .map(|(d, name)| {
            let keep: Vec<usize> = (0..m.n_questions()).filter(|&q| tag_of[q] != d).collect();
            let sub = rank_matrix(&m.select_questions(&keep)?, cfg)?;
            Ok(DatasetRemoval {
                dataset: name.to_string(),
                questions_removed: m.n_questions() - keep.len(),
                model_rho: model_rho(&full, &sub)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolCorrelation {
    pub common_questions: usize,
    /// Spearman, Pearson, Kendall τ-b.
    pub correlations: [CorrelationReport; 3],
}

/// Ranks each pool separately and correlates question difficulty over the
/// questions both pools retain.
pub fn pool_difficulty_correlation<S: AsRef<str>>(
    m: &ResponseMatrix,
    pool_a: &[S],
    pool_b: &[S],
    cfg: &PropagationConfig,
) -> Result<PoolCorrelation> {
    if pool_a.is_empty() || pool_b.is_empty() {
        return Err(AnalysisError::EmptyPool.into());
    }
    let run = |pool: &[S]| -> Result<RankRun> {
        let mut idx = m.model_indices(pool)?;
        idx.sort_unstable();
        idx.dedup();
        rank_matrix(&m.select_models(&idx)?, cfg)
    };
    let a = run(pool_a)?;
    let b = run(pool_b)?;
    let b_scores = b.difficulty_by_id();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (id, &v) in a.question_ids.iter().zip(&a.scores.pi_q) {
        if let Some(&w) = b_scores.get(id.as_str()) {
            x.push(v);
            y.push(w);
        }
    }
    if x.len() < 2 {
        return Err(AnalysisError::EmptyCommonQuestionSet.into());
    }
    Ok(PoolCorrelation {
        common_questions: x.len(),
        correlations: correlate_all(&x, &y)?,
    })
}
