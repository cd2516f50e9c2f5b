//! Filter, build transitions, propagate: the end-to-end ranking run.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::{
    build_transitions_as, filter_extremes, FilterReport, ResponseKind, ResponseMatrix,
};
use crate::propagation::{
    propagate, propagate_timed, ConvergenceTrace, PropagationConfig, PropagationError,
    StationaryScores,
};
use crate::scoring::{
    merge_filtered, tier_breakdown, Normalization, RankReport, Tier, TierBreakdown, TierScheme,
};

/// Scores of one propagation run, keyed back to ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRun {
    pub filter: FilterReport,
    pub kind: ResponseKind,
    /// Retained questions, aligned with `scores.pi_q`.
    pub question_ids: Vec<String>,
    pub model_ids: Vec<String>,
    pub scores: StationaryScores,
    pub trace: ConvergenceTrace,
    /// Wall-clock seconds spent in propagation alone.
    pub propagation_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Forces a construction path; `None` picks binary for `{0,1}` matrices.
    pub kind: Option<ResponseKind>,
    pub record_timing: bool,
}

/// Ranks a matrix, returning an error for non-convergence.
pub fn rank_matrix(m: &ResponseMatrix, cfg: &PropagationConfig) -> Result<RankRun> {
    let run = rank_matrix_with(m, cfg, RunOptions::default())?;
    run.require_converged()
}

/// Ranks a matrix. Runs that hit the iteration cap are returned with
/// `trace.converged == false` rather than as an error.
pub fn rank_matrix_with(
    m: &ResponseMatrix,
    cfg: &PropagationConfig,
    opts: RunOptions,
) -> Result<RankRun> {
    cfg.validate()?;
    let (filtered, filter) = filter_extremes(m)?;
    let kind = opts.kind.unwrap_or(if filtered.is_binary() {
        ResponseKind::Binary
    } else {
        ResponseKind::Continuous
    });
    let ts = build_transitions_as(&filtered, kind)?;
    let started = Instant::now();
    let outcome = if opts.record_timing {
        propagate_timed(&ts, cfg)
    } else {
        propagate(&ts, cfg)
    };
    let propagation_seconds = started.elapsed().as_secs_f64();
    let prop = match outcome {
        Ok(p) => p,
        Err(PropagationError::DidNotConverge(p)) => *p,
        Err(e) => return Err(e.into()),
    };
    Ok(RankRun {
        filter,
        kind,
        question_ids: ts.retained_question_ids,
        model_ids: ts.model_ids,
        scores: prop.scores,
        trace: prop.trace,
        propagation_seconds,
    })
}

impl RankRun {
    pub fn require_converged(self) -> Result<Self> {
        if self.trace.converged {
            Ok(self)
        } else {
            let prop = crate::propagation::Propagation {
                scores: self.scores,
                trace: self.trace,
            };
            Err(PropagationError::DidNotConverge(Box::new(prop)).into())
        }
    }

    pub fn model_report(&self, normalization: Normalization) -> Result<RankReport> {
        Ok(RankReport::new(&self.model_ids, &self.scores.pi_m, normalization)?)
    }

    /// Ranked retained questions with tiers, followed by sentinel entries for
    /// the filtered ones.
    pub fn question_report(
        &self,
        normalization: Normalization,
        tiers: &TierScheme,
    ) -> Result<RankReport> {
        let ranked = RankReport::new(&self.question_ids, &self.scores.pi_q, normalization)?;
        let ranked = match normalization {
            Normalization::Raw => ranked,
            _ => ranked.with_tiers(tiers)?,
        };
        Ok(merge_filtered(&ranked, &self.filter)?)
    }

    pub fn difficulty_by_id(&self) -> HashMap<&str, f64> {
        self.question_ids
            .iter()
            .map(String::as_str)
            .zip(self.scores.pi_q.iter().copied())
            .collect()
    }

    pub fn competency_by_id(&self) -> HashMap<&str, f64> {
        self.model_ids
            .iter()
            .map(String::as_str)
            .zip(self.scores.pi_m.iter().copied())
            .collect()
    }

    /// Tier of every question in `question_ids`. Filtered questions take the
    /// easy (solved) or hard (failed) tier.
    pub fn tiers_for(
        &self,
        question_ids: &[String],
        normalization: Normalization,
        scheme: &TierScheme,
    ) -> Result<Vec<Tier>> {
        let report = self.question_report(normalization, scheme)?;
        let by_id: HashMap<&str, Tier> = report
            .entries
            .iter()
            .filter_map(|e| e.tier.map(|t| (e.id.as_str(), t)))
            .collect();
        Ok(question_ids
            .iter()
            .map(|id| by_id.get(id.as_str()).copied().unwrap_or(Tier::Easy))
            .collect())
    }
}

/// Tier breakdown of one model's correct answers, with tiers computed from a
/// run that excludes that model.
pub fn leave_one_out_breakdown(
    m: &ResponseMatrix,
    model_id: &str,
    cfg: &PropagationConfig,
    scheme: &TierScheme,
) -> Result<TierBreakdown> {
    let j = m.model_indices(&[model_id])?[0];
    let others = m.without_models(&[j])?;
    let run = rank_matrix(&others, cfg)?;
    let labels = run.tiers_for(m.question_ids(), Normalization::Max100, scheme)?;
    Ok(tier_breakdown(m, model_id, &labels)?)
}
