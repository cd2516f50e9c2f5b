//! Turning stationary scores into ranked, 0–100 reports.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{FilterReport, ResponseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("cannot normalize an empty score vector")]
    Empty,
    #[error("scores are not finite")]
    NonFinite,
    #[error("all scores are equal; the {0} range is degenerate")]
    DegenerateRange(Normalization),
    #[error("score {0} lies outside [0, 100]")]
    UnnormalizedInput(f64),
    #[error("tier boundaries must satisfy 0 < easy < medium < 100, got {0} and {1}")]
    InvalidTiers(f64, f64),
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
    #[error("model `{0}` answered no question correctly")]
    NoCorrectAnswers(String),
    #[error("expected {expected} entries, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("id `{0}` appears in both the report and the filter report")]
    IdCollision(String),
    #[error("unknown normalization `{0}` (expected max100, minmax100 or raw)")]
    UnknownNormalization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Divide by the maximum and scale so the top score is 100.
    Max100,
    /// Affine map of `[min, max]` onto `[0, 100]`.
    MinMax100,
    Raw,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Max100 => "max100",
            Normalization::MinMax100 => "minmax100",
            Normalization::Raw => "raw",
        })
    }
}

impl FromStr for Normalization {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max100" => Ok(Normalization::Max100),
            "minmax100" => Ok(Normalization::MinMax100),
            "raw" => Ok(Normalization::Raw),
            other => Err(ScoringError::UnknownNormalization(other.to_string())),
        }
    }
}

pub fn normalize_scores(scores: &[f64], mode: Normalization) -> Result<Vec<f64>, ScoringError> {
    if scores.is_empty() {
        return Err(ScoringError::Empty);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(ScoringError::NonFinite);
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    match mode {
        Normalization::Raw => Ok(scores.to_vec()),
        Normalization::Max100 => {
            if max <= 0.0 {
                return Err(ScoringError::DegenerateRange(mode));
            }
            // Dividing first keeps the maximum at exactly 100.
            Ok(scores.iter().map(|s| s / max * 100.0).collect())
        }
        Normalization::MinMax100 => {
            let span = max - min;
            if span <= 0.0 {
                return Err(ScoringError::DegenerateRange(mode));
            }
            Ok(scores.iter().map(|s| (s - min) / span * 100.0).collect())
        }
    }
}

/// Competition ranks ("1224"), aligned with the input order. Higher scores
/// rank first; exactly equal scores share the smaller rank.
pub fn rank_entries(scores: &[f64]) -> Vec<usize> {
    let order = descending_order(scores);
    let mut ranks = vec![0; scores.len()];
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = if pos > 0 && scores[order[pos - 1]] == scores[i] {
            ranks[order[pos - 1]]
        } else {
            pos + 1
        };
    }
    ranks
}

/// Indices sorted by descending score; ties keep input order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        })
    }
}

/// One band of the normalized difficulty scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyTier {
    pub label: Tier,
    pub lower: f64,
    /// Exclusive, except for the top tier where it is 100 inclusive.
    pub upper: f64,
}

/// Partition of `[0, 100]` into easy, medium and hard bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierScheme {
    easy_upper: f64,
    medium_upper: f64,
}

impl Default for TierScheme {
    fn default() -> Self {
        Self {
            easy_upper: 33.0,
            medium_upper: 67.0,
        }
    }
}

impl TierScheme {
    pub fn new(easy_upper: f64, medium_upper: f64) -> Result<Self, ScoringError> {
        if !(0.0 < easy_upper && easy_upper < medium_upper && medium_upper < 100.0) {
            return Err(ScoringError::InvalidTiers(easy_upper, medium_upper));
        }
        Ok(Self {
            easy_upper,
            medium_upper,
        })
    }

    pub fn boundaries(&self) -> (f64, f64) {
        (self.easy_upper, self.medium_upper)
    }

    pub fn tiers(&self) -> [DifficultyTier; 3] {
        [
            DifficultyTier {
                label: Tier::Easy,
                lower: 0.0,
                upper: self.easy_upper,
            },
            DifficultyTier {
                label: Tier::Medium,
                lower: self.easy_upper,
                upper: self.medium_upper,
            },
            DifficultyTier {
                label: Tier::Hard,
                lower: self.medium_upper,
                upper: 100.0,
            },
        ]
    }

    pub fn classify(&self, score: f64) -> Result<Tier, ScoringError> {
        if !(0.0..=100.0).contains(&score) {
            return Err(ScoringError::UnnormalizedInput(score));
        }
        Ok(if score < self.easy_upper {
            Tier::Easy
        } else if score < self.medium_upper {
            Tier::Medium
        } else {
            Tier::Hard
        })
    }
}

pub fn assign_tiers(normalized: &[f64], scheme: &TierScheme) -> Result<Vec<Tier>, ScoringError> {
    normalized.iter().map(|&s| scheme.classify(s)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Ranked,
    UniversallySolved,
    UniversallyFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub id: String,
    pub kind: EntryKind,
    /// Stationary probability; absent for sentinel entries.
    pub raw_score: Option<f64>,
    pub normalized_score: f64,
    pub rank: Option<usize>,
    /// Dense index of the group of exactly tied scores, starting at 1.
    pub tie_group: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<Tier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub entries: Vec<RankEntry>,
    pub normalization: Normalization,
    pub sentinel_solved: f64,
    pub sentinel_failed: f64,
}

pub const DEFAULT_SENTINEL_SOLVED: f64 = -1.0;
pub const DEFAULT_SENTINEL_FAILED: f64 = 101.0;

impl RankReport {
    /// Ranks `scores` in descending order.
    pub fn new<S: AsRef<str>>(
        ids: &[S],
        scores: &[f64],
        normalization: Normalization,
    ) -> Result<Self, ScoringError> {
        if ids.len() != scores.len() {
            return Err(ScoringError::LengthMismatch {
                expected: ids.len(),
                found: scores.len(),
            });
        }
        let normalized = normalize_scores(scores, normalization)?;
        let ranks = rank_entries(scores);
        let mut entries = Vec::with_capacity(ids.len());
        let mut group = 0;
        let mut previous: Option<f64> = None;
        for i in descending_order(scores) {
            if previous != Some(scores[i]) {
                group += 1;
                previous = Some(scores[i]);
            }
            entries.push(RankEntry {
                id: ids[i].as_ref().to_string(),
                kind: EntryKind::Ranked,
                raw_score: Some(scores[i]),
                normalized_score: normalized[i],
                rank: Some(ranks[i]),
                tie_group: Some(group),
                tier: None,
            });
        }
        Ok(Self {
            entries,
            normalization,
            sentinel_solved: DEFAULT_SENTINEL_SOLVED,
            sentinel_failed: DEFAULT_SENTINEL_FAILED,
        })
    }

    pub fn with_sentinels(mut self, solved: f64, failed: f64) -> Self {
        self.sentinel_solved = solved;
        self.sentinel_failed = failed;
        self
    }

    /// Labels every ranked entry with its tier on the normalized scale.
    pub fn with_tiers(mut self, scheme: &TierScheme) -> Result<Self, ScoringError> {
        for e in &mut self.entries {
            e.tier = Some(match e.kind {
                EntryKind::Ranked => scheme.classify(e.normalized_score)?,
                EntryKind::UniversallySolved => Tier::Easy,
                EntryKind::UniversallyFailed => Tier::Hard,
            });
        }
        Ok(self)
    }

    pub fn entry(&self, id: &str) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entries that took part in ranking, in rank order.
    pub fn ranked(&self) -> impl Iterator<Item = &RankEntry> {
        self.entries.iter().filter(|e| e.kind == EntryKind::Ranked)
    }
}

/// Appends sentinel entries for questions removed before propagation.
///
/// Universally solved questions sit below the scale at `sentinel_solved`
/// and universally failed ones above it at `sentinel_failed`. Sentinels
/// carry no rank.
pub fn merge_filtered(report: &RankReport, filter: &FilterReport) -> Result<RankReport, ScoringError> {
    let present: HashSet<&str> = report.entries.iter().map(|e| e.id.as_str()).collect();
    let mut merged = report.clone();
    let tiers_on = report.entries.iter().any(|e| e.tier.is_some());
    let sentinels = filter
        .universally_solved
        .iter()
        .map(|id| (id, EntryKind::UniversallySolved, report.sentinel_solved, Tier::Easy))
        .chain(
            filter
                .universally_failed
                .iter()
                .map(|id| (id, EntryKind::UniversallyFailed, report.sentinel_failed, Tier::Hard)),
        );
    for (id, kind, value, tier) in sentinels {
        if present.contains(id.as_str()) {
            return Err(ScoringError::IdCollision(id.clone()));
        }
        merged.entries.push(RankEntry {
            id: id.clone(),
            kind,
            raw_score: None,
            normalized_score: value,
            rank: None,
            tie_group: None,
            tier: tiers_on.then_some(tier),
        });
    }
    Ok(merged)
}

/// Share of a model's correct answers falling in each tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierBreakdown {
    pub easy: f64,
    pub medium: f64,
    pub hard: f64,
}

impl TierBreakdown {
    pub fn share(&self, tier: Tier) -> f64 {
        match tier {
            Tier::Easy => self.easy,
            Tier::Medium => self.medium,
            Tier::Hard => self.hard,
        }
    }
}

/// Splits a model's correct answers by the tier of each question.
///
/// `labels` is aligned with the matrix rows. Graded responses contribute
/// their credit, so binary matrices reduce to counting.
pub fn tier_breakdown(
    m: &ResponseMatrix,
    model_id: &str,
    labels: &[Tier],
) -> Result<TierBreakdown, ScoringError> {
    let j = m
        .model_index(model_id)
        .ok_or_else(|| ScoringError::UnknownModel(model_id.to_string()))?;
    if labels.len() != m.n_questions() {
        return Err(ScoringError::LengthMismatch {
            expected: m.n_questions(),
            found: labels.len(),
        });
    }
    let mut mass = [0.0f64; 3];
    for (q, &tier) in labels.iter().enumerate() {
        mass[tier as usize] += m.value(q, j);
    }
    let total: f64 = mass.iter().sum();
    if total == 0.0 {
        return Err(ScoringError::NoCorrectAnswers(model_id.to_string()));
    }
    Ok(TierBreakdown {
        easy: mass[0] / total,
        medium: mass[1] / total,
        hard: mass[2] / total,
    })
}
