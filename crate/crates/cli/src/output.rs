//! Report documents and their JSON and CSV renderings.

use std::fs;
use std::io::Write;
use std::path::Path;

use diffrank::scoring::{EntryKind, RankEntry};
use diffrank::{Normalization, RankRun, Tier};
use serde::Serialize;

use crate::args::OutputFormat;
use crate::error::CliError;
use crate::input::csv_write_error;

/// Bumped whenever a field is added, removed or renamed.
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub normalization: Normalization,
    pub seed: u64,
    pub tiers: [f64; 2],
    pub continuous: bool,
}

/// One ranked or sentinel entry. Every field is always present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreEntry {
    pub id: String,
    pub kind: EntryKind,
    pub rank: Option<usize>,
    pub tie_group: Option<usize>,
    pub raw_score: Option<f64>,
    pub score: f64,
    pub tier: Option<Tier>,
}

impl From<&RankEntry> for ScoreEntry {
    fn from(e: &RankEntry) -> Self {
        Self {
            id: e.id.clone(),
            kind: e.kind,
            rank: e.rank,
            tie_group: e.tie_group,
            raw_score: e.raw_score,
            score: e.normalized_score,
            tier: e.tier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterSummary {
    pub input_questions: usize,
    pub retained_questions: usize,
    pub universally_solved: Vec<String>,
    pub universally_failed: Vec<String>,
    pub dangling_models: Vec<String>,
    pub extreme_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub converged: bool,
    pub iterations: usize,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub per_iteration_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: u32,
    pub config: ConfigEcho,
    pub response_kind: diffrank::ResponseKind,
    pub model_scores: Vec<ScoreEntry>,
    pub question_scores: Vec<ScoreEntry>,
    pub filter: FilterSummary,
    pub convergence: ConvergenceSummary,
    /// Null unless timings were requested, so reruns stay byte-identical.
    pub timing: Option<Timing>,
}

impl RunReport {
    pub fn converged(&self) -> bool {
        self.convergence.converged
    }
}

pub fn filter_summary(run: &RankRun) -> FilterSummary {
    let f = &run.filter;
    FilterSummary {
        input_questions: f.original_question_count(),
        retained_questions: f.retained_question_count,
        universally_solved: f.universally_solved.clone(),
        universally_failed: f.universally_failed.clone(),
        dangling_models: f.dangling_models.clone(),
        extreme_fraction: f.extreme_fraction,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn kind_name(kind: EntryKind) -> &'static str {
    match kind {
        EntryKind::Ranked => "ranked",
        EntryKind::UniversallySolved => "universally_solved",
        EntryKind::UniversallyFailed => "universally_failed",
    }
}

fn tier_name(tier: Tier) -> &'static str {
    match tier {
        Tier::Easy => "easy",
        Tier::Medium => "medium",
        Tier::Hard => "hard",
    }
}

/// Rows of a flat table; several tables in one stream are separated by a
/// blank line.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn tables_to_csv(tables: &[Table]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            buf.push(b'\n');
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(&t.header).map_err(csv_write_error)?;
        for row in &t.rows {
            w.write_record(row).map_err(csv_write_error)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn entry_table(first: &'static str, entries: &[ScoreEntry], with_tier: bool) -> Table {
    let mut header = vec![first, "kind", "rank", "tie_group", "raw_score", "score"];
    if with_tier {
        header.push("tier");
    }
    let header = header.into_iter().map(String::from).collect();
    let rows = entries
        .iter()
        .map(|e| {
            let mut row = vec![
                e.id.clone(),
                kind_name(e.kind).to_string(),
                opt(e.rank),
                opt(e.tie_group),
                opt(e.raw_score),
                e.score.to_string(),
            ];
            if with_tier {
                row.push(e.tier.map(tier_name).unwrap_or_default().to_string());
            }
            row
        })
        .collect();
    Table { header, rows }
}

impl RunReport {
    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>, CliError> {
        match format {
            OutputFormat::Json => Ok(to_json(self)),
            OutputFormat::Csv => tables_to_csv(&[
                entry_table("model_id", &self.model_scores, false),
                entry_table("question_id", &self.question_scores, true),
            ]),
        }
    }
}

/// Writes `bytes` to `out` when given, otherwise to `stdout`.
pub fn emit(bytes: &[u8], out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
