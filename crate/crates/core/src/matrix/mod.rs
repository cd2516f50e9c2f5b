//! Response matrices, extreme-question filtering and the bipartite transition
//! system built from them.
//!
//! A [`ResponseMatrix`] holds one graded outcome in `[0, 1]` per
//! (question, model) pair. Fully binary matrices are stored bit-packed so
//! that matrices with hundreds of millions of cells stay small in memory.

mod sparse;
mod transition;

pub use sparse::{CsrMatrix, RowWeights};
pub use transition::{build_transitions, build_transitions_as, ResponseKind, TransitionSystem};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("duplicate response for question `{question}` and model `{model}`")]
    DuplicatePair { question: String, model: String },
    #[error("missing response for question `{question}` and model `{model}`")]
    IncompleteMatrix { question: String, model: String },
    #[error("response {value} for question `{question}` and model `{model}` is not a finite value in [0, 1]")]
    ValueOutOfRange {
        question: String,
        model: String,
        value: f64,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("question `{question}` has conflicting dataset tags `{first}` and `{second}`")]
    ConflictingDatasetTag {
        question: String,
        first: String,
        second: String,
    },
    #[error("expected {expected} values, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("response matrix has no questions or no models")]
    Empty,
    #[error("every question was universally solved or universally failed")]
    AllQuestionsFiltered,
    #[error("question `{question}` has no solvers; filter extremes before building transitions")]
    UnfilteredInput { question: String },
    #[error("binary transitions requested for a matrix with non-binary values")]
    NonBinary,
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
}

/// One graded response, as read from an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub question_id: String,
    pub model_id: String,
    pub value: f64,
    pub dataset: Option<String>,
}

impl ResponseRecord {
    pub fn new(question_id: impl Into<String>, model_id: impl Into<String>, value: f64) -> Self {
        Self {
            question_id: question_id.into(),
            model_id: model_id.into(),
            value,
            dataset: None,
        }
    }

    pub fn with_dataset(mut self, dataset: impl Into<String>) -> Self {
        self.dataset = Some(dataset.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Cells {
    /// Row-major bit rows, `words_per_row` u64 words each.
    Binary { words_per_row: usize, bits: Vec<u64> },
    /// Row-major values.
    Graded(Vec<f64>),
}

/// A complete question × model matrix of graded responses in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    question_ids: Vec<String>,
    model_ids: Vec<String>,
    dataset_tags: Vec<Option<String>>,
    cells: Cells,
}

fn check_unique(ids: &[String], kind: &'static str) -> Result<(), MatrixError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(MatrixError::DuplicateId {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

fn words_for(models: usize) -> usize {
    models.div_ceil(64)
}

impl ResponseMatrix {
    /// Builds a matrix from row-major `values`.
    ///
    /// The matrix is stored bit-packed when every value is exactly 0 or 1.
    pub fn new(
        question_ids: Vec<String>,
        model_ids: Vec<String>,
        dataset_tags: Vec<Option<String>>,
        values: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        Self::check_axes(&question_ids, &model_ids, &dataset_tags)?;
        let (q, m) = (question_ids.len(), model_ids.len());
        if values.len() != q * m {
            return Err(MatrixError::DimensionMismatch {
                expected: q * m,
                found: values.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(MatrixError::ValueOutOfRange {
                    question: question_ids[i / m].clone(),
                    model: model_ids[i % m].clone(),
                    value: v,
                });
            }
        }
        let cells = if values.iter().all(|&v| v == 0.0 || v == 1.0) {
            let words_per_row = words_for(m);
            let mut bits = vec![0u64; q * words_per_row];
            for (i, &v) in values.iter().enumerate() {
                if v == 1.0 {
                    let (row, col) = (i / m, i % m);
                    bits[row * words_per_row + col / 64] |= 1 << (col % 64);
                }
            }
            Cells::Binary {
                words_per_row,
                bits,
            }
        } else {
            Cells::Graded(values)
        };
        Ok(Self {
            question_ids,
            model_ids,
            dataset_tags,
            cells,
        })
    }

    /// Builds a binary matrix by calling `correct(question, model)` for every
    /// cell in row-major order.
    pub fn from_binary_fn(
        question_ids: Vec<String>,
        model_ids: Vec<String>,
        dataset_tags: Vec<Option<String>>,
        mut correct: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, MatrixError> {
        Self::check_axes(&question_ids, &model_ids, &dataset_tags)?;
        let (q, m) = (question_ids.len(), model_ids.len());
        let words_per_row = words_for(m);
        let mut bits = vec![0u64; q * words_per_row];
        for row in 0..q {
            let words = &mut bits[row * words_per_row..(row + 1) * words_per_row];
            for col in 0..m {
                if correct(row, col) {
                    words[col / 64] |= 1 << (col % 64);
                }
            }
        }
        Ok(Self {
            question_ids,
            model_ids,
            dataset_tags,
            cells: Cells::Binary {
                words_per_row,
                bits,
            },
        })
    }

    fn check_axes(
        question_ids: &[String],
        model_ids: &[String],
        dataset_tags: &[Option<String>],
    ) -> Result<(), MatrixError> {
        if question_ids.is_empty() || model_ids.is_empty() {
            return Err(MatrixError::Empty);
        }
        check_unique(question_ids, "question")?;
        check_unique(model_ids, "model")?;
        if dataset_tags.len() != question_ids.len() {
            return Err(MatrixError::DimensionMismatch {
                expected: question_ids.len(),
                found: dataset_tags.len(),
            });
        }
        Ok(())
    }

    pub fn n_questions(&self) -> usize {
        self.question_ids.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn question_ids(&self) -> &[String] {
        &self.question_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn dataset_tags(&self) -> &[Option<String>] {
        &self.dataset_tags
    }

    /// True iff every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        match &self.cells {
            Cells::Binary { .. } => true,
            Cells::Graded(values) => values.iter().all(|&v| v == 0.0 || v == 1.0),
        }
    }

    pub fn question_index(&self, id: &str) -> Option<usize> {
        self.question_ids.iter().position(|q| q == id)
    }

    pub fn model_index(&self, id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == id)
    }

    pub fn value(&self, question: usize, model: usize) -> f64 {
        match &self.cells {
            Cells::Binary {
                words_per_row,
                bits,
            } => {
                let word = bits[question * words_per_row + model / 64];
                ((word >> (model % 64)) & 1) as f64
            }
            Cells::Graded(values) => values[question * self.n_models() + model],
        }
    }

    /// Values of one question row, in model order.
    pub fn row(&self, question: usize) -> Vec<f64> {
        (0..self.n_models()).map(|m| self.value(question, m)).collect()
    }

    /// Row-major copy of every value.
    pub fn to_values(&self) -> Vec<f64> {
        (0..self.n_questions()).flat_map(|q| self.row(q)).collect()
    }

    /// Bit words of one row when the matrix is stored packed.
    pub(crate) fn bit_row(&self, question: usize) -> Option<&[u64]> {
        match &self.cells {
            Cells::Binary {
                words_per_row,
                bits,
            } => Some(&bits[question * words_per_row..(question + 1) * words_per_row]),
            Cells::Graded(_) => None,
        }
    }

    /// `S(q)`: total credit earned on a question.
    pub fn row_sum(&self, question: usize) -> f64 {
        match self.bit_row(question) {
            Some(words) => words.iter().map(|w| w.count_ones()).sum::<u32>() as f64,
            None => (0..self.n_models()).map(|m| self.value(question, m)).sum(),
        }
    }

    /// Total credit earned by a model across all questions.
    pub fn column_sum(&self, model: usize) -> f64 {
        (0..self.n_questions()).map(|q| self.value(q, model)).sum()
    }

    /// Keeps the listed question rows, in the given order.
    pub fn select_questions(&self, rows: &[usize]) -> Result<Self, MatrixError> {
        let question_ids: Vec<String> = rows.iter().map(|&r| self.question_ids[r].clone()).collect();
        let dataset_tags: Vec<Option<String>> =
            rows.iter().map(|&r| self.dataset_tags[r].clone()).collect();
        match &self.cells {
            Cells::Binary {
                words_per_row,
                bits,
            } => {
                Self::check_axes(&question_ids, &self.model_ids, &dataset_tags)?;
                let mut kept = Vec::with_capacity(rows.len() * words_per_row);
                for &r in rows {
                    kept.extend_from_slice(&bits[r * words_per_row..(r + 1) * words_per_row]);
                }
                Ok(Self {
                    question_ids,
                    model_ids: self.model_ids.clone(),
                    dataset_tags,
                    cells: Cells::Binary {
                        words_per_row: *words_per_row,
                        bits: kept,
                    },
                })
            }
            Cells::Graded(_) => {
                let values = rows.iter().flat_map(|&r| self.row(r)).collect();
                Self::new(question_ids, self.model_ids.clone(), dataset_tags, values)
            }
        }
    }

    /// Flags the models that earned full credit on every question.
    pub fn perfect_columns(&self) -> Vec<bool> {
        match &self.cells {
            Cells::Binary {
                words_per_row,
                bits,
            } => {
                let mut acc = vec![u64::MAX; *words_per_row];
                for row in bits.chunks_exact(*words_per_row) {
                    for (a, w) in acc.iter_mut().zip(row) {
                        *a &= w;
                    }
                }
                (0..self.n_models())
                    .map(|j| (acc[j / 64] >> (j % 64)) & 1 == 1)
                    .collect()
            }
            Cells::Graded(values) => {
                let m = self.n_models();
                (0..m)
                    .map(|j| values.iter().skip(j).step_by(m).all(|&v| v == 1.0))
                    .collect()
            }
        }
    }

    /// Keeps the listed model columns, in the given order.
    pub fn select_models(&self, cols: &[usize]) -> Result<Self, MatrixError> {
        let model_ids: Vec<String> = cols.iter().map(|&c| self.model_ids[c].clone()).collect();
        if self.is_binary() {
            Self::from_binary_fn(
                self.question_ids.clone(),
                model_ids,
                self.dataset_tags.clone(),
                |q, k| self.value(q, cols[k]) == 1.0,
            )
        } else {
            let values = (0..self.n_questions())
                .flat_map(|q| cols.iter().map(move |&c| self.value(q, c)))
                .collect();
            Self::new(
                self.question_ids.clone(),
                model_ids,
                self.dataset_tags.clone(),
                values,
            )
        }
    }

    /// Drops the listed model columns.
    pub fn without_models(&self, removed: &[usize]) -> Result<Self, MatrixError> {
        let removed: HashSet<usize> = removed.iter().copied().collect();
        let kept: Vec<usize> = (0..self.n_models()).filter(|c| !removed.contains(c)).collect();
        self.select_models(&kept)
    }

    /// Resolves model ids to column indices.
    pub fn model_indices<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>, MatrixError> {
        let lookup: HashMap<&str, usize> = self
            .model_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        ids.iter()
            .map(|id| {
                lookup
                    .get(id.as_ref())
                    .copied()
                    .ok_or_else(|| MatrixError::UnknownModel(id.as_ref().to_string()))
            })
            .collect()
    }
}

/// Assembles a dense matrix from one record per (question, model) pair.
///
/// Questions and models are ordered by first appearance.
pub fn build_matrix(records: &[ResponseRecord]) -> Result<ResponseMatrix, MatrixError> {
    let mut question_ids: Vec<String> = Vec::new();
    let mut model_ids: Vec<String> = Vec::new();
    let mut question_pos: HashMap<&str, usize> = HashMap::new();
    let mut model_pos: HashMap<&str, usize> = HashMap::new();
    let mut tags: Vec<Option<String>> = Vec::new();

    for rec in records {
        let q = *question_pos.entry(&rec.question_id).or_insert_with(|| {
            question_ids.push(rec.question_id.clone());
            tags.push(None);
            question_ids.len() - 1
        });
        model_pos.entry(&rec.model_id).or_insert_with(|| {
            model_ids.push(rec.model_id.clone());
            model_ids.len() - 1
        });
        if let Some(tag) = &rec.dataset {
            match &tags[q] {
                None => tags[q] = Some(tag.clone()),
                Some(existing) if existing != tag => {
                    return Err(MatrixError::ConflictingDatasetTag {
                        question: rec.question_id.clone(),
                        first: existing.clone(),
                        second: tag.clone(),
                    })
                }
                Some(_) => {}
            }
        }
    }

    let (nq, nm) = (question_ids.len(), model_ids.len());
    if nq == 0 || nm == 0 {
        return Err(MatrixError::Empty);
    }
    let mut values = vec![f64::NAN; nq * nm];
    for rec in records {
        let (q, m) = (question_pos[rec.question_id.as_str()], model_pos[rec.model_id.as_str()]);
        if !(rec.value.is_finite() && (0.0..=1.0).contains(&rec.value)) {
            return Err(MatrixError::ValueOutOfRange {
                question: rec.question_id.clone(),
                model: rec.model_id.clone(),
                value: rec.value,
            });
        }
        let cell = &mut values[q * nm + m];
        if !cell.is_nan() {
            return Err(MatrixError::DuplicatePair {
                question: rec.question_id.clone(),
                model: rec.model_id.clone(),
            });
        }
        *cell = rec.value;
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(MatrixError::IncompleteMatrix {
            question: question_ids[i / nm].clone(),
            model: model_ids[i % nm].clone(),
        });
    }
    ResponseMatrix::new(question_ids, model_ids, tags, values)
}

/// Which questions were removed before propagation, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub universally_solved: Vec<String>,
    pub universally_failed: Vec<String>,
    /// Models that fail none of the retained questions.
    pub dangling_models: Vec<String>,
    pub retained_question_count: usize,
    /// Fraction of the original questions that were filtered.
    pub extreme_fraction: f64,
    /// Row indices of the retained questions in the input matrix.
    pub retained_rows: Vec<usize>,
}

impl FilterReport {
    pub fn original_question_count(&self) -> usize {
        self.retained_question_count + self.universally_solved.len() + self.universally_failed.len()
    }

    pub fn filtered_count(&self) -> usize {
        self.universally_solved.len() + self.universally_failed.len()
    }
}

/// Removes universally solved and universally failed questions.
///
/// A question is universally failed when every entry is 0 and universally
/// solved when every entry is exactly 1. For binary matrices this is the
/// usual `0 < S(q) < M` rule.
pub fn filter_extremes(m: &ResponseMatrix) -> Result<(ResponseMatrix, FilterReport), MatrixError> {
    let mut solved = Vec::new();
    let mut failed = Vec::new();
    let mut retained = Vec::new();
    let n_models = m.n_models();
    for q in 0..m.n_questions() {
        let (all_zero, all_one) = match m.bit_row(q) {
            Some(_) => {
                let s = m.row_sum(q) as usize;
                (s == 0, s == n_models)
            }
            None => {
                let row = m.row(q);
                (row.iter().all(|&v| v == 0.0), row.iter().all(|&v| v == 1.0))
            }
        };
        if all_zero {
            failed.push(m.question_ids[q].clone());
        } else if all_one {
            solved.push(m.question_ids[q].clone());
        } else {
            retained.push(q);
        }
    }
    if retained.is_empty() {
        return Err(MatrixError::AllQuestionsFiltered);
    }
    let filtered = m.select_questions(&retained)?;
    let dangling_models = filtered
        .perfect_columns()
        .into_iter()
        .enumerate()
        .filter(|&(_, perfect)| perfect)
        .map(|(j, _)| m.model_ids[j].clone())
        .collect();
    let total = m.n_questions();
    let report = FilterReport {
        extreme_fraction: (solved.len() + failed.len()) as f64 / total as f64,
        universally_solved: solved,
        universally_failed: failed,
        dangling_models,
        retained_question_count: retained.len(),
        retained_rows: retained,
    };
    Ok((filtered, report))
}
