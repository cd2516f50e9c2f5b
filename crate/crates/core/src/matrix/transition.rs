use serde::{Deserialize, Serialize};

use super::sparse::{CsrMatrix, RowWeights};
use super::{MatrixError, ResponseMatrix};

/// Which construction path to use for the transition operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    /// Index-only rows; requires a `{0,1}` matrix.
    Binary,
    /// Explicit weights from graded credit.
    Continuous,
}

/// The pair of row-stochastic operators driving propagation.
///
/// `p_qm` is `Q' × M` and moves difficulty mass from a question to the models
/// that solved it. `p_mq` is `M × Q'` and moves competency mass from a model
/// to the questions it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionSystem {
    pub p_qm: CsrMatrix,
    pub p_mq: CsrMatrix,
    /// `S(q)` per retained question.
    pub solver_totals: Vec<f64>,
    /// `F(m)` per model.
    pub failure_totals: Vec<f64>,
    pub retained_question_ids: Vec<String>,
    pub model_ids: Vec<String>,
    /// Models whose `p_mq` row was replaced by the uniform distribution.
    pub dangling_models: Vec<String>,
    pub kind: ResponseKind,
}

impl TransitionSystem {
    pub fn n_questions(&self) -> usize {
        self.p_qm.rows()
    }

    pub fn n_models(&self) -> usize {
        self.p_mq.rows()
    }
}

/// Builds transitions along the binary path when the matrix is binary and
/// along the continuous path otherwise.
pub fn build_transitions(m: &ResponseMatrix) -> Result<TransitionSystem, MatrixError> {
    let kind = if m.is_binary() {
        ResponseKind::Binary
    } else {
        ResponseKind::Continuous
    };
    build_transitions_as(m, kind)
}

/// Builds both transition operators from an already filtered matrix.
pub fn build_transitions_as(
    m: &ResponseMatrix,
    kind: ResponseKind,
) -> Result<TransitionSystem, MatrixError> {
    if kind == ResponseKind::Binary && !m.is_binary() {
        return Err(MatrixError::NonBinary);
    }
    let (nq, nm) = (m.n_questions(), m.n_models());

    // Question -> model: solved cells.
    let mut qm_indptr = Vec::with_capacity(nq + 1);
    qm_indptr.push(0);
    let mut qm_indices: Vec<u32> = Vec::new();
    let mut qm_weights: Vec<f64> = Vec::new();
    let mut solver_totals = Vec::with_capacity(nq);
    // Model -> question failure counts, for sizing the second operator.
    let mut fail_counts = vec![0usize; nm];
    let mut failure_totals = vec![0.0f64; nm];

    for q in 0..nq {
        let start = qm_indices.len();
        match (kind, m.bit_row(q)) {
            (ResponseKind::Binary, Some(words)) => {
                for_each_set_bit(words, nm, |j| qm_indices.push(j as u32));
                for_each_clear_bit(words, nm, |j| fail_counts[j] += 1);
            }
            _ => {
                for j in 0..nm {
                    let v = m.value(q, j);
                    if v > 0.0 {
                        qm_indices.push(j as u32);
                        qm_weights.push(v);
                    }
                    let miss = 1.0 - v;
                    if miss > 0.0 {
                        fail_counts[j] += 1;
                        failure_totals[j] += miss;
                    }
                }
            }
        }
        let s = match kind {
            ResponseKind::Binary => (qm_indices.len() - start) as f64,
            ResponseKind::Continuous => qm_weights[start..].iter().sum(),
        };
        if s == 0.0 {
            return Err(MatrixError::UnfilteredInput {
                question: m.question_ids()[q].clone(),
            });
        }
        if kind == ResponseKind::Continuous {
            for w in &mut qm_weights[start..] {
                *w /= s;
            }
        }
        solver_totals.push(s);
        qm_indptr.push(qm_indices.len());
    }
    if kind == ResponseKind::Binary {
        for (total, &count) in failure_totals.iter_mut().zip(&fail_counts) {
            *total = count as f64;
        }
    }

    // Model -> question: failed cells, or every question for dangling models.
    let dangling: Vec<bool> = failure_totals.iter().map(|&f| f == 0.0).collect();
    let mut mq_indptr = Vec::with_capacity(nm + 1);
    mq_indptr.push(0usize);
    for j in 0..nm {
        let len = if dangling[j] { nq } else { fail_counts[j] };
        mq_indptr.push(mq_indptr[j] + len);
    }
    let total = mq_indptr[nm];
    let mut mq_indices = vec![0u32; total];
    let mut mq_weights = match kind {
        ResponseKind::Binary => Vec::new(),
        ResponseKind::Continuous => vec![0.0f64; total],
    };
    let mut cursor: Vec<usize> = mq_indptr[..nm].to_vec();
    for q in 0..nq {
        match (kind, m.bit_row(q)) {
            (ResponseKind::Binary, Some(words)) => {
                for_each_clear_bit(words, nm, |j| {
                    if !dangling[j] {
                        mq_indices[cursor[j]] = q as u32;
                        cursor[j] += 1;
                    }
                });
            }
            _ => {
                for j in 0..nm {
                    if dangling[j] {
                        continue;
                    }
                    let miss = 1.0 - m.value(q, j);
                    if miss > 0.0 {
                        mq_indices[cursor[j]] = q as u32;
                        mq_weights[cursor[j]] = miss / failure_totals[j];
                        cursor[j] += 1;
                    }
                }
            }
        }
    }
    for j in (0..nm).filter(|&j| dangling[j]) {
        let start = mq_indptr[j];
        for q in 0..nq {
            mq_indices[start + q] = q as u32;
        }
        if kind == ResponseKind::Continuous {
            let w = 1.0 / nq as f64;
            mq_weights[start..start + nq].fill(w);
        }
    }

    let weights = |w: Vec<f64>| match kind {
        ResponseKind::Binary => RowWeights::Uniform,
        ResponseKind::Continuous => RowWeights::Explicit(w),
    };
    let p_qm = CsrMatrix::from_parts(nq, nm, qm_indptr, qm_indices, weights(qm_weights));
    let p_mq = CsrMatrix::from_parts(nm, nq, mq_indptr, mq_indices, weights(mq_weights));
    let dangling_models = (0..nm)
        .filter(|&j| dangling[j])
        .map(|j| m.model_ids()[j].clone())
        .collect();

    Ok(TransitionSystem {
        p_qm,
        p_mq,
        solver_totals,
        failure_totals,
        retained_question_ids: m.question_ids().to_vec(),
        model_ids: m.model_ids().to_vec(),
        dangling_models,
        kind,
    })
}

fn for_each_set_bit(words: &[u64], len: usize, mut f: impl FnMut(usize)) {
    for (w, &word) in words.iter().enumerate() {
        let mut bits = word;
        while bits != 0 {
            let j = w * 64 + bits.trailing_zeros() as usize;
            if j >= len {
                break;
            }
            f(j);
            bits &= bits - 1;
        }
    }
}

fn for_each_clear_bit(words: &[u64], len: usize, mut f: impl FnMut(usize)) {
    for (w, &word) in words.iter().enumerate() {
        let mut bits = !word;
        while bits != 0 {
            let j = w * 64 + bits.trailing_zeros() as usize;
            if j >= len {
                break;
            }
            f(j);
            bits &= bits - 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{build_matrix, filter_extremes, ResponseRecord};

    fn matrix(values: &[&[f64]]) -> ResponseMatrix {
        let mut recs = Vec::new();
        for (q, row) in values.iter().enumerate() {
            for (m, &v) in row.iter().enumerate() {
                recs.push(ResponseRecord::new(format!("q{q}"), format!("m{m}"), v));
            }
        }
        build_matrix(&recs).unwrap()
    }

    fn dense_rows(p: &CsrMatrix) -> Vec<Vec<f64>> {
        p.to_dense().chunks(p.cols()).map(|c| c.to_vec()).collect()
    }

    #[test]
    fn three_questions_two_models() {
        let ts = build_transitions(&matrix(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(ts.kind, ResponseKind::Binary);
        assert_eq!(ts.failure_totals, vec![1.0, 2.0]);
        assert_eq!(ts.solver_totals, vec![1.0, 1.0, 1.0]);
        assert_eq!(
            dense_rows(&ts.p_mq),
            vec![vec![0.0, 0.0, 1.0], vec![0.5, 0.5, 0.0]]
        );
        assert_eq!(
            dense_rows(&ts.p_qm),
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]
        );
    }

    #[test]
    fn symmetric_rows_are_one_hot() {
        let ts = build_transitions(&matrix(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(dense_rows(&ts.p_qm), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(dense_rows(&ts.p_mq), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn half_credit_row() {
        let ts = build_transitions(&matrix(&[&[0.5, 0.5]])).unwrap();
        assert_eq!(ts.kind, ResponseKind::Continuous);
        assert_eq!(dense_rows(&ts.p_qm), vec![vec![0.5, 0.5]]);
        assert_eq!(ts.failure_totals, vec![0.5, 0.5]);
        assert_eq!(dense_rows(&ts.p_mq), vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn zero_row_is_rejected() {
        let err = build_transitions(&matrix(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap_err();
        assert_eq!(
            err,
            MatrixError::UnfilteredInput {
                question: "q1".into()
            }
        );
    }

    #[test]
    fn binary_path_needs_binary_values() {
        assert_eq!(
            build_transitions_as(&matrix(&[&[0.5, 0.0]]), ResponseKind::Binary),
            Err(MatrixError::NonBinary)
        );
    }

    #[test]
    fn dangling_model_gets_uniform_row() {
        let m = matrix(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 0.0]]);
        let (kept, _) = filter_extremes(&m).unwrap();
        for kind in [ResponseKind::Binary, ResponseKind::Continuous] {
            let ts = build_transitions_as(&kept, kind).unwrap();
            assert_eq!(ts.dangling_models, vec!["m0".to_string()]);
            assert_eq!(dense_rows(&ts.p_mq)[0], vec![0.5, 0.5]);
            assert_eq!(dense_rows(&ts.p_mq)[1], vec![0.5, 0.5]);
        }
    }

    #[test]
    fn binary_and_continuous_paths_agree() {
        let m = matrix(&[&[1.0, 0.0, 1.0], &[0.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        let a = build_transitions_as(&m, ResponseKind::Binary).unwrap();
        let b = build_transitions_as(&m, ResponseKind::Continuous).unwrap();
        assert_eq!(a.p_qm.to_dense(), b.p_qm.to_dense());
        assert_eq!(a.p_mq.to_dense(), b.p_mq.to_dense());
        assert_eq!(a.solver_totals, b.solver_totals);
        assert_eq!(a.failure_totals, b.failure_totals);
    }
}
