//! Row-compressed storage for the two row-stochastic transition operators.

use serde::{Deserialize, Serialize};

/// How the stored entries of a [`CsrMatrix`] are weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowWeights {
    /// Every stored entry of a row equals `1 / nnz(row)`. Binary responses
    /// produce this layout, so only column indices are kept.
    Uniform,
    /// One explicit weight per stored entry.
    Explicit(Vec<f64>),
}

/// A row-compressed sparse matrix with `u32` column indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    weights: RowWeights,
}

impl CsrMatrix {
    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<u32>,
        weights: RowWeights,
    ) -> Self {
        debug_assert_eq!(indptr.len(), rows + 1);
        debug_assert_eq!(*indptr.last().unwrap_or(&0), indices.len());
        if let RowWeights::Explicit(w) = &weights {
            debug_assert_eq!(w.len(), indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            weights,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn weights(&self) -> &RowWeights {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.weights, RowWeights::Uniform)
    }

    /// Column indices stored in `row`, ascending.
    pub fn row_indices(&self, row: usize) -> &[u32] {
        &self.indices[self.indptr[row]..self.indptr[row + 1]]
    }

    /// Iterates `(column, weight)` pairs of one row in ascending column order.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (start, end) = (self.indptr[row], self.indptr[row + 1]);
        let uniform = 1.0 / (end - start) as f64;
        self.indices[start..end]
            .iter()
            .enumerate()
            .map(move |(k, &c)| {
                let w = match &self.weights {
                    RowWeights::Uniform => uniform,
                    RowWeights::Explicit(w) => w[start + k],
                };
                (c as usize, w)
            })
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.row(row).map(|(_, w)| w).sum()
    }

    /// Writes `Pᵀ x` into `out`.
    ///
    /// Rows are visited in ascending order, so each output entry accumulates
    /// its terms in ascending row index. The result is bit-reproducible.
    pub fn transpose_mul_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.rows, "input length must equal row count");
        assert_eq!(out.len(), self.cols, "output length must equal column count");
        out.fill(0.0);
        match &self.weights {
            RowWeights::Uniform => {
                for (r, &xr) in x.iter().enumerate() {
                    let (start, end) = (self.indptr[r], self.indptr[r + 1]);
                    if start == end {
                        continue;
                    }
                    let w = 1.0 / (end - start) as f64;
                    let mass = w * xr;
                    for &c in &self.indices[start..end] {
                        out[c as usize] += mass;
                    }
                }
            }
            RowWeights::Explicit(weights) => {
                for (r, &xr) in x.iter().enumerate() {
                    let (start, end) = (self.indptr[r], self.indptr[r + 1]);
                    for (&c, &w) in self.indices[start..end].iter().zip(&weights[start..end]) {
                        out[c as usize] += w * xr;
                    }
                }
            }
        }
    }

    /// Expands into a dense row-major `rows × cols` buffer.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, w) in self.row(r) {
                dense[r * self.cols + c] = w;
            }
        }
        dense
    }
}
