//! Damped bidirectional score propagation.
//!
//! Difficulty mass flows from each model to the questions it failed and
//! competency mass flows from each question to the models that solved it.
//! With probability `1 - alpha` the walk restarts uniformly on its side of
//! the bipartite graph, which makes the chain ergodic:
//!
//! ```text
//! pi_q' = alpha * P_mq^T pi_m  + (1 - alpha) / Q
//! pi_m' = alpha * P_qm^T pi_q' + (1 - alpha) / M
//! ```
//!
//! The model update consumes the freshly computed question vector
//! (Gauss-Seidel order). Each iteration costs one pass over the stored
//! entries of both operators.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::TransitionSystem;

/// Largest augmented chain the dense oracle will factorize.
pub const DENSE_ORACLE_LIMIT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("damping factor must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("max_iterations must be at least 1")]
    InvalidIterationCap,
    #[error("did not converge within {} iterations (last delta {:e})", .0.trace.iterations, .0.trace.last_delta())]
    DidNotConverge(Box<Propagation>),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("augmented chain has {0} states; the dense oracle is limited to {DENSE_ORACLE_LIMIT}")]
    TooLargeForDenseOracle(usize),
    #[error("dense oracle system is singular")]
    SingularSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    /// Probability of following a bipartite edge instead of teleporting.
    pub alpha: f64,
    /// Stop once the summed L1 change of both vectors drops below this.
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            epsilon: 1e-10,
            max_iterations: 1000,
        }
    }
}

impl PropagationConfig {
    pub fn new(alpha: f64, epsilon: f64, max_iterations: usize) -> Result<Self, PropagationError> {
        let cfg = Self {
            alpha,
            epsilon,
            max_iterations,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PropagationError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PropagationError::InvalidAlpha(self.alpha));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(PropagationError::InvalidTolerance(self.epsilon));
        }
        if self.max_iterations == 0 {
            return Err(PropagationError::InvalidIterationCap);
        }
        Ok(())
    }
}

/// Converged difficulty (`pi_q`) and competency (`pi_m`) distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryScores {
    pub pi_q: Vec<f64>,
    pub pi_m: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    /// One entry per update; the first is measured against the uniform start.
    pub deltas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_iteration_seconds: Option<Vec<f64>>,
}

impl ConvergenceTrace {
    pub fn last_delta(&self) -> f64 {
        self.deltas.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Scores together with the trace that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub scores: StationaryScores,
    pub trace: ConvergenceTrace,
}

/// Runs propagation to convergence.
///
/// Returns [`PropagationError::DidNotConverge`] carrying the last iterate and
/// its trace when `max_iterations` is exhausted.
pub fn propagate(
    ts: &TransitionSystem,
    cfg: &PropagationConfig,
) -> Result<Propagation, PropagationError> {
    run(ts, cfg, false)
}

/// Like [`propagate`], but records wall-clock seconds for every iteration.
pub fn propagate_timed(
    ts: &TransitionSystem,
    cfg: &PropagationConfig,
) -> Result<Propagation, PropagationError> {
    run(ts, cfg, true)
}

fn run(
    ts: &TransitionSystem,
    cfg: &PropagationConfig,
    timed: bool,
) -> Result<Propagation, PropagationError> {
    cfg.validate()?;
    let (nq, nm) = (ts.n_questions(), ts.n_models());
    let alpha = cfg.alpha;
    let restart_q = (1.0 - alpha) / nq as f64;
    let restart_m = (1.0 - alpha) / nm as f64;

    let mut pi_q = vec![1.0 / nq as f64; nq];
    let mut pi_m = vec![1.0 / nm as f64; nm];
    let mut next_q = vec![0.0; nq];
    let mut next_m = vec![0.0; nm];

    let mut deltas = Vec::new();
    let mut seconds = timed.then(Vec::new);
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let started = timed.then(Instant::now);

        ts.p_mq.transpose_mul_into(&pi_m, &mut next_q);
        for v in &mut next_q {
            *v = alpha * *v + restart_q;
        }
        ts.p_qm.transpose_mul_into(&next_q, &mut next_m);
        for v in &mut next_m {
            *v = alpha * *v + restart_m;
        }

        let delta = l1_distance(&next_q, &pi_q) + l1_distance(&next_m, &pi_m);
        std::mem::swap(&mut pi_q, &mut next_q);
        std::mem::swap(&mut pi_m, &mut next_m);

        if let (Some(t0), Some(s)) = (started, seconds.as_mut()) {
            s.push(t0.elapsed().as_secs_f64());
        }
        debug_assert!((pi_q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        debug_assert!((pi_m.iter().sum::<f64>() - 1.0).abs() < 1e-9);

        deltas.push(delta);
        if delta < cfg.epsilon {
            converged = true;
            break;
        }
    }

    let result = Propagation {
        scores: StationaryScores { pi_q, pi_m },
        trace: ConvergenceTrace {
            iterations: deltas.len(),
            deltas,
            converged,
            per_iteration_seconds: seconds,
        },
    };
    if converged {
        Ok(result)
    } else {
        Err(PropagationError::DidNotConverge(Box::new(result)))
    }
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// L∞ residuals of both fixed-point equations.
pub fn residual(
    ts: &TransitionSystem,
    scores: &StationaryScores,
    alpha: f64,
) -> Result<(f64, f64), PropagationError> {
    let (nq, nm) = (ts.n_questions(), ts.n_models());
    if scores.pi_q.len() != nq {
        return Err(PropagationError::DimensionMismatch {
            expected: nq,
            found: scores.pi_q.len(),
        });
    }
    if scores.pi_m.len() != nm {
        return Err(PropagationError::DimensionMismatch {
            expected: nm,
            found: scores.pi_m.len(),
        });
    }
    let mut image_q = vec![0.0; nq];
    let mut image_m = vec![0.0; nm];
    ts.p_mq.transpose_mul_into(&scores.pi_m, &mut image_q);
    ts.p_qm.transpose_mul_into(&scores.pi_q, &mut image_m);
    let worst = |pi: &[f64], image: &[f64], n: usize| {
        pi.iter()
            .zip(image)
            .map(|(p, i)| (p - (alpha * i + (1.0 - alpha) / n as f64)).abs())
            .fold(0.0, f64::max)
    };
    Ok((worst(&scores.pi_q, &image_q, nq), worst(&scores.pi_m, &image_m, nm)))
}

/// Stationary distribution of the augmented `Q' + M` state chain.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Question states first, then model states; sums to 1.
    pub pi: Vec<f64>,
    pub block_matrix_dim: usize,
    pub n_questions: usize,
}

impl OracleSolution {
    /// Splits `pi` into its question and model blocks, each rescaled to sum 1.
    pub fn blocks(&self) -> StationaryScores {
        let (q, m) = self.pi.split_at(self.n_questions);
        let rescale = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect()
        };
        StationaryScores {
            pi_q: rescale(q),
            pi_m: rescale(m),
        }
    }
}

/// Solves for the stationary vector of the damped block chain with a dense
/// LU factorization.
///
/// The chain follows the block operator `[[0, P_qm], [P_mq, 0]]` with
/// probability `alpha` and otherwise restarts on the uniform distribution of
/// either side with probability 1/2 each. Its stationary vector is half of
/// the propagation fixed point, so each block sums to 1/2.
pub fn solve_dense_oracle(
    ts: &TransitionSystem,
    alpha: f64,
) -> Result<OracleSolution, PropagationError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PropagationError::InvalidAlpha(alpha));
    }
    let (nq, nm) = (ts.n_questions(), ts.n_models());
    let n = nq + nm;
    if n > DENSE_ORACLE_LIMIT {
        return Err(PropagationError::TooLargeForDenseOracle(n));
    }

    // Row-stochastic kernel K; stationarity is (K^T - I) pi = 0.
    let mut kernel = DMatrix::<f64>::zeros(n, n);
    for q in 0..nq {
        for (j, w) in ts.p_qm.row(q) {
            kernel[(q, nq + j)] += alpha * w;
        }
    }
    for j in 0..nm {
        for (q, w) in ts.p_mq.row(j) {
            kernel[(nq + j, q)] += alpha * w;
        }
    }
    let restart_q = (1.0 - alpha) / (2.0 * nq as f64);
    let restart_m = (1.0 - alpha) / (2.0 * nm as f64);
    for r in 0..n {
        for c in 0..nq {
            kernel[(r, c)] += restart_q;
        }
        for c in nq..n {
            kernel[(r, c)] += restart_m;
        }
    }

    let mut system = kernel.transpose();
    for i in 0..n {
        system[(i, i)] -= 1.0;
    }
    // Replace the last balance equation with the normalization constraint.
    for c in 0..n {
        system[(n - 1, c)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = system
        .lu()
        .solve(&rhs)
        .ok_or(PropagationError::SingularSystem)?;

    Ok(OracleSolution {
        pi: pi.iter().copied().collect(),
        block_matrix_dim: n,
        n_questions: nq,
    })
}

/// One row of a damping-factor sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    /// Zero-based update index, matching the trace's `deltas`.
    pub iteration: usize,
    pub delta: f64,
}

/// Reruns propagation for each damping factor and collects the delta traces.
pub fn convergence_sweep(
    ts: &TransitionSystem,
    alphas: &[f64],
    epsilon: f64,
    max_iterations: usize,
) -> Result<Vec<SweepRow>, PropagationError> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        let cfg = PropagationConfig::new(alpha, epsilon, max_iterations)?;
        let trace = match propagate(ts, &cfg) {
            Ok(p) => p.trace,
            Err(PropagationError::DidNotConverge(p)) => p.trace,
            Err(e) => return Err(e),
        };
        rows.extend(trace.deltas.iter().enumerate().map(|(iteration, &delta)| SweepRow {
            alpha,
            iteration,
            delta,
        }));
    }
    Ok(rows)
}
