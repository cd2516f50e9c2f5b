use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::matrix::ResponseMatrix;
use crate::scoring::{normalize_scores, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrtModel {
    /// Rasch model: `σ(θ − β)`.
    OnePL,
    /// Per-question discrimination: `σ(a·(θ − β))`.
    TwoPL,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrtConfig {
    pub model_kind: IrtModel,
    pub max_optimizer_iterations: usize,
    pub l2_coefficient: f64,
    pub ability_bounds: (f64, f64),
    pub difficulty_bounds: (f64, f64),
    /// Only used by [`IrtModel::TwoPL`].
    pub discrimination_bounds: (f64, f64),
    /// Stop once the projected gradient's largest entry falls below this.
    pub gradient_tolerance: f64,
}

impl Default for IrtConfig {
    fn default() -> Self {
        Self {
            model_kind: IrtModel::OnePL,
            max_optimizer_iterations: 1000,
            l2_coefficient: 0.01,
            ability_bounds: (-5.0, 5.0),
            difficulty_bounds: (-5.0, 5.0),
            discrimination_bounds: (0.1, 5.0),
            gradient_tolerance: 1e-9,
        }
    }
}

impl IrtConfig {
    pub fn one_pl() -> Self {
        Self::default()
    }

    pub fn two_pl() -> Self {
        Self {
            model_kind: IrtModel::TwoPL,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let proper = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !proper(self.ability_bounds) {
            return Err(BaselineError::InvalidConfig("ability bounds"));
        }
        if !proper(self.difficulty_bounds) {
            return Err(BaselineError::InvalidConfig("difficulty bounds"));
        }
        if !proper(self.discrimination_bounds) {
            return Err(BaselineError::InvalidConfig("discrimination bounds"));
        }
        if !(self.l2_coefficient >= 0.0 && self.l2_coefficient.is_finite()) {
            return Err(BaselineError::InvalidConfig("l2 coefficient must be >= 0"));
        }
        if self.max_optimizer_iterations == 0 {
            return Err(BaselineError::InvalidConfig("iteration cap must be positive"));
        }
        if self.gradient_tolerance.is_nan() || self.gradient_tolerance <= 0.0 {
            return Err(BaselineError::InvalidConfig("gradient tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrtFit {
    pub model_kind: IrtModel,
    /// θ per model.
    pub abilities: Vec<f64>,
    /// β per question.
    pub difficulties: Vec<f64>,
    /// `a` per question; all 1 for 1PL.
    pub discriminations: Vec<f64>,
    /// Penalized log-likelihood at the returned parameters.
    pub final_objective: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Penalized log-likelihood after each accepted step, starting point first.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

struct Problem<'a> {
    y: Vec<f64>,
    nq: usize,
    nm: usize,
    cfg: &'a IrtConfig,
}

impl Problem<'_> {
    fn two_pl(&self) -> bool {
        self.cfg.model_kind == IrtModel::TwoPL
    }

    fn len(&self) -> usize {
        self.nm + self.nq * if self.two_pl() { 2 } else { 1 }
    }

    fn project(&self, x: &mut [f64]) {
        let (nm, nq) = (self.nm, self.nq);
        let clamp = |v: &mut [f64], (lo, hi): (f64, f64)| {
            for x in v {
                *x = x.clamp(lo, hi);
            }
        };
        clamp(&mut x[..nm], self.cfg.ability_bounds);
        clamp(&mut x[nm..nm + nq], self.cfg.difficulty_bounds);
        if self.two_pl() {
            clamp(&mut x[nm + nq..], self.cfg.discrimination_bounds);
        }
    }

    fn discrimination(&self, x: &[f64], q: usize) -> f64 {
        if self.two_pl() {
            x[self.nm + self.nq + q]
        } else {
            1.0
        }
    }

    /// Negated penalized log-likelihood; optionally fills its gradient.
    fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (nm, nq) = (self.nm, self.nq);
        let l2 = self.cfg.l2_coefficient;
        let theta = &x[..nm];
        let beta = &x[nm..nm + nq];
        let mut ll = 0.0;
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            g.fill(0.0);
        }
        for q in 0..nq {
            let a = self.discrimination(x, q);
            let row = &self.y[q * nm..(q + 1) * nm];
            for (j, &y) in row.iter().enumerate() {
                let d = theta[j] - beta[q];
                let z = a * d;
                ll += y * z - softplus(z);
                if let Some(g) = g.as_deref_mut() {
                    // d(-ll)/dz
                    let r = sigmoid(z) - y;
                    g[j] += a * r;
                    g[nm + q] -= a * r;
                    if self.two_pl() {
                        g[nm + nq + q] += d * r;
                    }
                }
            }
        }
        let mut penalty = theta.iter().chain(beta).map(|v| v * v).sum::<f64>();
        if self.two_pl() {
            penalty += x[nm + nq..].iter().map(|a| (a - 1.0) * (a - 1.0)).sum::<f64>();
        }
        if let Some(g) = g {
            for i in 0..nm + nq {
                g[i] += 2.0 * l2 * x[i];
            }
            if self.two_pl() {
                for i in nm + nq..x.len() {
                    g[i] += 2.0 * l2 * (x[i] - 1.0);
                }
            }
        }
        -(ll - l2 * penalty)
    }

    /// Largest entry of `x − P(x − g)`.
    fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        let mut y: Vec<f64> = x.iter().zip(g).map(|(x, g)| x - g).collect();
        self.project(&mut y);
        x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Penalized maximum-likelihood fit by projected gradient descent with
/// Barzilai–Borwein step sizes and Armijo backtracking, so every accepted
/// step improves the objective.
pub fn fit_irt(m: &ResponseMatrix, cfg: &IrtConfig, seed: u64) -> Result<IrtFit, BaselineError> {
    cfg.validate()?;
    if !m.is_binary() {
        return Err(BaselineError::NonBinaryInput);
    }
    let (nq, nm) = (m.n_questions(), m.n_models());
    if nq < 2 || nm < 2 {
        return Err(BaselineError::TooSmall);
    }
    let problem = Problem {
        y: m.to_values(),
        nq,
        nm,
        cfg,
    };

    let n = problem.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let base = if i >= nm + nq { 1.0 } else { 0.0 };
            base + rng.gen_range(-1e-3..=1e-3)
        })
        .collect();
    problem.project(&mut x);

    let mut g = vec![0.0; n];
    let mut f = problem.eval(&x, Some(&mut g));
    if !f.is_finite() {
        return Err(BaselineError::OptimizerDiverged);
    }
    let mut trace = vec![-f];
    let mut step = 1.0 / g.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let mut converged = problem.projected_gradient_norm(&x, &g) < cfg.gradient_tolerance;
    let mut iterations = 0;
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while !converged && iterations < cfg.max_optimizer_iterations {
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] - t * g[i];
            }
            problem.project(&mut x_new);
            let decrease: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
            if decrease == 0.0 {
                break;
            }
            let f_new = problem.eval(&x_new, None);
            if !f_new.is_finite() {
                return Err(BaselineError::OptimizerDiverged);
            }
            // Near the optimum the predicted decrease drops below the
            // objective's rounding noise; then any non-worsening step is taken.
            let noise = 16.0 * f64::EPSILON * f.abs().max(1.0);
            if f_new <= f + 1e-4 * decrease || (-decrease < noise && f_new <= f) {
                accepted = Some(f_new);
                break;
            }
            t *= 0.5;
        }
        let Some(f_new) = accepted else {
            // No representable improvement is left. That is an optimum to
            // working precision as long as the gradient is at the scale where
            // the objective stops resolving changes.
            let floor = f64::EPSILON.sqrt() * f.abs().max(1.0);
            converged = problem.projected_gradient_norm(&x, &g) <= floor;
            break;
        };
        iterations += 1;
        problem.eval(&x_new, Some(&mut g_new));
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            let s = x_new[i] - x[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1.0 };
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        trace.push(-f);
        converged = problem.projected_gradient_norm(&x, &g) < cfg.gradient_tolerance;
    }

    let discriminations = match cfg.model_kind {
        IrtModel::OnePL => vec![1.0; nq],
        IrtModel::TwoPL => x[nm + nq..].to_vec(),
    };
    Ok(IrtFit {
        model_kind: cfg.model_kind,
        abilities: x[..nm].to_vec(),
        difficulties: x[nm..nm + nq].to_vec(),
        discriminations,
        final_objective: -f,
        converged,
        iterations,
        objective_trace: trace,
    })
}

/// Abilities min-max scaled onto 0–100.
pub fn irt_ability_scores(fit: &IrtFit) -> Result<Vec<f64>, BaselineError> {
    if fit.abilities.len() < 2 {
        return Err(BaselineError::TooSmall);
    }
    normalize_scores(&fit.abilities, Normalization::MinMax100)
        .map_err(|_| BaselineError::DegenerateRange)
}
