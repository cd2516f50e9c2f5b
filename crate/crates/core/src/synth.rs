//! Seeded synthetic response matrices.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{MatrixError, ResponseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
    #[error("model {model} solves {count} {category} questions but only {size} exist")]
    CountExceedsCategory {
        model: String,
        category: &'static str,
        count: usize,
        size: usize,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub const CASE_STUDY_CATEGORIES: [&str; 3] = ["easy", "medium", "hard"];

/// Five models over 100 questions in three difficulty categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudySpec {
    pub easy_count: usize,
    pub medium_count: usize,
    pub hard_count: usize,
    /// `(model id, [easy, medium, hard] solves)`.
    pub solves: Vec<(String, [usize; 3])>,
    pub seed: u64,
}

impl Default for CaseStudySpec {
    fn default() -> Self {
        let solves = [
            ("M1", [70, 10, 5]),
            ("M2", [70, 11, 4]),
            ("M3", [47, 13, 0]),
            ("M4", [46, 15, 0]),
            ("M5", [47, 14, 0]),
        ];
        Self {
            easy_count: 70,
            medium_count: 21,
            hard_count: 9,
            solves: solves.iter().map(|(id, c)| (id.to_string(), *c)).collect(),
            seed: 0,
        }
    }
}

impl CaseStudySpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn sizes(&self) -> [usize; 3] {
        [self.easy_count, self.medium_count, self.hard_count]
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.solves.is_empty() {
            return Err(SynthError::InvalidSpec("no models"));
        }
        if self.sizes().iter().sum::<usize>() == 0 {
            return Err(SynthError::InvalidSpec("no questions"));
        }
        for (model, counts) in &self.solves {
            for ((&count, size), category) in counts.iter().zip(self.sizes()).zip(CASE_STUDY_CATEGORIES) {
                if count > size {
                    return Err(SynthError::CountExceedsCategory {
                        model: model.clone(),
                        category,
                        count,
                        size,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Questions are tagged with their category. Within each category the
/// question order is shuffled by the seed, then each model in turn solves the
/// next block of its stated size, wrapping around the category. Blocks
/// therefore overlap as little as the counts allow.
pub fn generate_case_study(spec: &CaseStudySpec) -> Result<ResponseMatrix, SynthError> {
    spec.validate()?;
    let sizes = spec.sizes();
    let total: usize = sizes.iter().sum();
    let nm = spec.solves.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut solved = vec![false; total * nm];
    let mut tags = Vec::with_capacity(total);
    let mut offset = 0;
    for (c, &size) in sizes.iter().enumerate() {
        let mut slots: Vec<usize> = (0..size).collect();
        slots.shuffle(&mut rng);
        let mut cursor = 0;
        for (j, (_, counts)) in spec.solves.iter().enumerate() {
            for i in 0..counts[c] {
                let q = offset + slots[(cursor + i) % size];
                solved[q * nm + j] = true;
            }
            if size > 0 {
                cursor = (cursor + counts[c]) % size;
            }
        }
        tags.extend(std::iter::repeat_n(Some(CASE_STUDY_CATEGORIES[c].to_string()), size));
        offset += size;
    }
    let width = total.to_string().len();
    let qids = (1..=total).map(|i| format!("q{i:0width$}")).collect();
    let mids = spec.solves.iter().map(|(id, _)| id.clone()).collect();
    Ok(ResponseMatrix::from_binary_fn(qids, mids, tags, |q, j| {
        solved[q * nm + j]
    })?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Bernoulli,
    Rasch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub q: usize,
    pub m: usize,
    /// Success probability; used by the Bernoulli generator.
    pub density: f64,
    pub seed: u64,
    pub generator: Generator,
}

impl SyntheticSpec {
    pub fn bernoulli(q: usize, m: usize, seed: u64) -> Self {
        Self {
            q,
            m,
            density: 0.5,
            seed,
            generator: Generator::Bernoulli,
        }
    }

    pub fn rasch(q: usize, m: usize, seed: u64) -> Self {
        Self {
            generator: Generator::Rasch,
            ..Self::bernoulli(q, m, seed)
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.q < 2 {
            return Err(SynthError::InvalidSpec("need at least 2 questions"));
        }
        if self.m < 2 {
            return Err(SynthError::InvalidSpec("need at least 2 models"));
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err(SynthError::InvalidSpec("density must lie in (0, 1)"));
        }
        if u32::try_from(self.q).is_err() || u32::try_from(self.m).is_err() {
            return Err(SynthError::InvalidSpec("dimension exceeds u32 range"));
        }
        Ok(())
    }
}

fn ids(prefix: char, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Runs whichever generator the spec names.
pub fn generate(spec: &SyntheticSpec) -> Result<ResponseMatrix, SynthError> {
    match spec.generator {
        Generator::Bernoulli => generate_bernoulli(spec),
        Generator::Rasch => generate_rasch(spec).map(|s| s.matrix),
    }
}

/// Independent Bernoulli(`density`) entries, drawn in row-major order.
pub fn generate_bernoulli(spec: &SyntheticSpec) -> Result<ResponseMatrix, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(ResponseMatrix::from_binary_fn(
        ids('q', spec.q),
        ids('m', spec.m),
        vec![None; spec.q],
        |_, _| rng.gen_bool(spec.density),
    )?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaschSample {
    pub matrix: ResponseMatrix,
    /// Generating θ per model.
    pub abilities: Vec<f64>,
    /// Generating β per question.
    pub difficulties: Vec<f64>,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// θ and β from a standard normal, then `P(correct) = σ(θ − β)`.
pub fn generate_rasch(spec: &SyntheticSpec) -> Result<RaschSample, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let abilities: Vec<f64> = (0..spec.m).map(|_| normal.sample(&mut rng)).collect();
    let difficulties: Vec<f64> = (0..spec.q).map(|_| normal.sample(&mut rng)).collect();
    let matrix = rasch_matrix(ids('q', spec.q), ids('m', spec.m), &abilities, &difficulties, &mut rng)?;
    Ok(RaschSample {
        matrix,
        abilities,
        difficulties,
    })
}

fn rasch_matrix(
    qids: Vec<String>,
    mids: Vec<String>,
    abilities: &[f64],
    difficulties: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<ResponseMatrix, SynthError> {
    let tags = vec![None; qids.len()];
    Ok(ResponseMatrix::from_binary_fn(qids, mids, tags, |q, j| {
        rng.gen::<f64>() < logistic(abilities[j] - difficulties[q])
    })?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    HomogeneousStrong,
    HomogeneousWeak,
    Mixed,
}

impl PoolKind {
    pub const ALL: [PoolKind; 3] = [Self::HomogeneousStrong, Self::HomogeneousWeak, Self::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Self::HomogeneousStrong => "homogeneous_strong",
            Self::HomogeneousWeak => "homogeneous_weak",
            Self::Mixed => "mixed",
        }
    }

    /// Ability range of the pool's models.
    fn ability_range(self) -> (f64, f64) {
        match self {
            Self::HomogeneousStrong => (2.0, 3.0),
            Self::HomogeneousWeak => (-3.0, -2.0),
            Self::Mixed => (-3.0, 3.0),
        }
    }
}

impl std::str::FromStr for PoolKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(SynthError::InvalidSpec("unknown pool kind"))
    }
}

pub const POOL_MODELS: usize = 10;
pub const POOL_DIFFICULTY_SD: f64 = 1.5;

/// Ten models with abilities evenly spaced over the kind's range, answering
/// questions with difficulty drawn from `N(0, 1.5²)` under the Rasch link.
pub fn generate_pool_scenario(kind: PoolKind, q: usize, seed: u64) -> Result<ResponseMatrix, SynthError> {
    if q < 100 {
        return Err(SynthError::InvalidSpec("pool scenarios need at least 100 questions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, POOL_DIFFICULTY_SD).expect("valid sd");
    let difficulties: Vec<f64> = (0..q).map(|_| normal.sample(&mut rng)).collect();
    let (lo, hi) = kind.ability_range();
    let abilities: Vec<f64> = (0..POOL_MODELS)
        .map(|i| lo + (hi - lo) * i as f64 / (POOL_MODELS - 1) as f64)
        .collect();
    rasch_matrix(ids('q', q), ids('m', POOL_MODELS), &abilities, &difficulties, &mut rng)
}
