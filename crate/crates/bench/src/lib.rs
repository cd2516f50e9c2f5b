//! Fixtures shared by the propagation benchmarks.

use diffrank::matrix::{build_transitions_as, filter_extremes, ResponseKind};
use diffrank::synth::{generate_bernoulli, SyntheticSpec};
use diffrank::{ResponseMatrix, TransitionSystem};

/// Sizes small enough for repeated sampling on a laptop.
pub const SIZES: [(usize, usize); 4] = [(10_000, 50), (20_000, 50), (20_000, 100), (50_000, 100)];

pub fn bernoulli(q: usize, m: usize) -> ResponseMatrix {
    generate_bernoulli(&SyntheticSpec::bernoulli(q, m, 0)).expect("valid size")
}

/// Filtered transition system for a seeded Bernoulli(0.5) matrix.
pub fn transitions(q: usize, m: usize, kind: ResponseKind) -> TransitionSystem {
    let (kept, _) = filter_extremes(&bernoulli(q, m)).expect("something survives filtering");
    build_transitions_as(&kept, kind).expect("valid matrix")
}
