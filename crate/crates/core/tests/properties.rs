mod common;

use diffrank::analysis::{consensus_alignment, correlate, Choice, CorrelationMethod};
use diffrank::baselines::{accuracy_scores, fit_irt, simple_rank, weighted_scores_with, IrtConfig};
use diffrank::matrix::{build_transitions, build_transitions_as, filter_extremes};
use diffrank::propagation::{propagate, residual, solve_dense_oracle};
use diffrank::scoring::{normalize_scores, rank_entries};
use diffrank::{
    rank_matrix, rank_matrix_with, Normalization, PropagationConfig, ResponseKind, ResponseMatrix,
    RunOptions, TierScheme,
};
use proptest::prelude::*;

fn binary_matrix(max_q: usize, max_m: usize) -> impl Strategy<Value = ResponseMatrix> {
    (2..=max_q, 2..=max_m).prop_flat_map(|(q, m)| {
        proptest::collection::vec(any::<bool>(), q * m).prop_map(move |bits| {
            common::matrix(q, m, bits.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
        })
    })
}

fn graded_matrix(max_q: usize, max_m: usize) -> impl Strategy<Value = ResponseMatrix> {
    (2..=max_q, 2..=max_m).prop_flat_map(|(q, m)| {
        proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64], q * m)
            .prop_map(move |v| common::matrix(q, m, v))
    })
}

fn alpha() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.2), Just(0.5), Just(0.85), 0.05..0.95f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn operators_are_row_stochastic(m in graded_matrix(30, 8)) {
        let Ok((kept, _)) = filter_extremes(&m) else { return Ok(()); };
        let ts = build_transitions(&kept).unwrap();
        for p in [&ts.p_qm, &ts.p_mq] {
            for r in 0..p.rows() {
                prop_assert!((p.row_sum(r) - 1.0).abs() < 1e-12);
            }
            prop_assert!(p.to_dense().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn filtering_is_idempotent(m in graded_matrix(30, 6)) {
        let Ok((once, _)) = filter_extremes(&m) else { return Ok(()); };
        let (twice, report) = filter_extremes(&once).unwrap();
        prop_assert_eq!(report.filtered_count(), 0);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn scores_are_positive_distributions(m in graded_matrix(40, 8), a in alpha()) {
        let cfg = PropagationConfig::new(a, 1e-12, 5000).unwrap();
        let Ok(run) = rank_matrix(&m, &cfg) else { return Ok(()); };
        for v in [&run.scores.pi_q, &run.scores.pi_m] {
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(v.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn converged_runs_are_fixed_points(m in graded_matrix(40, 8), a in alpha()) {
        let Ok((kept, _)) = filter_extremes(&m) else { return Ok(()); };
        let ts = build_transitions(&kept).unwrap();
        let cfg = PropagationConfig::new(a, 1e-10, 5000).unwrap();
        let p = propagate(&ts, &cfg).unwrap();
        let (rq, rm) = residual(&ts, &p.scores, a).unwrap();
        prop_assert!(rq < 10.0 * cfg.epsilon && rm < 10.0 * cfg.epsilon);
    }

    #[test]
    fn matches_dense_oracle(m in graded_matrix(40, 8), a in prop_oneof![Just(0.2), Just(0.5), Just(0.85)]) {
        let Ok((kept, _)) = filter_extremes(&m) else { return Ok(()); };
        let ts = build_transitions(&kept).unwrap();
        let p = propagate(&ts, &PropagationConfig::new(a, 1e-13, 10_000).unwrap()).unwrap();
        let o = solve_dense_oracle(&ts, a).unwrap().blocks();
        prop_assert!(common::linf(&p.scores.pi_q, &o.pi_q) <= 1e-10);
        prop_assert!(common::linf(&p.scores.pi_m, &o.pi_m) <= 1e-10);
    }

    #[test]
    fn deltas_contract_geometrically(m in binary_matrix(60, 10), a in alpha()) {
        let Ok((kept, _)) = filter_extremes(&m) else { return Ok(()); };
        let ts = build_transitions(&kept).unwrap();
        let p = propagate(&ts, &PropagationConfig::new(a, 1e-13, 5000).unwrap()).unwrap();
        for w in p.trace.deltas.windows(2).skip(1) {
            // Below ~1e-15 the deltas are rounding noise.
            if w[0] > 1e-14 {
                prop_assert!(w[1] <= a * w[0] * (1.0 + 1e-6), "{} then {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn binary_and_continuous_pipelines_agree(m in binary_matrix(40, 8), a in alpha()) {
        let cfg = PropagationConfig::new(a, 1e-10, 5000).unwrap();
        let Ok(bin) = rank_matrix(&m, &cfg) else { return Ok(()); };
        let opts = RunOptions { kind: Some(ResponseKind::Continuous), record_timing: false };
        let cont = rank_matrix_with(&m, &cfg, opts).unwrap();
        prop_assert!(common::linf(&bin.scores.pi_q, &cont.scores.pi_q) <= 1e-12);
        prop_assert!(common::linf(&bin.scores.pi_m, &cont.scores.pi_m) <= 1e-12);
        prop_assert_eq!(bin.trace.iterations, cont.trace.iterations);
    }

    #[test]
    fn forced_binary_rejects_graded(m in graded_matrix(10, 4)) {
        if let Ok((kept, _)) = filter_extremes(&m) {
            let forced = build_transitions_as(&kept, ResponseKind::Binary);
            prop_assert_eq!(forced.is_ok(), kept.is_binary());
        }
    }

    #[test]
    fn normalization_preserves_ranks_and_ignores_scale(
        s in proptest::collection::vec(0.001..1.0f64, 2..30),
        c in 0.01..100.0f64,
    ) {
        let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
        for mode in [Normalization::Max100, Normalization::MinMax100] {
            let Ok(n) = normalize_scores(&s, mode) else { continue; };
            prop_assert_eq!(rank_entries(&n), rank_entries(&s));
            let n2 = normalize_scores(&scaled, mode).unwrap();
            prop_assert!(common::linf(&n, &n2) < 1e-9);
            prop_assert!(n.iter().all(|x| (-1e-9..=100.0 + 1e-9).contains(x)));
        }
    }

    #[test]
    fn tiers_are_monotone(a in 0.0..=100.0f64, b in 0.0..=100.0f64, lo in 1.0..49.0f64, gap in 1.0..50.0f64) {
        let scheme = TierScheme::new(lo, lo + gap).unwrap();
        let (x, y) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(scheme.classify(x).unwrap() <= scheme.classify(y).unwrap());
    }

    #[test]
    fn correlations_are_bounded_and_rank_invariant(
        pairs in proptest::collection::vec((-50i32..50, -50i32..50), 3..60),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 7.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 3.0).collect();
        let fx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let gy: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
        for method in [CorrelationMethod::Spearman, CorrelationMethod::Pearson, CorrelationMethod::KendallTauB] {
            let Ok(r) = correlate(&x, &y, method) else { continue; };
            prop_assert!((-1.0..=1.0).contains(&r.coefficient));
            let same = correlate(&x, &x, method).unwrap().coefficient;
            prop_assert!((same - 1.0).abs() < 1e-12);
            if method != CorrelationMethod::Pearson {
                let t = correlate(&fx, &gy, method).unwrap().coefficient;
                prop_assert!((t - r.coefficient).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tau_b_matches_enumeration(
        pairs in proptest::collection::vec((0u8..6, 0u8..6), 2..50),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        if let Ok(r) = correlate(&x, &y, CorrelationMethod::KendallTauB) {
            prop_assert!((r.coefficient - common::brute_tau_b(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_rank_complements_solver_counts(m in binary_matrix(30, 8)) {
        let sr = simple_rank(&m).unwrap();
        for q in 0..m.n_questions() {
            prop_assert_eq!(sr.error_counts[q] + m.row_sum(q), m.n_models() as f64);
        }
    }

    #[test]
    fn weighted_equals_accuracy_under_uniform_weights(m in binary_matrix(20, 6), split in 1usize..20) {
        // Duplicating every question into a second dataset keeps each
        // dataset's mean accuracy identical.
        let q = m.n_questions();
        let values: Vec<f64> = m.to_values().iter().chain(m.to_values().iter()).copied().collect();
        let doubled = common::matrix(2 * q, m.n_models(), values);
        let tags: Vec<&str> = (0..2 * q).map(|i| if i < q { "a" } else { "b" }).collect();
        let _ = split;
        if let Ok(w) = weighted_scores_with(&doubled, &tags) {
            prop_assert!(common::linf(&w, &accuracy_scores(&m)) < 1e-12);
        }
    }

    #[test]
    fn consensus_ignores_rater_order(
        votes in proptest::collection::vec(proptest::collection::vec(0u8..3, 6), 1..6),
        preds in proptest::collection::vec(any::<bool>(), 6),
    ) {
        let choice = |v: u8| match v { 0 => None, 1 => Some(Choice::First), _ => Some(Choice::Second) };
        let judgments: Vec<Vec<Option<Choice>>> = votes.iter().map(|r| r.iter().map(|&v| choice(v)).collect()).collect();
        let predictions: Vec<Choice> = preds.iter().map(|&b| if b { Choice::First } else { Choice::Second }).collect();
        let mut reversed = judgments.clone();
        reversed.reverse();
        match (consensus_alignment(&predictions, &judgments), consensus_alignment(&predictions, &reversed)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.consensus_alignment, b.consensus_alignment);
                prop_assert_eq!(a.kappa, b.kappa);
                let mut ra = a.per_rater_alignment.clone();
                ra.reverse();
                prop_assert_eq!(ra, b.per_rater_alignment);
                prop_assert!((0.0..=1.0).contains(&a.consensus_alignment));
            }
            (Err(a), Err(b)) => prop_assert_eq!(a, b),
            _ => prop_assert!(false, "ordering changed the outcome"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_pl_is_permutation_equivariant(m in binary_matrix(25, 6), seed in 0u64..4) {
        let nm = m.n_models();
        let perm: Vec<usize> = (0..nm).rev().collect();
        let permuted = m.select_models(&perm).unwrap();
        let cfg = IrtConfig::one_pl();
        let a = fit_irt(&m, &cfg, seed).unwrap();
        let b = fit_irt(&permuted, &cfg, seed).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            prop_assert!((a.abilities[j] - b.abilities[k]).abs() < 1e-6);
        }
        prop_assert!(a.abilities.iter().all(|t| t.abs() <= 5.0));
        prop_assert!(a.objective_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn two_pl_respects_bounds(m in binary_matrix(20, 6), seed in 0u64..4) {
        let fit = fit_irt(&m, &IrtConfig::two_pl(), seed).unwrap();
        prop_assert!(fit.abilities.iter().chain(&fit.difficulties).all(|v| v.abs() <= 5.0));
        prop_assert!(fit.discriminations.iter().all(|a| (0.1..=5.0).contains(a)));
        prop_assert!(fit.objective_trace.windows(2).all(|w| w[1] >= w[0]));
    }
}
