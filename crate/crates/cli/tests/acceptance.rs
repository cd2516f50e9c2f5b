//! One PASS/FAIL line per acceptance criterion.
//!
//! Run with `cargo test -p diffrank-cli --test acceptance -- --nocapture` to
//! see the table. Criteria 5 and 9 are known to be unattainable as stated;
//! they are evaluated at full strength, reported as FAIL, and the test
//! asserts that exactly those two fail.

use std::collections::BTreeSet;
use std::fs;
use std::process::Command;
use std::time::Instant;

use clap::Parser;
use diffrank::analysis::{
    cohen_kappa, correlate, icc1, model_removal_study, rank_biased_overlap, CorrelationMethod,
};
use diffrank::baselines::{
    accuracy_scores, fit_irt, irt_ability_scores, simple_rank_model_scores, IrtConfig,
};
use diffrank::matrix::{build_transitions, filter_extremes};
use diffrank::propagation::{propagate, residual, solve_dense_oracle};
use diffrank::scoring::{normalize_scores, rank_entries};
use diffrank::synth::{
    generate_bernoulli, generate_case_study, generate_pool_scenario, generate_rasch, CaseStudySpec,
    PoolKind, SyntheticSpec,
};
use diffrank::{
    rank_matrix, rank_matrix_with, Normalization, PropagationConfig, ResponseKind, ResponseMatrix,
    RunOptions,
};
use diffrank_cli::args::{Cli, Command as Sub};
use diffrank_cli::commands::bench_doc;
use diffrank_cli::input::{read_matrix, write_csv};
use tempfile::TempDir;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    correlate(a, b, CorrelationMethod::Spearman).unwrap().coefficient
}

fn case_study() -> ResponseMatrix {
    generate_case_study(&CaseStudySpec::default()).unwrap()
}

fn c1_case_study_ordering() -> Verdict {
    let started = Instant::now();
    let m = case_study();
    let run = rank_matrix(&m, &PropagationConfig::default()).unwrap();
    let report = run.model_report(Normalization::Max100).unwrap();
    let order: Vec<&str> = report.entries.iter().map(|e| e.id.as_str()).collect();
    let strict = report.entries.windows(2).all(|w| w[0].raw_score > w[1].raw_score);
    let acc = rank_entries(&accuracy_scores(&m));
    let sr = rank_entries(&simple_rank_model_scores(&m).unwrap());
    let secs = started.elapsed().as_secs_f64();
    let pass = order == ["M1", "M2", "M4", "M5", "M3"]
        && strict
        && acc[0] == acc[1]
        && acc[3] == acc[4]
        && sr[0] == sr[1]
        && sr[3] == sr[4]
        && secs < 1.0;
    verdict(
        pass,
        format!("order {order:?}, accuracy ranks {acc:?}, simple-rank ranks {sr:?}, {secs:.3} s"),
    )
}

fn c2_tier_separation() -> Verdict {
    let m = case_study();
    let run = rank_matrix(&m, &PropagationConfig::default()).unwrap();
    let d = normalize_scores(&run.scores.pi_q, Normalization::Max100).unwrap();
    let mean = |cat: &str| {
        let v: Vec<f64> = run
            .question_ids
            .iter()
            .zip(&d)
            .filter(|(id, _)| {
                let q = m.question_index(id).unwrap();
                m.dataset_tags()[q].as_deref() == Some(cat)
            })
            .map(|(_, &s)| s)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (e, md, h) = (mean("easy"), mean("medium"), mean("hard"));
    let pass = e < md && md < h && md - e >= 10.0 && h - md >= 10.0 && h >= 90.0;
    verdict(pass, format!("means easy {e:.2}, medium {md:.2}, hard {h:.2}"))
}

/// Seeded systems with Q' <= 40 and M <= 8 at the three damping factors.
fn oracle_systems() -> Vec<(ResponseMatrix, f64)> {
    let mut out = Vec::new();
    for seed in 0..40u64 {
        let q = 5 + (seed as usize * 7) % 36;
        let m = 2 + (seed as usize) % 7;
        let mat = generate_bernoulli(&SyntheticSpec::bernoulli(q, m, seed)).unwrap();
        if filter_extremes(&mat).is_err() {
            continue;
        }
        for alpha in [0.2, 0.5, 0.85] {
            out.push((mat.clone(), alpha));
        }
    }
    out
}

fn c3_oracle_equivalence() -> Verdict {
    let started = Instant::now();
    let (mut n, mut worst, mut max_q, mut max_m) = (0, 0.0f64, 0, 0);
    for (mat, alpha) in oracle_systems() {
        let (kept, _) = filter_extremes(&mat).unwrap();
        let ts = build_transitions(&kept).unwrap();
        let cfg = PropagationConfig::new(alpha, 1e-13, 10_000).unwrap();
        let p = propagate(&ts, &cfg).unwrap();
        let o = solve_dense_oracle(&ts, alpha).unwrap().blocks();
        worst = worst.max(linf(&p.scores.pi_q, &o.pi_q)).max(linf(&p.scores.pi_m, &o.pi_m));
        max_q = max_q.max(kept.n_questions());
        max_m = max_m.max(kept.n_models());
        n += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = n >= 100 && max_q <= 40 && max_m <= 8 && worst <= 1e-10 && secs < 30.0;
    verdict(
        pass,
        format!("{n} systems (Q' <= {max_q}, M <= {max_m}), worst L-inf {worst:.2e}, {secs:.2} s"),
    )
}

fn c4_fixed_point_residual() -> Verdict {
    let mut mats: Vec<(ResponseMatrix, f64)> = oracle_systems();
    mats.push((case_study(), 0.85));
    for seed in 0..10 {
        let m = generate_bernoulli(&SyntheticSpec::bernoulli(2000, 40, seed)).unwrap();
        mats.push((m, 0.5 + 0.04 * seed as f64));
    }
    let (mut runs, mut worst_res, mut worst_sum, mut min_entry) = (0, 0.0f64, 0.0f64, f64::INFINITY);
    let mut ok = true;
    for (mat, alpha) in &mats {
        let (kept, _) = filter_extremes(mat).unwrap();
        let ts = build_transitions(&kept).unwrap();
        let cfg = PropagationConfig::new(*alpha, 1e-10, 1000).unwrap();
        let p = propagate(&ts, &cfg).unwrap();
        let (rq, rm) = residual(&ts, &p.scores, *alpha).unwrap();
        let sq: f64 = p.scores.pi_q.iter().sum();
        let sm: f64 = p.scores.pi_m.iter().sum();
        let lo = p.scores.pi_q.iter().chain(&p.scores.pi_m).copied().fold(f64::INFINITY, f64::min);
        ok &= rq < 10.0 * cfg.epsilon && rm < 10.0 * cfg.epsilon;
        ok &= (sq - 1.0).abs() <= 1e-9 && (sm - 1.0).abs() <= 1e-9 && lo > 0.0;
        worst_res = worst_res.max(rq.max(rm) / cfg.epsilon);
        worst_sum = worst_sum.max((sq - 1.0).abs().max((sm - 1.0).abs()));
        min_entry = min_entry.min(lo);
        runs += 1;
    }
    verdict(
        ok,
        format!(
            "{runs} runs, worst residual {worst_res:.3} eps, worst |sum-1| {worst_sum:.1e}, min entry {min_entry:.2e}"
        ),
    )
}

fn iterations(m: &ResponseMatrix, alpha: f64) -> (usize, Vec<f64>) {
    let cfg = PropagationConfig::new(alpha, 1e-10, 1000).unwrap();
    let run = rank_matrix(m, &cfg).unwrap();
    (run.trace.iterations, run.trace.deltas)
}

fn c5_geometric_convergence() -> Verdict {
    let alphas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut worst_ratio = 0.0f64;
    let mut contraction = true;
    for seed in 0..5 {
        let base = generate_bernoulli(&SyntheticSpec::bernoulli(1000, 20, seed)).unwrap();
        for &alpha in &alphas {
            let (_, deltas) = iterations(&base, alpha);
            for w in deltas.windows(2) {
                worst_ratio = worst_ratio.max(w[1] / (alpha * w[0]));
                contraction &= w[1] <= alpha * w[0] * (1.0 + 1e-6);
            }
        }
    }
    let grid: Vec<ResponseMatrix> = [(1000, 10), (1000, 100), (10_000, 10), (10_000, 100)]
        .iter()
        .map(|&(q, m)| generate_bernoulli(&SyntheticSpec::bernoulli(q, m, 1)).unwrap())
        .collect();
    let mut spread_ok = true;
    let mut counts_text = Vec::new();
    for &alpha in &alphas {
        let counts: Vec<usize> = grid.iter().map(|m| iterations(m, alpha).0).collect();
        let lo = *counts.iter().min().unwrap();
        let hi = *counts.iter().max().unwrap();
        spread_ok &= hi - lo <= 1;
        counts_text.push(format!("{alpha}:{counts:?}"));
    }
    verdict(
        contraction && spread_ok,
        format!(
            "contraction on 5 seeded 1000x20 matrices {} (worst delta ratio {worst_ratio:.3} alpha); iteration counts over Q{{1e3,1e4}}xM{{10,100}} within +-1: {} [{}]",
            if contraction { "holds" } else { "violated" },
            if spread_ok { "yes" } else { "no" },
            counts_text.join(" ")
        ),
    )
}

fn c6_scalability() -> Verdict {
    let cli = Cli::try_parse_from(["diffrank", "bench"]).unwrap();
    let Sub::Bench(args) = cli.command else { unreachable!() };
    let doc = bench_doc(&args).unwrap();
    let row = |q: usize, m: usize| doc.rows.iter().find(|r| r.q == q && r.m == m).unwrap();
    let iters: BTreeSet<usize> = doc.rows.iter().map(|r| r.iterations).collect();
    let ratio = row(500_000, 500).avg_seconds_per_iteration / row(250_000, 500).avg_seconds_per_iteration;
    let small = row(250_000, 250).total_seconds;
    let pass = iters.len() == 1
        && doc.rows.iter().all(|r| r.converged)
        && (1.5..=2.5).contains(&ratio)
        && small <= 5.0;
    verdict(
        pass,
        format!(
            "iterations {iters:?} over {} sizes, 500k/250k time-per-iteration ratio {ratio:.2}, 250k x 250 propagation {small:.2} s",
            doc.rows.len()
        ),
    )
}

fn c7_binary_continuous() -> Verdict {
    let cfg = PropagationConfig::default();
    let mut worst = 0.0f64;
    let mut same_iters = true;
    for seed in 0..50u64 {
        let m = generate_bernoulli(&SyntheticSpec::bernoulli(50 + 5 * seed as usize, 3 + seed as usize % 9, seed)).unwrap();
        let run = |kind| rank_matrix_with(&m, &cfg, RunOptions { kind: Some(kind), record_timing: false }).unwrap();
        let b = run(ResponseKind::Binary);
        let c = run(ResponseKind::Continuous);
        worst = worst.max(linf(&b.scores.pi_q, &c.scores.pi_q)).max(linf(&b.scores.pi_m, &c.scores.pi_m));
        same_iters &= b.trace.iterations == c.trace.iterations;
    }
    verdict(worst <= 1e-12, format!("50 matrices, worst L-inf {worst:.2e}, equal iteration counts: {same_iters}"))
}

fn c8_robustness() -> Verdict {
    let sample = generate_rasch(&SyntheticSpec::rasch(5000, 30, 0)).unwrap();
    let cfg = PropagationConfig::default();
    let mut q = Vec::new();
    let mut mo = Vec::new();
    for k in [1, 5, 10, 15] {
        let r = model_removal_study(&sample.matrix, k, 50, &cfg, 0).unwrap();
        q.push(r.question_rho_mean);
        mo.push(r.model_rho_mean);
    }
    let monotone = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let pass = q[0] >= 0.98 && mo[0] >= 0.99 && monotone(&q) && monotone(&mo);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    verdict(pass, format!("k=1/5/10/15 question rho {}, model rho {}", fmt(&q), fmt(&mo)))
}

fn c9_duplicate_model() -> Verdict {
    let cfg = PropagationConfig::default();
    let mut worst = 1.0f64;
    let mut exact = 0;
    let seeds = 30;
    for seed in 0..seeds {
        let base = generate_bernoulli(&SyntheticSpec::bernoulli(300, 6, seed)).unwrap();
        let mut ids = base.model_ids().to_vec();
        ids.push("dup".into());
        let values: Vec<f64> = (0..base.n_questions())
            .flat_map(|q| (0..base.n_models()).map(move |j| (q, j)).chain([(q, 0)]))
            .map(|(q, j)| base.value(q, j))
            .collect();
        let with_dup = ResponseMatrix::new(base.question_ids().to_vec(), ids, base.dataset_tags().to_vec(), values).unwrap();
        let full = rank_matrix(&with_dup, &cfg).unwrap();
        let reduced = rank_matrix(&base, &cfg).unwrap();
        let red = reduced.difficulty_by_id();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (id, &v) in full.question_ids.iter().zip(&full.scores.pi_q) {
            if let Some(&w) = red.get(id.as_str()) {
                a.push(v);
                b.push(w);
            }
        }
        let rho = spearman(&a, &b);
        worst = worst.min(rho);
        exact += (rho == 1.0) as usize;
    }
    verdict(
        exact == seeds as usize,
        format!("rho = 1 exactly on {exact}/{seeds} seeded 300x6 matrices, worst rho {worst:.4}"),
    )
}

fn c10_irt() -> Verdict {
    let sample = generate_rasch(&SyntheticSpec::rasch(200, 10, 0)).unwrap();
    let one = fit_irt(&sample.matrix, &IrtConfig::one_pl(), 0).unwrap();
    let two = fit_irt(&sample.matrix, &IrtConfig::two_pl(), 0).unwrap();
    let tau = correlate(&one.abilities, &sample.abilities, CorrelationMethod::KendallTauB)
        .unwrap()
        .coefficient;
    let in_bounds = |f: &diffrank::baselines::IrtFit| {
        f.abilities.iter().chain(&f.difficulties).all(|v| (-5.0..=5.0).contains(v))
            && f.discriminations.iter().all(|a| (0.1..=5.0).contains(a))
    };
    let cs = fit_irt(&case_study(), &IrtConfig::one_pl(), 0).unwrap();
    let s = irt_ability_scores(&cs).unwrap();
    let r2 = |x: f64| (x * 100.0).round() / 100.0;
    let tie = r2(s[0]) == 100.0 && r2(s[1]) == 100.0;
    let pass = tau >= 0.9 && in_bounds(&one) && in_bounds(&two) && tie;
    verdict(
        pass,
        format!(
            "1PL tau {tau:.3}; bounds 1PL {} 2PL {}; case-study 1PL M1 {:.2} M2 {:.2}",
            in_bounds(&one),
            in_bounds(&two),
            s[0],
            s[1]
        ),
    )
}

fn c11_statistics() -> Verdict {
    use CorrelationMethod::*;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let mut checks: Vec<(&str, bool)> = Vec::new();
    let x = [1.0, 2.0, 3.0];
    let rev = [3.0, 2.0, 1.0];
    for m in [Spearman, Pearson, KendallTauB] {
        checks.push(("identity", close(correlate(&x, &x, m).unwrap().coefficient, 1.0)));
        checks.push(("reversal", close(correlate(&x, &rev, m).unwrap().coefficient, -1.0)));
    }
    let noisy = [0.3, -1.2, 4.4, 0.0, 2.5, 2.6];
    for m in [Spearman, Pearson, KendallTauB] {
        checks.push(("self", close(correlate(&noisy, &noisy, m).unwrap().coefficient, 1.0)));
    }
    let tau = correlate(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0], KendallTauB).unwrap().coefficient;
    checks.push(("tau-b 2/3", close(tau, 2.0 / 3.0)));
    checks.push(("kappa identical", close(cohen_kappa(&["A", "B", "A"], &["A", "B", "A"]).unwrap(), 1.0)));
    checks.push(("kappa 0", close(cohen_kappa(&['A', 'A', 'B', 'B'], &['A', 'B', 'A', 'B']).unwrap(), 0.0)));
    let ids = ["a", "b", "c", "d"];
    checks.push(("rbo identical", close(rank_biased_overlap(&ids, &ids, 0.9).unwrap(), 1.0)));
    // Agreement 0 at depth 1 and 1 from depth 2: (1-p) * sum_{d>=2} p^(d-1) = p.
    let direct: f64 = (1..2000).map(|d| (1.0 - 0.9) * 0.9f64.powi(d)).sum();
    checks.push(("rbo reversal", close(rank_biased_overlap(&["a", "b"], &["b", "a"], 0.9).unwrap(), direct)));
    let agree = vec![vec![1.0, 1.0, 1.0], vec![3.0, 3.0, 3.0], vec![2.0, 2.0, 2.0]];
    checks.push(("icc identical", close(icc1(&agree).unwrap(), 1.0)));
    let r = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![6.0, 5.0]];
    checks.push(("icc 7.5/8.5", close(icc1(&r).unwrap(), 7.5 / 8.5)));
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(
        failed.is_empty(),
        format!("{} hand-computed checks, failing: {failed:?}", checks.len()),
    )
}

fn bin(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_diffrank"))
        .args(args)
        .output()
        .expect("binary runs");
    (out.status.code().unwrap(), out.stdout)
}

fn c12_cli_round_trip() -> Verdict {
    let dir = TempDir::new().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let mut problems: Vec<String> = Vec::new();

    let scenarios: [(&str, &[&str], ResponseMatrix); 4] = [
        ("case_study", &["--seed", "5"], generate_case_study(&CaseStudySpec::with_seed(5)).unwrap()),
        (
            "bernoulli",
            &["--seed", "5", "--q", "1000", "--m", "20"],
            generate_bernoulli(&SyntheticSpec::bernoulli(1000, 20, 5)).unwrap(),
        ),
        ("rasch", &["--seed", "5"], generate_rasch(&SyntheticSpec::rasch(200, 10, 5)).unwrap().matrix),
        ("pools", &["--seed", "5"], generate_pool_scenario(PoolKind::Mixed, 1000, 5).unwrap()),
    ];
    for (name, extra, expected) in &scenarios {
        let mut bytes = Vec::new();
        for copy in ["a", "b"] {
            let file = path(&format!("{name}-{copy}.csv"));
            let mut args = vec!["simulate", "--scenario", name, "--out", &file];
            args.extend_from_slice(extra);
            if bin(&args).0 != 0 {
                problems.push(format!("{name}: simulate failed"));
            }
            bytes.push(fs::read(&file).unwrap_or_default());
        }
        if bytes[0] != bytes[1] {
            problems.push(format!("{name}: simulate rerun differs"));
        }
        let file = path(&format!("{name}-a.csv"));
        let parsed = read_matrix(std::path::Path::new(&file), None).unwrap();
        if &parsed != expected {
            problems.push(format!("{name}: parsed matrix differs from generated"));
        }
        let mut rewritten = Vec::new();
        write_csv(&parsed, &mut rewritten).unwrap();
        if rewritten != bytes[0] {
            problems.push(format!("{name}: rewrite not byte-identical"));
        }
    }

    let cs = path("case_study-a.csv");
    let bern = path("bernoulli-a.csv");
    let reruns: Vec<Vec<&str>> = vec![
        vec!["rank", &cs],
        vec!["rank", &cs, "--format", "csv"],
        vec!["rank", &bern, "--continuous", "--normalize", "minmax100"],
        vec!["simulate", "--scenario", "case_study", "--rank", "--out", &cs],
        vec!["baselines", &cs, "--irt", "both", "--seed", "3"],
        vec!["baselines", &cs, "--format", "csv"],
        vec!["robustness", &bern, "--k", "1,5", "--trials", "5", "--seed", "2"],
        vec!["robustness", &cs, "--exhaustive", "--format", "csv"],
        vec!["dataset-loo", &cs],
    ];
    for args in &reruns {
        let (c1, a) = bin(args);
        let (c2, b) = bin(args);
        if c1 != 0 || c1 != c2 || a != b || a.is_empty() {
            problems.push(format!("{}: rerun not byte-identical", args.join(" ")));
        }
    }
    // Bench reports wall-clock time; every other column must repeat.
    let strip = |bytes: Vec<u8>| -> Vec<String> {
        String::from_utf8(bytes)
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
            .collect()
    };
    let bench = ["bench", "--sizes", "3000x30,1500x30", "--format", "csv"];
    if strip(bin(&bench).1) != strip(bin(&bench).1) {
        problems.push("bench: non-timing columns differ".into());
    }
    verdict(
        problems.is_empty(),
        format!(
            "4 scenarios round-tripped, {} commands rerun; problems: {problems:?}",
            reruns.len() + 1
        ),
    )
}

/// Criteria that cannot hold as stated; each is still evaluated in full.
const KNOWN_UNATTAINABLE: [(usize, &str); 2] = [
    (5, "M=10 pools need more sweeps than M=100 at alpha >= 0.4; the subdominant eigenvalue shrinks with M"),
    (9, "dropping a duplicate column changes S(q) for every question the pair solved, so transitions are not a rescaling"),
];

type Criterion = (usize, &'static str, fn() -> Verdict);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 12] = [
        (1, "case-study ordering", c1_case_study_ordering),
        (2, "tier separation", c2_tier_separation),
        (3, "oracle equivalence", c3_oracle_equivalence),
        (4, "fixed-point residual", c4_fixed_point_residual),
        (5, "geometric convergence", c5_geometric_convergence),
        (6, "scalability", c6_scalability),
        (7, "binary/continuous consistency", c7_binary_continuous),
        (8, "robustness to model removal", c8_robustness),
        (9, "duplicate-model exactness", c9_duplicate_model),
        (10, "IRT recovery", c10_irt),
        (11, "statistics oracles", c11_statistics),
        (12, "CLI round trip and determinism", c12_cli_round_trip),
    ];
    let mut failed = BTreeSet::new();
    for (n, name, check) in criteria {
        let v = check();
        let note = KNOWN_UNATTAINABLE
            .iter()
            .find(|(k, _)| *k == n && !v.pass)
            .map(|(_, why)| format!(" [known: {why}]"))
            .unwrap_or_default();
        println!(
            "criterion {n:>2} {} {name}: {}{note}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.insert(n);
        }
    }
    let known: BTreeSet<usize> = KNOWN_UNATTAINABLE.iter().map(|(k, _)| *k).collect();
    println!("{} of 12 criteria pass", 12 - failed.len());
    assert_eq!(failed, known, "failing criteria differ from the known-unattainable set");
}
