use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::Parser;
use diffrank::analysis::{dataset_removal_study, leave_one_out_study, model_removal_study, DatasetRemoval, RobustnessReport};
use diffrank::baselines::{
    accuracy_scores, fit_irt, irt_ability_scores, simple_rank, simple_rank_model_scores,
    weighted_scores_with, BaselineError, IrtConfig, IrtModel,
};
use diffrank::matrix::ResponseKind;
use diffrank::scoring::rank_entries;
use diffrank::synth::{
    generate, generate_case_study, generate_pool_scenario, CaseStudySpec, Generator, PoolKind,
    SyntheticSpec,
};
use diffrank::{rank_matrix, rank_matrix_with, Normalization, ResponseMatrix, RunOptions};
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, EXIT_NOT_CONVERGED, EXIT_SUCCESS};
use crate::input::{read_matrix, write_csv, InputFormat};
use crate::output::*;

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code. Errors go to `stderr`.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { crate::error::EXIT_INPUT_ERROR } else { EXIT_SUCCESS };
        }
    };
    match run(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Rank(a) => cmd_rank(a, stdout),
        Command::Baselines(a) => cmd_baselines(a, stdout),
        Command::Robustness(a) => cmd_robustness(a, stdout),
        Command::DatasetLoo(a) => cmd_dataset_loo(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Bench(a) => cmd_bench(a, stdout),
    }
}

fn status(converged: bool) -> i32 {
    if converged {
        EXIT_SUCCESS
    } else {
        EXIT_NOT_CONVERGED
    }
}

/// Runs the full pipeline. Non-convergence is reported in the trace, not as
/// an error.
pub fn rank_report(m: &ResponseMatrix, opts: &RankOptions) -> Result<RunReport, CliError> {
    let cfg = opts.propagation.config()?;
    let run = rank_matrix_with(
        m,
        &cfg,
        RunOptions {
            kind: opts.continuous.then_some(ResponseKind::Continuous),
            record_timing: opts.timing,
        },
    )?;
    let models = run.model_report(opts.normalization)?;
    let questions = run.question_report(opts.normalization, &opts.tier_scheme())?;
    Ok(RunReport {
        version: REPORT_VERSION,
        config: ConfigEcho {
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
            max_iterations: cfg.max_iterations,
            normalization: opts.normalization,
            seed: opts.seed,
            tiers: [opts.tiers.0, opts.tiers.1],
            continuous: opts.continuous,
        },
        response_kind: run.kind,
        model_scores: models.entries.iter().map(ScoreEntry::from).collect(),
        question_scores: questions.entries.iter().map(ScoreEntry::from).collect(),
        filter: filter_summary(&run),
        convergence: ConvergenceSummary {
            converged: run.trace.converged,
            iterations: run.trace.iterations,
            deltas: run.trace.deltas.clone(),
        },
        timing: opts.timing.then(|| Timing {
            total_seconds: run.propagation_seconds,
            per_iteration_seconds: run.trace.per_iteration_seconds.clone().unwrap_or_default(),
        }),
    })
}

pub fn cmd_rank(a: &RankArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let m = read_matrix(&a.input.input, a.input.input_format)?;
    let report = rank_report(&m, &a.options)?;
    emit(&report.render(a.output.format)?, a.output.out.as_deref(), stdout)?;
    Ok(status(report.converged()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelScore {
    pub model_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodScores {
    pub method: String,
    /// Models in input order.
    pub scores: Vec<ModelScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrtSummary {
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionErrors {
    pub question_id: String,
    pub errors: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselinesConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub dataset_map: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselinesReport {
    pub version: u32,
    pub config: BaselinesConfig,
    pub methods: Vec<MethodScores>,
    pub irt_fits: Vec<IrtSummary>,
    pub simple_rank_questions: Vec<QuestionErrors>,
}

impl BaselinesReport {
    pub fn method(&self, name: &str) -> Option<&MethodScores> {
        self.methods.iter().find(|s| s.method == name)
    }

    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>, CliError> {
        if format == OutputFormat::Json {
            return Ok(to_json(self));
        }
        let mut header = vec!["model_id".to_string()];
        for s in &self.methods {
            header.push(format!("{}_score", s.method));
            header.push(format!("{}_rank", s.method));
        }
        let n = self.methods.first().map_or(0, |s| s.scores.len());
        let rows = (0..n)
            .map(|j| {
                let mut row = vec![self.methods[0].scores[j].model_id.clone()];
                for s in &self.methods {
                    row.push(s.scores[j].score.to_string());
                    row.push(s.scores[j].rank.to_string());
                }
                row
            })
            .collect();
        let questions = Table {
            header: ["question_id", "errors", "rank"].map(String::from).to_vec(),
            rows: self
                .simple_rank_questions
                .iter()
                .map(|q| vec![q.question_id.clone(), q.errors.to_string(), q.rank.to_string()])
                .collect(),
        };
        tables_to_csv(&[Table { header, rows }, questions])
    }
}

fn method(name: &str, ids: &[String], scores: &[f64]) -> MethodScores {
    ranked_method(name, ids, scores, rank_entries(scores))
}

/// IRT scores come from an iterative fit; differences below 1e-4 on the
/// 0-100 scale are optimizer noise and rank as ties.
fn fitted_method(name: &str, ids: &[String], scores: &[f64]) -> MethodScores {
    let coarse: Vec<f64> = scores.iter().map(|s| (s * 1e4).round() / 1e4).collect();
    ranked_method(name, ids, scores, rank_entries(&coarse))
}

fn ranked_method(name: &str, ids: &[String], scores: &[f64], ranks: Vec<usize>) -> MethodScores {
    MethodScores {
        method: name.to_string(),
        scores: ids
            .iter()
            .zip(scores)
            .zip(ranks)
            .map(|((id, &score), rank)| ModelScore {
                model_id: id.clone(),
                score,
                rank,
            })
            .collect(),
    }
}

pub fn baselines_report(m: &ResponseMatrix, a: &BaselinesArgs) -> Result<BaselinesReport, CliError> {
    let ids = m.model_ids();
    let mut methods = vec![method("accuracy", ids, &accuracy_scores(m))];

    if m.dataset_tags().iter().any(Option::is_some) {
        let renames: HashMap<&str, &str> = a
            .dataset_map
            .iter()
            .map(|(f, t)| (f.as_str(), t.as_str()))
            .collect();
        let tags = m
            .dataset_tags()
            .iter()
            .zip(m.question_ids())
            .map(|(tag, q)| {
                let tag = tag.as_deref().ok_or_else(|| BaselineError::MissingTags(q.clone()))?;
                Ok(renames.get(tag).copied().unwrap_or(tag))
            })
            .collect::<Result<Vec<&str>, BaselineError>>()?;
        methods.push(method("weighted", ids, &weighted_scores_with(m, &tags)?));
    }

    let sr = simple_rank(m)?;
    methods.push(method("simple_rank", ids, &simple_rank_model_scores(m)?));

    let cfg = a.propagation.config()?;
    let run = rank_matrix(m, &cfg)?;
    let report = run.model_report(Normalization::Max100)?;
    let rankllm: Vec<f64> = ids
        .iter()
        .map(|id| report.entry(id).map_or(0.0, |e| e.normalized_score))
        .collect();
    methods.push(method("rankllm", ids, &rankllm));

    let kinds: &[IrtModel] = match a.irt {
        IrtChoice::None => &[],
        IrtChoice::OnePl => &[IrtModel::OnePL],
        IrtChoice::TwoPl => &[IrtModel::TwoPL],
        IrtChoice::Both => &[IrtModel::OnePL, IrtModel::TwoPL],
    };
    let mut irt_fits = Vec::new();
    for &kind in kinds {
        let (name, irt_cfg) = match kind {
            IrtModel::OnePL => ("irt_1pl", IrtConfig::one_pl()),
            IrtModel::TwoPL => ("irt_2pl", IrtConfig::two_pl()),
        };
        let fit = fit_irt(m, &irt_cfg, a.seed)?;
        methods.push(fitted_method(name, ids, &irt_ability_scores(&fit)?));
        irt_fits.push(IrtSummary {
            method: name.to_string(),
            converged: fit.converged,
            iterations: fit.iterations,
            final_objective: fit.final_objective,
        });
    }

    let mut simple_rank_questions: Vec<QuestionErrors> = m
        .question_ids()
        .iter()
        .zip(&sr.error_counts)
        .zip(&sr.ranks)
        .map(|((q, &errors), &rank)| QuestionErrors {
            question_id: q.clone(),
            errors,
            rank,
        })
        .collect();
    simple_rank_questions.sort_by_key(|q| q.rank);

    Ok(BaselinesReport {
        version: REPORT_VERSION,
        config: BaselinesConfig {
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
            max_iterations: cfg.max_iterations,
            seed: a.seed,
            dataset_map: a.dataset_map.iter().map(|(f, t)| [f.clone(), t.clone()]).collect(),
        },
        methods,
        irt_fits,
        simple_rank_questions,
    })
}

pub fn cmd_baselines(a: &BaselinesArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let m = read_matrix(&a.input.input, a.input.input_format)?;
    let report = baselines_report(&m, a)?;
    emit(&report.render(a.output.format)?, a.output.out.as_deref(), stdout)?;
    Ok(EXIT_SUCCESS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessRow {
    pub k: usize,
    pub trials: usize,
    pub question_rho_mean: f64,
    pub question_rho_sd: f64,
    pub model_rho_mean: f64,
    pub model_rho_sd: f64,
    pub mean_questions_dropped: f64,
    pub mean_seconds: Option<f64>,
    pub time_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub k: usize,
    pub trial: usize,
    pub removed_models: Vec<String>,
    pub question_rho: f64,
    pub model_rho: f64,
    pub questions_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessDoc {
    pub version: u32,
    pub config: RobustnessConfig,
    pub models: usize,
    pub questions: usize,
    pub full_pool_seconds: Option<f64>,
    pub rows: Vec<RobustnessRow>,
    pub trials: Vec<TrialRow>,
}

impl RobustnessDoc {
    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>, CliError> {
        if format == OutputFormat::Json {
            return Ok(to_json(self));
        }
        let summary = Table {
            header: [
                "k",
                "trials",
                "question_rho_mean",
                "question_rho_sd",
                "model_rho_mean",
                "model_rho_sd",
                "mean_questions_dropped",
                "mean_seconds",
                "time_reduction_pct",
            ]
            .map(String::from)
            .to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.trials.to_string(),
                        r.question_rho_mean.to_string(),
                        r.question_rho_sd.to_string(),
                        r.model_rho_mean.to_string(),
                        r.model_rho_sd.to_string(),
                        r.mean_questions_dropped.to_string(),
                        opt(r.mean_seconds),
                        opt(r.time_reduction_pct),
                    ]
                })
                .collect(),
        };
        let trials = Table {
            header: ["k", "trial", "removed_models", "question_rho", "model_rho", "questions_dropped"]
                .map(String::from)
                .to_vec(),
            rows: self
                .trials
                .iter()
                .map(|t| {
                    vec![
                        t.k.to_string(),
                        t.trial.to_string(),
                        t.removed_models.join(";"),
                        t.question_rho.to_string(),
                        t.model_rho.to_string(),
                        t.questions_dropped.to_string(),
                    ]
                })
                .collect(),
        };
        tables_to_csv(&[summary, trials])
    }
}

pub fn robustness_doc(m: &ResponseMatrix, a: &RobustnessArgs) -> Result<RobustnessDoc, CliError> {
    let cfg = a.propagation.config()?;
    let reports: Vec<RobustnessReport> = if a.exhaustive {
        if a.k != [1] {
            return Err(CliError::Usage("--exhaustive leaves one model out at a time; drop --k".into()));
        }
        vec![leave_one_out_study(m, &cfg)?]
    } else {
        a.k.iter()
            .map(|&k| model_removal_study(m, k, a.trials, &cfg, a.seed))
            .collect::<Result<_, _>>()?
    };
    let full_seconds = if a.timing {
        Some(rank_matrix(m, &cfg)?.propagation_seconds)
    } else {
        None
    };
    let rows = reports
        .iter()
        .map(|r| RobustnessRow {
            k: r.k_removed,
            trials: r.trials,
            question_rho_mean: r.question_rho_mean,
            question_rho_sd: r.question_rho_sd,
            model_rho_mean: r.model_rho_mean,
            model_rho_sd: r.model_rho_sd,
            mean_questions_dropped: r.mean_questions_dropped,
            mean_seconds: full_seconds.map(|_| r.mean_seconds),
            time_reduction_pct: full_seconds
                .filter(|&full| full > 0.0)
                .map(|full| 100.0 * (1.0 - r.mean_seconds / full)),
        })
        .collect();
    let trials = reports
        .iter()
        .flat_map(|r| {
            r.per_trial.iter().enumerate().map(|(trial, t)| TrialRow {
                k: r.k_removed,
                trial,
                removed_models: t.removed_models.clone(),
                question_rho: t.question_rho,
                model_rho: t.model_rho,
                questions_dropped: t.questions_dropped,
            })
        })
        .collect();
    Ok(RobustnessDoc {
        version: REPORT_VERSION,
        config: RobustnessConfig {
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
            max_iterations: cfg.max_iterations,
            seed: a.seed,
            exhaustive: a.exhaustive,
        },
        models: m.n_models(),
        questions: m.n_questions(),
        full_pool_seconds: full_seconds,
        rows,
        trials,
    })
}

pub fn cmd_robustness(a: &RobustnessArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let m = read_matrix(&a.input.input, a.input.input_format)?;
    let doc = robustness_doc(&m, a)?;
    emit(&doc.render(a.output.format)?, a.output.out.as_deref(), stdout)?;
    Ok(EXIT_SUCCESS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetLooDoc {
    pub version: u32,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub datasets: Vec<DatasetRemoval>,
}

pub fn cmd_dataset_loo(a: &DatasetLooArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let m = read_matrix(&a.input.input, a.input.input_format)?;
    let cfg = a.propagation.config()?;
    let doc = DatasetLooDoc {
        version: REPORT_VERSION,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        max_iterations: cfg.max_iterations,
        datasets: dataset_removal_study(&m, &cfg)?,
    };
    let bytes = match a.output.format {
        OutputFormat::Json => to_json(&doc),
        OutputFormat::Csv => tables_to_csv(&[Table {
            header: ["dataset", "questions_removed", "model_rho"].map(String::from).to_vec(),
            rows: doc
                .datasets
                .iter()
                .map(|d| vec![d.dataset.clone(), d.questions_removed.to_string(), d.model_rho.to_string()])
                .collect(),
        }])?,
    };
    emit(&bytes, a.output.out.as_deref(), stdout)?;
    Ok(EXIT_SUCCESS)
}

pub fn simulate_matrix(a: &SimulateArgs) -> Result<ResponseMatrix, CliError> {
    let seed = a.options.seed;
    let fixed = |what: &str| CliError::Usage(format!("--{what} does not apply to this scenario"));
    Ok(match a.scenario {
        Scenario::CaseStudy => {
            if a.q.is_some() {
                return Err(fixed("q"));
            }
            if a.m.is_some() {
                return Err(fixed("m"));
            }
            generate_case_study(&CaseStudySpec::with_seed(seed))?
        }
        Scenario::Bernoulli | Scenario::Rasch => {
            let rasch = a.scenario == Scenario::Rasch;
            generate(&SyntheticSpec {
                q: a.q.unwrap_or(if rasch { 200 } else { 1000 }),
                m: a.m.unwrap_or(if rasch { 10 } else { 20 }),
                density: a.density,
                seed,
                generator: if rasch { Generator::Rasch } else { Generator::Bernoulli },
            })?
        }
        Scenario::Pools => {
            if a.m.is_some() {
                return Err(fixed("m"));
            }
            let kind = match a.pool {
                PoolChoice::HomogeneousStrong => PoolKind::HomogeneousStrong,
                PoolChoice::HomogeneousWeak => PoolKind::HomogeneousWeak,
                PoolChoice::Mixed => PoolKind::Mixed,
            };
            generate_pool_scenario(kind, a.q.unwrap_or(1000), seed)?
        }
    })
}

pub fn cmd_simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    if a.rank && a.out.is_none() {
        return Err(CliError::Usage("--rank needs --out for the matrix file".into()));
    }
    let m = simulate_matrix(a)?;
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut w = BufWriter::new(file);
            write_csv(&m, &mut w)?;
            w.flush().map_err(|e| CliError::io(path, e))?;
        }
        None => {
            write_csv(&m, &mut *stdout)?;
        }
    }
    drop(m);
    match (&a.out, a.rank) {
        (Some(path), true) => rank_file(path, &a.options, a.format, stdout),
        _ => Ok(EXIT_SUCCESS),
    }
}

fn rank_file(
    path: &Path,
    opts: &RankOptions,
    format: OutputFormat,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let m = read_matrix(path, Some(InputFormat::Csv))?;
    let report = rank_report(&m, opts)?;
    emit(&report.render(format)?, None, stdout)?;
    Ok(status(report.converged()))
}

/// Rough peak footprint of ranking a `q × m` binary matrix: the bit-packed
/// matrix and its filtered copy, four-byte column indices for every cell
/// across both operators, and per-question ids and bookkeeping.
pub fn estimate_bench_bytes(q: usize, m: usize) -> u64 {
    let (q, m) = (q as u64, m as u64);
    let words = m.div_ceil(64);
    2 * q * words * 8 + 4 * q * m + 256 * q + 64 * m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub q: usize,
    pub m: usize,
    pub cells: u64,
    pub iterations: usize,
    pub converged: bool,
    pub total_seconds: f64,
    pub avg_seconds_per_iteration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchDoc {
    pub version: u32,
    pub alpha: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub density: f64,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}

impl BenchDoc {
    pub fn render(&self, format: OutputFormat) -> Result<Vec<u8>, CliError> {
        if format == OutputFormat::Json {
            return Ok(to_json(self));
        }
        tables_to_csv(&[Table {
            header: ["q", "m", "cells", "iterations", "converged", "total_seconds", "avg_seconds_per_iteration"]
                .map(String::from)
                .to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.q.to_string(),
                        r.m.to_string(),
                        r.cells.to_string(),
                        r.iterations.to_string(),
                        r.converged.to_string(),
                        r.total_seconds.to_string(),
                        r.avg_seconds_per_iteration.to_string(),
                    ]
                })
                .collect(),
        }])
    }
}

pub fn bench_doc(a: &BenchArgs) -> Result<BenchDoc, CliError> {
    let cfg = diffrank::PropagationConfig::new(a.alpha, a.tolerance, a.max_iters)?;
    let cap_bytes = (a.memory_cap_gib * (1u64 << 30) as f64) as u64;
    for &(q, m) in &a.sizes {
        let estimate_bytes = estimate_bench_bytes(q, m);
        if estimate_bytes > cap_bytes {
            return Err(CliError::OutOfMemoryGuard {
                q,
                m,
                estimate_bytes,
                cap_bytes,
            });
        }
    }
    let mut rows = Vec::with_capacity(a.sizes.len());
    for &(q, m) in &a.sizes {
        let matrix = generate(&SyntheticSpec {
            q,
            m,
            density: a.density,
            seed: a.seed,
            generator: Generator::Bernoulli,
        })?;
        let run = rank_matrix_with(&matrix, &cfg, RunOptions::default())?;
        drop(matrix);
        let iterations = run.trace.iterations;
        rows.push(BenchRow {
            q,
            m,
            cells: q as u64 * m as u64,
            iterations,
            converged: run.trace.converged,
            total_seconds: run.propagation_seconds,
            avg_seconds_per_iteration: run.propagation_seconds / iterations.max(1) as f64,
        });
    }
    Ok(BenchDoc {
        version: REPORT_VERSION,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        max_iterations: cfg.max_iterations,
        density: a.density,
        seed: a.seed,
        rows,
    })
}

pub fn cmd_bench(a: &BenchArgs, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let doc = bench_doc(a)?;
    emit(&doc.render(a.output.format)?, a.output.out.as_deref(), stdout)?;
    Ok(status(doc.rows.iter().all(|r| r.converged)))
}
