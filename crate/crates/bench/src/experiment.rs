use std::fmt::Write as _;
use std::time::Instant;

use malnet_core::baseline::{apply, fit_threshold};
use malnet_core::graph::{barabasi_albert, load_edge_list, sample_induced_subgraph, watts_strogatz};
use malnet_core::loss::{build_matrices, decision_vector, expected_components, qp_form, LossMatrices};
use malnet_core::oracle::brute_force;
use malnet_core::pgd::{self, PgdConfig};
use malnet_core::relax::{randomized_round, round_projection, solve_qcqp};
use malnet_core::uncertainty::{
    load_probabilities, perturb, synthetic_assign, synthetic_probabilities, BetaParams, Configuration,
};
use malnet_core::{Graph, LossWeights, MaliciousnessModel, RngStream};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, GraphSpec, Method, ModelSpec};
use crate::report::{summarize, trends, Report, ReportKind, TrialRecord, ARTIFACT_VERSION, SCHEMA_VERSION};
use crate::{read_text, BenchError};

/// Stored losses must match a second evaluation route to this relative
/// tolerance.
pub const RECOMPUTE_TOL: f64 = 1e-10;
pub const TIMING_TRIALS: usize = 15;

/// Input read once and shared by all trials.
enum Source {
    Generated,
    Fixed(Graph),
    Subsample(Graph, usize),
}

struct LoadedModel {
    mu: Option<MaliciousnessModel>,
    labels: Option<Vec<u8>>,
}

/// One trial's network, ground truth and the two models.
struct Instance {
    graph: Graph,
    estimate: MaliciousnessModel,
    evaluation: MaliciousnessModel,
    training: Result<Vec<(f64, u8)>, String>,
    stream: RngStream,
}

fn trial_seed(master: u64, trial: usize) -> u64 {
    RngStream::new(master).split(trial as u64).next_u64()
}

fn method_seed(stream: &RngStream, method: Method) -> u64 {
    stream.split(10 + method.stream_index()).next_u64()
}

fn noise_seed(stream: &RngStream) -> u64 {
    stream.split(4).next_u64()
}

fn load_source(spec: &GraphSpec) -> Result<Source, BenchError> {
    Ok(match spec {
        GraphSpec::BarabasiAlbert { .. } | GraphSpec::WattsStrogatz { .. } => Source::Generated,
        GraphSpec::EdgeList { path } => Source::Fixed(load_edge_list(&read_text(path)?)?),
        GraphSpec::InducedSubgraph { path, size } => Source::Subsample(load_edge_list(&read_text(path)?)?, *size),
    })
}

fn load_model(spec: &ModelSpec) -> Result<LoadedModel, BenchError> {
    Ok(match spec {
        ModelSpec::Synthetic { .. } => LoadedModel { mu: None, labels: None },
        ModelSpec::Csv { path } => {
            let table = load_probabilities(&read_text(path)?)?;
            LoadedModel {
                mu: Some(MaliciousnessModel::independent(table.mu)?),
                labels: table.labels,
            }
        }
    })
}

/// Labelled scores for fitting the threshold baseline: `⌊frac·T⌋`
/// malicious samples, all scores drawn from the estimate distributions.
fn training_set(
    frac: f64,
    benign: BetaParams,
    malicious: BetaParams,
    size: usize,
    stream: RngStream,
) -> malnet_core::Result<Vec<(f64, u8)>> {
    let positives = ((frac * size as f64) + 1e-9).floor() as usize;
    let labels: Vec<u8> = (0..size).map(|i| u8::from(i < positives)).collect();
    let truth = Configuration::new(labels.clone())?;
    let model = synthetic_probabilities(&truth, benign, malicious, stream)?;
    Ok(model.mu().iter().copied().zip(labels).collect())
}

fn build_instance(
    cfg: &ExperimentConfig,
    source: &Source,
    loaded: &LoadedModel,
    trial: usize,
) -> Result<Instance, BenchError> {
    let stream = RngStream::new(trial_seed(cfg.master_seed, trial));
    let graph_seed = stream.split(0).next_u64();
    let graph = match (source, &cfg.graph) {
        (Source::Fixed(g), _) => g.clone(),
        (Source::Subsample(g, size), _) => sample_induced_subgraph(g, *size, graph_seed)?.0,
        (Source::Generated, GraphSpec::BarabasiAlbert { n, m }) => barabasi_albert(*n, *m, graph_seed)?,
        (Source::Generated, GraphSpec::WattsStrogatz { n, k, p }) => watts_strogatz(*n, *k, *p, graph_seed)?,
        (Source::Generated, _) => unreachable!("file-backed specs are loaded up front"),
    };
    match &cfg.model {
        ModelSpec::Synthetic {
            malicious_frac,
            benign,
            malicious,
            eval_benign,
            eval_malicious,
        } => {
            let (estimate, truth) =
                synthetic_assign(&graph, *malicious_frac, *benign, *malicious, stream.split(1).next_u64())?;
            let evaluation = synthetic_probabilities(&truth, *eval_benign, *eval_malicious, stream.split(2))?;
            let training = training_set(
                *malicious_frac,
                *benign,
                *malicious,
                cfg.baseline.training_samples,
                stream.split(3),
            )
            .map_err(|e| e.to_string());
            Ok(Instance {
                graph,
                estimate,
                evaluation,
                training,
                stream,
            })
        }
        ModelSpec::Csv { .. } => {
            let model = loaded.mu.clone().expect("csv model is loaded up front");
            if model.n() != graph.n() {
                return Err(BenchError::Config(format!(
                    "probability table has {} nodes but the graph has {}",
                    model.n(),
                    graph.n()
                )));
            }
            let training = match &loaded.labels {
                Some(labels) => Ok(model.mu().iter().copied().zip(labels.iter().copied()).collect()),
                None => Err("baseline needs a label column in the probability table".to_string()),
            };
            Ok(Instance {
                graph,
                estimate: model.clone(),
                evaluation: model,
                training,
                stream,
            })
        }
    }
}

struct Solved {
    decision: Vec<u8>,
    lower_bound: Option<f64>,
    iterations: Option<usize>,
}

fn solve(
    cfg: &ExperimentConfig,
    inst: &Instance,
    est: &MaliciousnessModel,
    mats: &LossMatrices,
    w: &LossWeights,
    method: Method,
    seed: u64,
) -> Result<Solved, String> {
    let core = |e: malnet_core::Error| e.to_string();
    Ok(match method {
        Method::Pgd => {
            let sol = pgd::solve(mats, w, &cfg.pgd, seed).map_err(core)?;
            Solved {
                decision: sol.decision,
                lower_bound: None,
                iterations: Some(sol.iterations),
            }
        }
        Method::Relax | Method::RelaxRandomized => {
            let trs = solve_qcqp(&qp_form(mats, w)).map_err(core)?;
            let rounded = if method == Method::Relax {
                round_projection(&trs.s_star, mats, w)
            } else {
                randomized_round(&trs.s_star, mats, w, cfg.rounding_samples, seed)
            }
            .map_err(core)?;
            Solved {
                decision: rounded.s,
                lower_bound: Some(trs.lower_bound),
                iterations: None,
            }
        }
        Method::Exact => Solved {
            decision: brute_force(mats, w).map_err(core)?.s_opt,
            lower_bound: None,
            iterations: None,
        },
        Method::Baseline => {
            let training = inst.training.as_ref().map_err(Clone::clone)?;
            let rule = fit_threshold(training, cfg.baseline.alpha).map_err(core)?;
            Solved {
                decision: apply(&rule, est.mu()),
                lower_bound: None,
                iterations: None,
            }
        }
    })
}

/// Expected loss of `s` under the evaluation model, cross-checked against
/// the quadratic form.
fn evaluate(mats: &LossMatrices, w: &LossWeights, s: &[u8]) -> Result<(f64, [f64; 3]), String> {
    let sv = decision_vector(s);
    let comps = expected_components(mats, &sv).map_err(|e| e.to_string())?;
    let loss = w.alpha1 * comps[0] + w.alpha2 * comps[1] + w.alpha3 * comps[2];
    let via_qp = qp_form(mats, w).objective(&sv);
    if (via_qp - loss).abs() > RECOMPUTE_TOL * (1.0 + loss.abs()) {
        return Err(format!("loss {loss} disagrees with quadratic form {via_qp}"));
    }
    Ok((loss, comps))
}

fn decision_string(s: &[u8]) -> String {
    s.iter().map(|&x| if x == 1 { '1' } else { '0' }).collect()
}

fn run_trial(
    cfg: &ExperimentConfig,
    grid: &[LossWeights],
    source: &Source,
    loaded: &LoadedModel,
    trial: usize,
    sigmas: Option<&[f64]>,
) -> Result<Vec<TrialRecord>, BenchError> {
    let inst = build_instance(cfg, source, loaded, trial)?;
    let eval_mats = build_matrices(&inst.graph, &inst.evaluation)?;
    let levels: Vec<Option<f64>> = match sigmas {
        Some(s) => s.iter().map(|&x| Some(x)).collect(),
        None => vec![None],
    };
    let mut out = Vec::new();
    for sigma in levels {
        let estimate = match sigma {
            Some(s) => perturb(&inst.estimate, s, noise_seed(&inst.stream))?,
            None => inst.estimate.clone(),
        };
        let est_mats = build_matrices(&inst.graph, &estimate)?;
        for w in grid {
            for &method in &cfg.methods {
                let seed = method_seed(&inst.stream, method);
                let start = Instant::now();
                let solved = solve(cfg, &inst, &estimate, &est_mats, w, method, seed);
                let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                let mut rec = TrialRecord {
                    trial,
                    seed,
                    method,
                    setting: w.to_string(),
                    weights: [w.alpha1, w.alpha2, w.alpha3],
                    sigma,
                    loss: None,
                    components: None,
                    lower_bound: None,
                    iterations: None,
                    runtime_ms,
                    decision: None,
                    error: None,
                };
                match solved.and_then(|s| evaluate(&eval_mats, w, &s.decision).map(|e| (s, e))) {
                    Ok((s, (loss, comps))) => {
                        rec.loss = Some(loss);
                        rec.components = Some(comps);
                        rec.lower_bound = s.lower_bound;
                        rec.iterations = s.iterations;
                        rec.decision = Some(decision_string(&s.decision));
                    }
                    Err(e) => rec.error = Some(e),
                }
                out.push(rec);
            }
        }
    }
    Ok(out)
}

fn run_all(cfg: &ExperimentConfig, sigmas: Option<&[f64]>) -> Result<Vec<TrialRecord>, BenchError> {
    cfg.validate()?;
    let grid = cfg.weight_grid()?;
    let source = load_source(&cfg.graph)?;
    let loaded = load_model(&cfg.model)?;
    let per_trial: Vec<Result<Vec<TrialRecord>, BenchError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &grid, &source, &loaded, t, sigmas))
        .collect();
    let mut records = Vec::new();
    for r in per_trial {
        records.extend(r?);
    }
    Ok(records)
}

/// Solves every trial with every method and weight triple on the estimated
/// model and scores the decisions under the evaluation model.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Report, BenchError> {
    let records = run_all(cfg, None)?;
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.into(),
        kind: ReportKind::Benchmark,
        config: cfg.clone(),
        summary: summarize(&records),
        records,
        trends: Vec::new(),
    })
}

/// Like [`run_benchmark`], with the estimated model perturbed at each
/// noise level in `cfg.noise_sigmas`. One noise draw per trial is scaled
/// by each level.
pub fn run_sensitivity(cfg: &ExperimentConfig) -> Result<Report, BenchError> {
    if cfg.noise_sigmas.is_empty() {
        return Err(BenchError::Config("sensitivity needs at least one noise level".into()));
    }
    let records = run_all(cfg, Some(&cfg.noise_sigmas))?;
    let summary = summarize(&records);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION.into(),
        kind: ReportKind::Sensitivity,
        config: cfg.clone(),
        trends: trends(&summary),
        summary,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub method: Method,
    pub mean_ms: Option<f64>,
    pub std_ms: Option<f64>,
    /// Total time over total iterations, for iterative methods.
    pub per_iteration_ms: Option<f64>,
    pub error: Option<String>,
}

/// Wall-clock per solve on `BA(n, 2)` graphs with default synthetic
/// probabilities and equal weights, `trials` runs per (size, method).
/// Runs sequentially.
pub fn run_timing(
    sizes: &[usize],
    methods: &[Method],
    master_seed: u64,
    trials: usize,
    pgd_cfg: &PgdConfig,
) -> Result<Vec<TimingRow>, BenchError> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::Config("sizes must be strictly ascending".into()));
    }
    if trials == 0 || methods.is_empty() {
        return Err(BenchError::Config("timing needs trials >= 1 and a method".into()));
    }
    let ModelSpec::Synthetic {
        malicious_frac,
        benign,
        malicious,
        ..
    } = ModelSpec::default()
    else {
        unreachable!("default model is synthetic")
    };
    let w = LossWeights::equal();
    let cfg = ExperimentConfig {
        graph: GraphSpec::BarabasiAlbert { n: 0, m: 2 },
        model: ModelSpec::default(),
        weights: Vec::new(),
        methods: methods.to_vec(),
        trials,
        master_seed,
        noise_sigmas: Vec::new(),
        output: None,
        pgd: pgd_cfg.clone(),
        rounding_samples: 32,
        baseline: Default::default(),
    };
    let mut rows = Vec::new();
    for &n in sizes {
        let mut instances = Vec::with_capacity(trials);
        for t in 0..trials {
            let stream = RngStream::new(trial_seed(master_seed, t)).split(n as u64);
            let graph = barabasi_albert(n, 2, stream.split(0).next_u64())?;
            let (estimate, _) = synthetic_assign(&graph, malicious_frac, benign, malicious, stream.split(1).next_u64())?;
            let training = training_set(malicious_frac, benign, malicious, 1000, stream.split(3)).map_err(|e| e.to_string());
            let mats = build_matrices(&graph, &estimate)?;
            instances.push((
                Instance {
                    graph,
                    evaluation: estimate.clone(),
                    estimate,
                    training,
                    stream,
                },
                mats,
            ));
        }
        for &method in methods {
            let mut times = Vec::with_capacity(trials);
            let mut iterations = 0usize;
            let mut error = None;
            for (inst, mats) in &instances {
                let seed = method_seed(&inst.stream, method);
                let start = Instant::now();
                let solved = solve(&cfg, inst, &inst.estimate, mats, &w, method, seed);
                let ms = start.elapsed().as_secs_f64() * 1e3;
                match solved {
                    Ok(s) => {
                        times.push(ms);
                        iterations += s.iterations.unwrap_or(0);
                    }
                    Err(e) => {
                        error = Some(e);
                        break;
                    }
                }
            }
            let row = if let Some(e) = error {
                TimingRow {
                    n,
                    method,
                    mean_ms: None,
                    std_ms: None,
                    per_iteration_ms: None,
                    error: Some(e),
                }
            } else {
                let total: f64 = times.iter().sum();
                let mean = total / times.len() as f64;
                let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len().max(2) - 1) as f64;
                TimingRow {
                    n,
                    method,
                    mean_ms: Some(mean),
                    std_ms: Some(var.sqrt()),
                    per_iteration_ms: (iterations > 0).then(|| total / iterations as f64),
                    error: None,
                }
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// `n,method,mean_ms,std_ms`; failed rows leave the timing cells empty.
pub fn timing_csv(rows: &[TimingRow]) -> String {
    let cell = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
    let mut out = String::from("n,method,mean_ms,std_ms\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, r.method, cell(r.mean_ms), cell(r.std_ms));
    }
    out
}
