use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use malnet_bench::{
    read_text, run_benchmark, run_sensitivity, run_timing, timing_csv, write_text, BenchError, ExperimentConfig,
    Method, Report, TIMING_TRIALS,
};
use malnet_core::baseline::{apply, fit_threshold};
use malnet_core::graph::{barabasi_albert, load_edge_list, watts_strogatz};
use malnet_core::loss::{build_matrices, decision_vector, expected_components, qp_form};
use malnet_core::oracle::brute_force;
use malnet_core::pgd::{self, PgdConfig};
use malnet_core::relax::{randomized_round, round_projection, solve_qcqp};
use malnet_core::uncertainty::{load_probabilities, synthetic_assign, write_probabilities, BetaParams};
use malnet_core::{Graph, LossWeights, MaliciousnessModel};
use serde_json::json;

#[derive(Parser)]
#[command(name = "malnet", version, about = "Remove probably-malicious nodes from a network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Ba,
    Ws,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random network and write it as an edge list.
    GenerateGraph {
        #[arg(long, value_enum, default_value = "ba")]
        kind: GraphKind,
        #[arg(long)]
        n: usize,
        /// Edges per new node (Barabási–Albert).
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Ring degree (Watts–Strogatz).
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Rewiring probability (Watts–Strogatz).
        #[arg(long, default_value_t = 0.1)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw synthetic maliciousness probabilities with ground-truth labels.
    MakeModel {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        malicious_frac: f64,
        /// Beta parameters `a,b` for benign scores.
        #[arg(long, default_value = "1,9")]
        benign: String,
        /// Beta parameters `a,b` for malicious scores.
        #[arg(long, default_value = "9,1")]
        malicious: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a removal decision.
    Solve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        probs: PathBuf,
        #[arg(long, default_value = "1/3,1/3,1/3")]
        weights: String,
        #[arg(long, default_value = "relax")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Labelled CSV for fitting the baseline; defaults to `--probs`.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        baseline_alpha: f64,
        #[arg(long, default_value_t = 32)]
        rounding_samples: usize,
        /// Write the gradient-descent trace CSV here (pgd only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the relaxation solution JSON here (relax methods only).
        #[arg(long)]
        relaxation: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a removal decision under a model.
    Evaluate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        probs: PathBuf,
        #[arg(long, default_value = "1/3,1/3,1/3")]
        weights: String,
        /// Decision as a `0`/`1` string, or a path to a file holding one.
        #[arg(long)]
        decision: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a multi-trial benchmark from a JSON configuration.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configuration's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Box-plot CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the benchmark across the configured noise levels.
    Sensitivity {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time each method across network sizes.
    Timing {
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "pgd,relax")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = TIMING_TRIALS)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), BenchError> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_beta(text: &str) -> Result<BetaParams, BenchError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parsed: Vec<f64> = parts.iter().filter_map(|p| p.parse().ok()).collect();
    match parsed.as_slice() {
        [a, b] if parts.len() == 2 => Ok(BetaParams::new(*a, *b)),
        _ => Err(BenchError::Config(format!("expected Beta parameters `a,b`, got {text:?}"))),
    }
}

fn load_graph(path: &Path) -> Result<Graph, BenchError> {
    Ok(load_edge_list(&read_text(path)?)?)
}

fn load_model(path: &Path, n: usize) -> Result<(MaliciousnessModel, Option<Vec<u8>>), BenchError> {
    let table = load_probabilities(&read_text(path)?)?;
    if table.mu.len() != n {
        return Err(BenchError::Config(format!(
            "{} lists {} nodes but the graph has {n}",
            path.display(),
            table.mu.len()
        )));
    }
    Ok((MaliciousnessModel::independent(table.mu)?, table.labels))
}

fn parse_decision(text: &str, n: usize) -> Result<Vec<u8>, BenchError> {
    let raw = if Path::new(text).is_file() {
        read_text(Path::new(text))?
    } else {
        text.to_string()
    };
    let s: Vec<u8> = raw
        .chars()
        .filter(|c| !c.is_whitespace() && *c != ',')
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(BenchError::Config(format!("decision contains {other:?}"))),
        })
        .collect::<Result<_, _>>()?;
    if s.len() != n {
        return Err(BenchError::Config(format!("decision has {} entries, graph has {n}", s.len())));
    }
    Ok(s)
}

fn decision_string(s: &[u8]) -> String {
    s.iter().map(|&x| if x == 1 { '1' } else { '0' }).collect()
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = ExperimentConfig::from_json(&read_text(path)?)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn write_report(report: &Report, out: Option<&Path>, csv: Option<&Path>) -> Result<(), BenchError> {
    emit(out, &report.to_json())?;
    if let Some(p) = csv {
        write_text(p, &report.boxplot_csv())?;
    }
    let failed: usize = report.summary.iter().map(|r| r.failed).sum();
    if failed > 0 {
        eprintln!("{failed} solves failed; see the `error` field of the records");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::GenerateGraph { kind, n, m, k, p, seed, out } => {
            let g = match kind {
                GraphKind::Ba => barabasi_albert(n, m, seed)?,
                GraphKind::Ws => watts_strogatz(n, k, p, seed)?,
            };
            emit(out.as_deref(), &g.to_edge_list())
        }
        Command::MakeModel {
            graph,
            malicious_frac,
            benign,
            malicious,
            seed,
            out,
        } => {
            let g = load_graph(&graph)?;
            let (model, truth) = synthetic_assign(&g, malicious_frac, parse_beta(&benign)?, parse_beta(&malicious)?, seed)?;
            emit(out.as_deref(), &write_probabilities(model.mu(), Some(truth.as_slice())))
        }
        Command::Solve {
            graph,
            probs,
            weights,
            method,
            seed,
            train,
            baseline_alpha,
            rounding_samples,
            trace,
            relaxation,
            out,
        } => {
            let g = load_graph(&graph)?;
            let (model, labels) = load_model(&probs, g.n())?;
            let w: LossWeights = weights.parse()?;
            let method: Method = method.parse()?;
            let mats = build_matrices(&g, &model)?;
            let mut extra = serde_json::Map::new();
            let decision = match method {
                Method::Pgd => {
                    let cfg = PgdConfig::default();
                    let outcome = pgd::run(&mats, &w, &cfg, seed)?;
                    if let Some(p) = &trace {
                        write_text(p, &outcome.trace.to_csv())?;
                    }
                    extra.insert("iterations".into(), json!(outcome.trace.total_iterations()));
                    extra.insert("relaxed_loss".into(), json!(outcome.trace.final_loss));
                    pgd::round_threshold(&outcome.best_relaxed, cfg.theta)
                }
                Method::Relax | Method::RelaxRandomized => {
                    let trs = solve_qcqp(&qp_form(&mats, &w))?;
                    if let Some(p) = &relaxation {
                        write_text(p, &trs.to_json())?;
                    }
                    extra.insert("lower_bound".into(), json!(trs.lower_bound));
                    let rounded = if method == Method::Relax {
                        round_projection(&trs.s_star, &mats, &w)?
                    } else {
                        randomized_round(&trs.s_star, &mats, &w, rounding_samples, seed)?
                    };
                    rounded.s
                }
                Method::Exact => {
                    let r = brute_force(&mats, &w)?;
                    extra.insert("tie_count".into(), json!(r.tie_count));
                    r.s_opt
                }
                Method::Baseline => {
                    let samples: Vec<(f64, u8)> = match &train {
                        Some(p) => {
                            let t = load_probabilities(&read_text(p)?)?;
                            let l = t.labels.ok_or_else(|| {
                                BenchError::Config(format!("{} has no label column", p.display()))
                            })?;
                            t.mu.iter().copied().zip(l).collect()
                        }
                        None => {
                            let l = labels.ok_or_else(|| {
                                BenchError::Config("baseline needs --train or a label column in --probs".into())
                            })?;
                            model.mu().iter().copied().zip(l).collect()
                        }
                    };
                    let rule = fit_threshold(&samples, baseline_alpha)?;
                    extra.insert("theta_star".into(), json!(rule.theta_star));
                    apply(&rule, model.mu())
                }
            };
            let comps = expected_components(&mats, &decision_vector(&decision))?;
            let loss = w.alpha1 * comps[0] + w.alpha2 * comps[1] + w.alpha3 * comps[2];
            let removed: Vec<usize> = (0..decision.len()).filter(|&i| decision[i] == 1).collect();
            let mut doc = json!({
                "method": method,
                "weights": [w.alpha1, w.alpha2, w.alpha3],
                "decision": decision_string(&decision),
                "removed": removed,
                "expected_loss": loss,
                "components": comps,
            });
            doc.as_object_mut().expect("object").extend(extra);
            emit(out.as_deref(), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))
        }
        Command::Evaluate {
            graph,
            probs,
            weights,
            decision,
            out,
        } => {
            let g = load_graph(&graph)?;
            let (model, _) = load_model(&probs, g.n())?;
            let w: LossWeights = weights.parse()?;
            let s = parse_decision(&decision, g.n())?;
            let mats = build_matrices(&g, &model)?;
            let comps = expected_components(&mats, &decision_vector(&s))?;
            let doc = json!({
                "expected_loss": w.alpha1 * comps[0] + w.alpha2 * comps[1] + w.alpha3 * comps[2],
                "components": comps,
                "removed": s.iter().filter(|&&x| x == 1).count(),
            });
            emit(out.as_deref(), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))
        }
        Command::Bench { config, seed, out, csv } => {
            let cfg = load_config(&config, seed)?;
            let out = out.or_else(|| cfg.output.clone());
            write_report(&run_benchmark(&cfg)?, out.as_deref(), csv.as_deref())
        }
        Command::Sensitivity { config, seed, out, csv } => {
            let cfg = load_config(&config, seed)?;
            let out = out.or_else(|| cfg.output.clone());
            write_report(&run_sensitivity(&cfg)?, out.as_deref(), csv.as_deref())
        }
        Command::Timing {
            sizes,
            methods,
            seed,
            trials,
            out,
        } => {
            let methods: Vec<Method> = methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
            let rows = run_timing(&sizes, &methods, seed, trials, &PgdConfig::default())?;
            for r in &rows {
                if let Some(e) = &r.error {
                    eprintln!("n={} {}: {e}", r.n, r.method);
                } else if let Some(per) = r.per_iteration_ms {
                    eprintln!("n={} {}: {per:.4} ms per iteration", r.n, r.method);
                }
            }
            emit(out.as_deref(), &timing_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
