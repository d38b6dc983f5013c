//! End-to-end runs of the `malnet` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use malnet_bench::{parse_report, Method};
use malnet_core::graph::load_edge_list;
use malnet_core::loss::build_matrices;
use malnet_core::oracle::brute_force;
use malnet_core::uncertainty::load_probabilities;
use malnet_core::{LossWeights, MaliciousnessModel};
use serde_json::Value;

fn malnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_malnet")).args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = malnet(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const EDGES: &str = "n=8\n0 1\n0 2\n1 2\n2 3\n3 4\n4 5\n5 6\n6 7\n7 4\n";
const PROBS: &str = "id,p,label\n0,0.9,1\n1,0.2,0\n2,0.1,0\n3,0.7,1\n4,0.3,0\n5,0.05,0\n6,0.6,0\n7,0.15,0\n";

fn fixture(dir: &Path) -> (String, String) {
    let g = dir.join("g.txt");
    let p = dir.join("p.csv");
    fs::write(&g, EDGES).unwrap();
    fs::write(&p, PROBS).unwrap();
    (path(&g).to_string(), path(&p).to_string())
}

#[test]
fn exact_solve_reports_the_oracle_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let (g, p) = fixture(dir.path());
    let doc = ok_json(&["solve", "--graph", &g, "--probs", &p, "--weights", "0.2,0.7,0.1", "--method", "exact"]);

    let graph = load_edge_list(EDGES).unwrap();
    let model = MaliciousnessModel::independent(load_probabilities(PROBS).unwrap().mu).unwrap();
    let w = LossWeights::new(0.2, 0.7, 0.1).unwrap();
    let oracle = brute_force(&build_matrices(&graph, &model).unwrap(), &w).unwrap();
    let loss = doc["expected_loss"].as_f64().unwrap();
    assert!((loss - oracle.v_star).abs() <= 1e-12 * (1.0 + oracle.v_star.abs()), "{loss} vs {}", oracle.v_star);
    let expected: String = oracle.s_opt.iter().map(|&x| if x == 1 { '1' } else { '0' }).collect();
    assert_eq!(doc["decision"], expected.as_str());

    let eval = ok_json(&["evaluate", "--graph", &g, "--probs", &p, "--weights", "0.2,0.7,0.1", "--decision", &expected]);
    assert_eq!(eval["expected_loss"].as_f64().unwrap(), loss);
}

#[test]
fn every_method_solves_and_relax_bounds_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let (g, p) = fixture(dir.path());
    let exact = ok_json(&["solve", "--graph", &g, "--probs", &p, "--method", "exact"])["expected_loss"]
        .as_f64()
        .unwrap();
    for m in Method::ALL {
        let doc = ok_json(&["solve", "--graph", &g, "--probs", &p, "--method", m.name(), "--seed", "3"]);
        assert_eq!(doc["decision"].as_str().unwrap().len(), 8, "{m}");
        assert!(doc["expected_loss"].as_f64().unwrap() >= exact - 1e-12, "{m}");
        if m == Method::Relax {
            assert!(doc["lower_bound"].as_f64().unwrap() <= exact + 1e-9);
        }
    }
}

#[test]
fn solve_writes_trace_and_relaxation_files() {
    let dir = tempfile::tempdir().unwrap();
    let (g, p) = fixture(dir.path());
    let trace = dir.path().join("trace.csv");
    let relax = dir.path().join("relax.json");
    ok_json(&["solve", "--graph", &g, "--probs", &p, "--method", "pgd", "--trace", path(&trace)]);
    assert!(fs::read_to_string(&trace).unwrap().starts_with("restart,iter,step_norm,loss\n"));
    ok_json(&["solve", "--graph", &g, "--probs", &p, "--method", "relax", "--relaxation", path(&relax)]);
    let trs: Value = serde_json::from_str(&fs::read_to_string(&relax).unwrap()).unwrap();
    assert_eq!(trs["s_star"].as_array().unwrap().len(), 8);
}

#[test]
fn generated_inputs_feed_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("ba.txt");
    let p = dir.path().join("probs.csv");
    let gen = malnet(&["generate-graph", "--kind", "ws", "--n", "16", "--k", "4", "--seed", "2", "--out", path(&g)]);
    assert!(gen.status.success());
    let model = malnet(&["make-model", "--graph", path(&g), "--seed", "5", "--out", path(&p)]);
    assert!(model.status.success());
    assert_eq!(load_probabilities(&fs::read_to_string(&p).unwrap()).unwrap().mu.len(), 16);
    let doc = ok_json(&["solve", "--graph", path(&g), "--probs", path(&p), "--method", "baseline"]);
    assert!(doc["theta_star"].as_f64().is_some());
}

#[test]
fn bench_report_and_csv_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out = dir.path().join("report.json");
    let csv = dir.path().join("box.csv");
    fs::write(
        &cfg,
        r#"{"graph": {"kind": "barabasi_albert", "n": 12, "m": 2}, "methods": ["relax", "baseline"],
            "trials": 2, "master_seed": 1, "weights": [[0.2, 0.7, 0.1]], "noise_sigmas": [0.0, 0.2]}"#,
    )
    .unwrap();
    let run = malnet(&["bench", "--config", path(&cfg), "--seed", "4", "--out", path(&out), "--csv", path(&csv)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = parse_report(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.config.master_seed, 4);
    assert_eq!(report.records.len(), 4);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 5);

    let sens = malnet(&["sensitivity", "--config", path(&cfg), "--out", path(&out)]);
    assert!(sens.status.success());
    assert_eq!(parse_report(&fs::read_to_string(&out).unwrap()).unwrap().records.len(), 8);
}

#[test]
fn timing_prints_a_csv_row_per_cell() {
    let out = malnet(&["timing", "--sizes", "16,24", "--methods", "pgd,exact", "--trials", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("n,method,mean_ms,std_ms"));
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("24,exact,,\n"));
}

#[test]
fn invalid_input_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let (g, p) = fixture(dir.path());
    let bad_probs = dir.path().join("bad.csv");
    fs::write(&bad_probs, "id,p\n0,1.5\n").unwrap();
    let missing = dir.path().join("missing.txt");
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--graph", &g, "--probs", &p, "--weights", "1,1,1"],
        vec!["solve", "--graph", &g, "--probs", &p, "--method", "sdp"],
        vec!["solve", "--graph", &g, "--probs", path(&bad_probs)],
        vec!["solve", "--graph", path(&missing), "--probs", &p],
        vec!["evaluate", "--graph", &g, "--probs", &p, "--decision", "0101"],
    ];
    for args in cases {
        let out = malnet(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
}
