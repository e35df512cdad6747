use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ggrf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ggrf"))
        .args(args)
        .env_remove("GGRF_THREADS")
        .output()
        .expect("binary runs")
}

fn json_of(args: &[&str]) -> Value {
    let out = ggrf(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn estimate_reports_inputs_seed_and_error() {
    let doc = json_of(&[
        "estimate", "--graph", "karate", "--walks", "8", "--seed", "3",
    ]);
    assert_eq!(doc["command"], "estimate");
    assert_eq!(doc["seed"], 3);
    assert_eq!(doc["version"], ggrf_cli::VERSION);
    assert_eq!(doc["inputs"]["walks"], 8);
    assert_eq!(doc["metrics"]["nodes"], 34);
    let err = doc["metrics"]["relative_frobenius_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 1.0, "{err}");
    assert!(doc.get("timing_seconds").is_some());
}

#[test]
fn inverse_cosine_uses_the_iterative_modulation() {
    let doc = json_of(&[
        "estimate",
        "--graph",
        "karate",
        "--kernel",
        "inverse-cosine",
        "--no-timing",
    ]);
    assert_eq!(doc["metrics"]["modulation"], "iterative");
    assert!(doc.get("timing_seconds").is_none());
    let doc = json_of(&[
        "estimate",
        "--graph",
        "karate",
        "--kernel",
        "diffusion",
        "--no-timing",
    ]);
    assert_eq!(doc["metrics"]["modulation"], "closed-form");
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    for cmd in [
        ["estimate", "--graph", "lesmis"],
        ["cluster", "--graph", "karate"],
        ["ode", "--graph", "karate"],
    ] {
        let run = |t: &str| {
            ggrf(
                &[
                    &cmd[..],
                    &[
                        "--walks",
                        "16",
                        "--seed",
                        "11",
                        "--threads",
                        t,
                        "--no-timing",
                    ],
                ]
                .concat(),
            )
            .stdout
        };
        let one = run("1");
        assert!(!one.is_empty());
        assert_eq!(one, run("4"), "{cmd:?}");
        assert_eq!(one, run("1"), "{cmd:?}");
    }
}

#[test]
fn exit_codes_distinguish_usage_and_numerical_failures() {
    assert_eq!(
        ggrf(&["estimate", "--graph", "/no/such/file"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        ggrf(&["estimate", "--graph", "karate", "--bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        ggrf(&["estimate", "--graph", "karate", "--threads", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(ggrf(&["--help"]).status.code(), Some(0));
    // The regularised Laplacian series diverges on the raw karate adjacency.
    let out = ggrf(&[
        "estimate",
        "--graph",
        "karate",
        "--kernel",
        "d-reg",
        "--matrix",
        "adjacency",
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generated_graph_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("tree.txt");
    let doc = json_of(&[
        "gen-graph",
        "--family",
        "tree",
        "--nodes",
        "15",
        "--out",
        path(&edges),
    ]);
    assert_eq!(doc["metrics"]["nodes"], 15);
    assert_eq!(doc["metrics"]["undirected_edges"], 14);
    let doc = json_of(&["estimate", "--graph", path(&edges), "--walks", "4"]);
    assert_eq!(doc["metrics"]["nodes"], 15);
}

#[test]
fn torus_normals_feed_regression() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, normals) = (dir.path().join("torus.txt"), dir.path().join("normals.csv"));
    json_of(&[
        "gen-graph",
        "--family",
        "torus",
        "--rows",
        "8",
        "--cols",
        "10",
        "--out",
        path(&edges),
        "--normals-out",
        path(&normals),
    ]);
    let doc = json_of(&[
        "regress",
        "--graph",
        path(&edges),
        "--attrs",
        path(&normals),
        "--mask-fraction",
        "0.1",
    ]);
    let err = doc["metrics"]["angular_error"].as_f64().unwrap();
    assert!((0.0..0.5).contains(&err), "{err}");
    assert_eq!(doc["metrics"]["masked_nodes"].as_array().unwrap().len(), 8);
}

#[test]
fn learned_parameters_are_reusable() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    let trace = dir.path().join("trace.csv");
    let doc = json_of(&[
        "train-mod",
        "--torus",
        "6x8",
        "--epochs",
        "20",
        "--params-out",
        path(&params),
        "--trace-csv",
        path(&trace),
    ]);
    assert_eq!(doc["metrics"]["f1"].as_array().unwrap().len(), 11);
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 21);
    let doc = json_of(&["estimate", "--graph", "karate", "--learned", path(&params)]);
    assert_eq!(doc["metrics"]["modulation"], "learned");
}

#[test]
fn side_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let gram = dir.path().join("gram.csv");
    let labels = dir.path().join("labels.csv");
    let result = dir.path().join("result.json");
    json_of(&["estimate", "--graph", "karate", "--gram-csv", path(&gram)]);
    assert_eq!(std::fs::read_to_string(&gram).unwrap().lines().count(), 34);
    json_of(&[
        "cluster",
        "--graph",
        "karate",
        "--labels-csv",
        path(&labels),
    ]);
    assert!(labels.exists() && dir.path().join("labels.csv.exact").exists());
    let out = ggrf(&["ode", "--graph", "karate", "--output", path(&result)]);
    assert!(out.status.success() && out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(doc["command"], "ode");
}

#[test]
fn bench_sweep_reports_exponents() {
    let doc = json_of(&["bench", "--nodes", "40,80", "--degree", "4", "--walks", "4"]);
    assert_eq!(doc["metrics"]["rows"].as_array().unwrap().len(), 2);
    assert!(doc["metrics"]["grf_time_exponent"].is_number());
}
