use std::path::Path;
use std::process::{Command, Output};

use qmc_core::graph::{parse_graph_file, write_graph, WeightedGraph};
use serde_json::Value;
use tempfile::tempdir;

fn qmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmc")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn certify_star_is_tight_and_passes() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("star.json");
    let o = qmc(&["certify", "--family", "star:5", "--tol", "1e-6", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["passed"], Value::Bool(true));
    assert!((r["sdp"]["objective"].as_f64().unwrap() - 12.0).abs() < 1e-3);
    let star = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "star_bounds").unwrap();
    let margin = star["margin"].as_f64().unwrap();
    assert!((-1e-5..1e-3).contains(&margin), "star margin {margin}");
}

#[test]
fn exact_rejects_thirteen_qubits() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("big.txt");
    std::fs::write(&path, "n 13\n0 1 1.0\n").unwrap();
    let o = qmc(&["exact", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn exact_reports_the_triangle() {
    let o = qmc(&["exact", "--family", "complete:3"]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["lambda_max"].as_f64().unwrap() - 6.0).abs() < 1e-9);
}

#[test]
fn malformed_input_exits_with_input_code() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("loop.txt");
    std::fs::write(&path, "# a loop\n0 1 1.0\n2 2 1.0\n").unwrap();
    let o = qmc(&["solve", path.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'), "line number reported");
    assert_eq!(code(&qmc(&["solve", "--family", "wheel:4"])), 2);
    assert_eq!(code(&qmc(&["round", "--family", "star:2", "--level", "1"])), 2);
}

#[test]
fn iteration_cap_exits_with_non_convergence() {
    let o = qmc(&["solve", "--family", "star:3", "--max-iter", "3"]);
    assert_eq!(code(&o), 3);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["converged"], Value::Bool(false));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = qmc(&[
            "round",
            "--family",
            "gnp:5:0.6",
            "--seed",
            "3",
            "--tol",
            "1e-6",
            "--samples",
            "64",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn solve_writes_trace() {
    let dir = tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = qmc(&["solve", "--family", "path:3", "--level", "1.5", "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(trace).unwrap();
    let rows = text.lines().count();
    assert!(rows > 1, "header plus rows");
}

#[test]
fn bench_emits_csv_and_json() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("bench.json");
    let o = qmc(&[
        "bench",
        "--family",
        "gnp:5:0.5",
        "--count",
        "2",
        "--tol",
        "1e-5",
        "--samples",
        "64",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let r = read_json(&out);
    assert_eq!(r["rows"].as_array().unwrap().len(), 2);
    assert!(r["min_best_vs_sdp"].as_f64().unwrap() >= r["guarantee"].as_f64().unwrap() - 1e-3);
}

#[test]
fn graph_file_round_trip() {
    let dir = tempdir().unwrap();
    for (k, g) in [
        WeightedGraph::gnp(7, 0.5, 4, false).unwrap(),
        WeightedGraph::cycle(5).unwrap(),
        WeightedGraph::new(4, []).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let a = dir.path().join(format!("g{k}.txt"));
        write_graph(&g, &a).unwrap();
        let back = parse_graph_file(&a).unwrap();
        assert_eq!(back, g);
        let b = dir.path().join(format!("h{k}.txt"));
        write_graph(&back, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn graph_file_without_trailing_newline() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("edge.txt");
    std::fs::write(&path, "0 1 1.0").unwrap();
    let g = parse_graph_file(&path).unwrap();
    assert_eq!(g.num_vertices(), 2);
    assert_eq!(g.edges().len(), 1);
}
