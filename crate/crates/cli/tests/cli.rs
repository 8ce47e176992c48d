use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn mew(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mew")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn assert_success(o: &Output) {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
    assert!(o.stderr.is_empty(), "success wrote to stderr: {}", stderr(o));
}

fn write_json(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn graph(populations: &[f64], edges: &[(usize, usize)]) -> Value {
    let vertices: Vec<Value> = populations
        .iter()
        .enumerate()
        .map(|(i, p)| json!({ "id": format!("v{i}"), "population": p }))
        .collect();
    let edges: Vec<Value> = edges.iter().map(|(a, b)| json!([format!("v{a}"), format!("v{b}")])).collect();
    json!({ "vertices": vertices, "edges": edges })
}

fn cycle(n: usize) -> Value {
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    graph(&vec![1.0; n], &edges)
}

fn path_graph(n: usize) -> Value {
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    graph(&vec![1.0; n], &edges)
}

fn grid(rows: usize, cols: usize) -> Value {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    graph(&vec![1.0; rows * cols], &edges)
}

fn flat_energy() -> Value {
    json!({ "terms": [{ "observable": "constant_zero", "beta": 0.0, "center": 0.0 }] })
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

struct Fixture {
    dir: TempDir,
    graph: String,
    energy: String,
}

impl Fixture {
    fn new(g: Value) -> Self {
        let dir = TempDir::new().unwrap();
        let graph = write_json(dir.path(), "graph.json", &g);
        let energy = write_json(dir.path(), "energy.json", &flat_energy());
        Self { dir, graph, energy }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn out(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }

    fn run(&self, out: &str, steps: &str, seed: &str, extra: &[&str]) -> Output {
        let mut args = vec![
            "run", "--graph", &self.graph, "--districts", "2", "--epsilon", "0", "--steps", steps, "--seed", seed,
            "--energy", &self.energy, "--out", out,
        ];
        args.extend_from_slice(extra);
        mew(&args)
    }
}

#[test]
fn run_on_c4_writes_records_and_manifest() {
    let f = Fixture::new(cycle(4));
    let out = f.out("run");
    let o = f.run(&out, "200", "1", &["--chains", "2", "--record-assignments"]);
    assert_success(&o);
    for chain in ["chain_000.jsonl", "chain_001.jsonl"] {
        let records = lines(&f.path("run").join(chain));
        assert_eq!(records.len(), 200);
        assert_eq!(records[0]["schema_version"], 1);
        assert_eq!(records[0]["observables"]["cut_edges"], 2.0);
        let a = records[0]["assignment"].as_array().unwrap();
        assert_eq!(a.len(), 4);
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(f.path("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["config"]["command"], "run");
    assert_eq!(manifest["config"]["args"]["steps"], 200);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    let rate = manifest["acceptance_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(manifest["steps_per_second"].as_f64().unwrap() > 0.0);
    let graph_digest = manifest["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(graph_digest.len(), 64);
    assert!(!f.path("run/.manifest.json.tmp").exists());
}

#[test]
fn missing_required_flags_exit_2() {
    let f = Fixture::new(cycle(4));
    let out = f.out("run");
    let o = mew(&[
        "run", "--districts", "2", "--epsilon", "0", "--steps", "10", "--seed", "1", "--energy", &f.energy, "--out", &out,
    ]);
    assert_eq!(code(&o), 2);
    let o = mew(&[
        "run", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--steps", "10", "--energy", &f.energy, "--out",
        &out,
    ]);
    assert_eq!(code(&o), 2, "--seed is required");
    let o = f.run(&out, "10", "1", &["--mode", "sideways"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn invalid_values_exit_2_and_bad_inputs_exit_3() {
    let f = Fixture::new(cycle(4));
    let out = f.out("run");
    let o = mew(&[
        "run", "--graph", &f.graph, "--districts", "2", "--epsilon", "1.5", "--steps", "10", "--seed", "1", "--energy",
        &f.energy, "--out", &out,
    ]);
    assert_eq!(code(&o), 2);
    let o = f.run(&out, "10", "1", &["--record", "nonsense"]);
    assert_eq!(code(&o), 2);
    let missing = f.out("missing.json");
    let o = mew(&[
        "run", "--graph", &missing, "--districts", "2", "--epsilon", "0", "--steps", "10", "--seed", "1", "--energy",
        &f.energy, "--out", &out,
    ]);
    assert_eq!(code(&o), 3);
    let bad_energy = write_json(f.dir.path(), "bad_energy.json", &json!({ "terms": [] }));
    let o = mew(&[
        "run", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--steps", "10", "--seed", "1", "--energy",
        &bad_energy, "--out", &out,
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn infeasible_balance_exits_4() {
    // Three unit vertices cannot split into two parts of weight 1.5.
    let f = Fixture::new(cycle(3));
    let out = f.out("run");
    let o = f.run(&out, "10", "1", &["--init-attempts", "50"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("initialization"), "{}", stderr(&o));
    assert!(!f.path("run/manifest.json").exists());
}

#[test]
fn enumerate_counts_partitions() {
    let f = Fixture::new(cycle(4));
    let out = f.out("enum");
    let o = mew(&["enumerate", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--out", &out]);
    assert_success(&o);
    assert_eq!(stdout(&o).trim(), "2");
    let catalog = lines(&f.path("enum/catalog.jsonl"));
    assert_eq!(catalog.len(), 2);
    assert_eq!(catalog[0]["log_weight"], 0.0);

    let p4 = write_json(f.dir.path(), "p4.json", &path_graph(4));
    let o = mew(&["enumerate", "--graph", &p4, "--districts", "2", "--epsilon", "0", "--out", &out]);
    assert_success(&o);
    assert_eq!(stdout(&o).trim(), "1");

    // Lifted states of C4 with exact balance: 4 trees, each with one balanced edge.
    let o = mew(&["enumerate", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--out", &out, "--lifted"]);
    assert_success(&o);
    assert_eq!(stdout(&o).trim(), "4");
    let lifted = lines(&f.path("enum/lifted.jsonl"));
    assert_eq!(lifted[0]["tree"].as_array().unwrap().len(), 3);
    assert_eq!(lifted[0]["marked"].as_array().unwrap().len(), 1);
}

#[test]
fn enumerate_work_limit_exits_5() {
    let f = Fixture::new(grid(6, 6));
    let out = f.out("enum");
    let o = mew(&[
        "enumerate", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--out", &out, "--work-limit", "1000",
    ]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("--work-limit"));
}

#[test]
fn tree_count_on_c4_split() {
    let f = Fixture::new(cycle(4));
    let assignment = write_json(f.dir.path(), "assignment.json", &json!([0, 0, 1, 1]));
    let o = mew(&["tree-count", "--graph", &f.graph, "--assignment", &assignment]);
    assert_success(&o);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("part 0: ln_tau 0.000000000000"));
    assert!(lines[1].starts_with("part 1: ln_tau 0.000000000000"));
    let expected = format!("log10_tau {:.12}", 2f64.log10());
    assert!(lines[2].starts_with("quotient:") && lines[2].ends_with(&expected), "{}", lines[2]);
    assert!(lines[3].starts_with("total:") && lines[3].ends_with(&expected), "{}", lines[3]);

    let by_id = write_json(f.dir.path(), "by_id.json", &json!({ "v0": "a", "v1": "b", "v2": "b", "v3": "a" }));
    let o = mew(&["tree-count", "--graph", &f.graph, "--assignment", &by_id]);
    assert_success(&o);
    assert!(stdout(&o).lines().last().unwrap().ends_with(&expected));

    let split = write_json(f.dir.path(), "split.json", &json!([0, 1, 0, 1]));
    let o = mew(&["tree-count", "--graph", &f.graph, "--assignment", &split]);
    assert_eq!(code(&o), 3, "disconnected part is an input error");
}

#[test]
fn toy_tilt_prints_moments_and_prediction() {
    let o = mew(&["toy-tilt", "--lambda", "1", "--beta", "0.5", "--mu", "2", "--steps", "200000", "--seed", "7"]);
    assert_success(&o);
    let text = stdout(&o);
    assert!(text.contains("predicted_mean 1.000000"), "{text}");
    assert!(text.contains("predicted_variance 1.000000"), "{text}");
    let mean: f64 = text.split("mean ").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(mean.is_finite() && mean > 0.0);

    let o = mew(&[
        "toy-tilt", "--lambda", "0.5", "1", "2", "--beta", "0.5", "--mu", "2", "--steps", "20000", "--seed", "7",
    ]);
    assert_success(&o);
    assert!(stdout(&o).contains("predicted_slope -1.000000"));
    let o = mew(&["toy-tilt", "--lambda", "1", "--beta", "0.5", "--mu", "2"]);
    assert_eq!(code(&o), 2, "--seed is required");
}

#[test]
fn baseline_on_p4_is_the_middle_split() {
    let f = Fixture::new(path_graph(4));
    let out = f.out("base");
    let o = mew(&[
        "baseline", "--graph", &f.graph, "--epsilon", "0", "--samples", "50", "--seed", "3", "--out", &out,
        "--record-assignments",
    ]);
    assert_success(&o);
    let records = lines(&f.path("base/baseline.jsonl"));
    assert_eq!(records.len(), 50);
    for r in &records {
        assert_eq!(r["assignment"], json!([0, 0, 1, 1]));
        assert_eq!(r["observables"]["cut_edges"], 1.0);
    }
}

fn output_digests(manifest: &Path) -> Value {
    let m: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    m["outputs"].clone()
}

#[test]
fn rerun_from_manifest_reproduces_outputs() {
    let f = Fixture::new(grid(3, 3));
    let first = f.out("first");
    let o = mew(&[
        "run", "--graph", &f.graph, "--districts", "3", "--epsilon", "0", "--steps", "2000", "--seed", "11",
        "--energy", &f.energy, "--out", &first, "--chains", "3", "--record-assignments", "--threads", "2",
    ]);
    assert_success(&o);
    let second = f.out("second");
    let manifest = f.out("first/manifest.json");
    let o = mew(&["rerun", "--manifest", &manifest, "--out", &second]);
    assert_success(&o);
    for chain in ["chain_000.jsonl", "chain_001.jsonl", "chain_002.jsonl"] {
        let a = fs::read(f.path("first").join(chain)).unwrap();
        let b = fs::read(f.path("second").join(chain)).unwrap();
        assert_eq!(a, b, "{chain} differs");
    }
    assert_eq!(output_digests(&f.path("first/manifest.json")), output_digests(&f.path("second/manifest.json")));

    // Baseline reruns too.
    let base = f.out("base");
    let o = mew(&["baseline", "--graph", &f.graph, "--epsilon", "0.2", "--samples", "30", "--seed", "5", "--out", &base]);
    assert_success(&o);
    let again = f.out("base_again");
    let o = mew(&["rerun", "--manifest", &f.out("base/manifest.json"), "--out", &again]);
    assert_success(&o);
    assert_eq!(output_digests(&f.path("base/manifest.json")), output_digests(&f.path("base_again/manifest.json")));

    // A changed input is refused.
    fs::write(&f.energy, json!({ "special": "spanning_tree" }).to_string()).unwrap();
    let o = mew(&["rerun", "--manifest", &manifest, "--out", &f.out("third")]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("changed"));
}

#[test]
fn diagnose_identical_chains_is_a_zero_curve() {
    let f = Fixture::new(grid(2, 3));
    let out = f.out("run");
    assert_success(&f.run(&out, "3000", "2", &["--balance", "node"]));
    let chain = f.out("run/chain_000.jsonl");
    let diag = f.out("diag");
    let o = mew(&[
        "diagnose", "--chains", &chain, &chain, "--observable", "cut_edges", "--checkpoints", "1000,2000,3000", "--thin",
        "10", "--out", &diag,
    ]);
    assert_success(&o);
    let csv = fs::read_to_string(f.path("diag/ks_curve.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "schema_version,checkpoint,pairwise_mean");
    assert_eq!(rows.len(), 4);
    for row in &rows[1..] {
        assert_eq!(row.split(',').nth(2).unwrap().parse::<f64>().unwrap(), 0.0);
    }
    let json: Value = serde_json::from_str(&fs::read_to_string(f.path("diag/ks_curve.json")).unwrap()).unwrap();
    assert_eq!(json["checkpoints"], json!([1000, 2000, 3000]));

    // Two observables give the 2D statistic.
    let o = mew(&[
        "diagnose", "--chains", &chain, &chain, "--observable", "cut_edges", "--observable2", "constant_zero",
        "--checkpoints", "log:100:3000:4", "--out", &diag,
    ]);
    assert_success(&o);
}

#[test]
fn diagnose_against_exact_catalog() {
    // 2x3 grid, node balance, exact: cut edge counts differ between partitions.
    let f = Fixture::new(grid(2, 3));
    let out = f.out("run");
    assert_success(&f.run(&out, "20000", "9", &["--balance", "node", "--chains", "4"]));
    let cat = f.out("cat");
    let o = mew(&[
        "enumerate", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--balance", "node", "--out", &cat,
        "--energy", &f.energy,
    ]);
    assert_success(&o);
    let chains: Vec<String> = (0..4).map(|i| f.out(&format!("run/chain_{i:03}.jsonl"))).collect();
    let target = f.out("cat/catalog.jsonl");
    let diag = f.out("diag");
    let mut args = vec!["diagnose", "--chains"];
    args.extend(chains.iter().map(String::as_str));
    args.extend([
        "--observable", "cut_edges", "--target", &target, "--graph", &f.graph, "--checkpoints", "log:1000:20000:5",
        "--thin", "10", "--out", &diag,
    ]);
    let o = mew(&args);
    assert_success(&o);
    let json: Value = serde_json::from_str(&fs::read_to_string(f.path("diag/ks_curve.json")).unwrap()).unwrap();
    let target_curve: Vec<f64> =
        json["to_target_mean"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(target_curve.len(), 5);
    assert!(target_curve.iter().all(|d| (0.0..=1.0).contains(d)));
    assert!(*target_curve.last().unwrap() < 0.1, "{target_curve:?}");

    // Without --graph a catalog cannot be evaluated.
    let mut no_graph = args.clone();
    let at = no_graph.iter().position(|a| *a == "--graph").unwrap();
    no_graph.drain(at..at + 2);
    assert_eq!(code(&mew(&no_graph)), 2);
}

#[test]
fn diagnose_rejects_unknown_and_mismatched_observables() {
    let f = Fixture::new(cycle(4));
    let out = f.out("run");
    assert_success(&f.run(&out, "500", "4", &[]));
    let chain = f.out("run/chain_000.jsonl");
    let diag = f.out("diag");
    let o = mew(&[
        "diagnose", "--chains", &chain, &chain, "--observable", "polsby_popper", "--checkpoints", "100", "--out", &diag,
    ]);
    assert_eq!(code(&o), 2);

    let other = f.path("other.jsonl");
    let line = json!({ "schema_version": 1, "step": 1, "accepted": true, "observables": { "cut_edges": 2.0 } });
    fs::write(&other, format!("{line}\n").repeat(500)).unwrap();
    let other = other.to_str().unwrap();
    let o = mew(&[
        "diagnose", "--chains", &chain, other, "--observable", "cut_edges", "--checkpoints", "100", "--out", &diag,
    ]);
    assert_eq!(code(&o), 3);

    let o = mew(&[
        "diagnose", "--chains", &chain, &chain, "--observable", "cut_edges", "--checkpoints", "100000", "--out", &diag,
    ]);
    assert_eq!(code(&o), 3, "checkpoint beyond the data");
    let o = mew(&[
        "diagnose", "--chains", &chain, &chain, "--observable", "cut_edges", "--checkpoints", "log:1:x:3", "--out", &diag,
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_writes_a_grid() {
    let f = Fixture::new(grid(2, 3));
    let energy = write_json(
        f.dir.path(),
        "two_terms.json",
        &json!({ "terms": [
            { "observable": "cut_edges", "beta": 0.5, "center": 3.0 },
            { "observable": "constant_zero", "beta": 1.0, "center": 0.0 }
        ] }),
    );
    let out = f.out("sweep");
    let o = mew(&[
        "sweep", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--balance", "node", "--energy", &energy,
        "--out", &out, "--axis1", "0:2,4", "--axis2", "1:0,1", "--steps", "2000", "--seed", "1", "--chains", "2",
        "--thin", "10",
    ]);
    assert_success(&o);
    let csv = fs::read_to_string(f.path("sweep/sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "schema_version,cut_edges_center,constant_zero_center,mean_pairwise_ks");
    assert_eq!(rows.len(), 5);

    let o = mew(&[
        "sweep", "--graph", &f.graph, "--districts", "2", "--epsilon", "0", "--balance", "node", "--energy", &energy,
        "--out", &out, "--axis1", "0:2,4", "--axis2", "5:0,1", "--steps", "100", "--seed", "1",
    ]);
    assert_eq!(code(&o), 2, "term index out of range");
}
