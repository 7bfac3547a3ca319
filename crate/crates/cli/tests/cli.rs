mod common;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use recmarket::graph::generators;
use recmarket::{build_basic_scenario, InfluenceGraph, PreferenceMatrix, SupernodePolicy};

use common::{dense_gamma, dense_l, write_edge_list};

fn recmarket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recmarket")).args(args).output().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn graph(&self, name: &str, g: &InfluenceGraph) -> String {
        let p = self.path(name);
        write_edge_list(&p, g);
        p.to_str().unwrap().to_owned()
    }

    fn file(&self, name: &str, contents: &str) -> String {
        let p = self.path(name);
        std::fs::write(&p, contents).unwrap();
        p.to_str().unwrap().to_owned()
    }

    fn out(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// `label -> value` from a `user,label,value` CSV.
fn by_label(path: impl AsRef<Path>) -> HashMap<String, f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_owned(), f[2].parse().unwrap())
        })
        .collect()
}

fn assert_ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn analyze_clique_has_unit_distortion() {
    let fx = Fixture::new();
    let g = fx.graph("clique.txt", &generators::clique(100));
    let out = fx.out("out");
    assert_ok(&recmarket(&["analyze", "--graph", &g, "--out", &out]));
    let delta = json(fx.path("out/delta.json"));
    assert!((delta["delta"].as_f64().unwrap() - 1.0).abs() <= 1e-9, "{delta}");
    let gamma = by_label(fx.path("out/gamma.csv"));
    assert_eq!(gamma.len(), 100);
    assert!(gamma.values().all(|g| (g - 0.01).abs() <= 1e-10));
    let resolved = json(fx.path("out/config.resolved.json"));
    assert_eq!(resolved["command"], "analyze");
    assert_eq!(resolved["model"]["alpha"], 0.2);
}

#[test]
fn zero_alpha_gamma_is_rates() {
    let fx = Fixture::new();
    let g = fx.graph("g.txt", &generators::random_digraph_without_dangling(40, 0.1, 2));
    let out = fx.out("out");
    assert_ok(&recmarket(&["analyze", "--graph", &g, "--alpha", "0", "--out", &out]));
    let gamma = by_label(fx.path("out/gamma.csv"));
    assert!(gamma.values().all(|&g| g == 1.0 / 40.0));
}

#[test]
fn malformed_graph_is_a_usage_error() {
    let fx = Fixture::new();
    let g = fx.file("bad.txt", "0 1\n1 2\n2\n");
    let o = recmarket(&["analyze", "--graph", &g, "--out", &fx.out("out")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = recmarket(&["analyze", "--graph", &fx.out("missing.txt"), "--out", &fx.out("out")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_model_reports_violations() {
    let fx = Fixture::new();
    let g = fx.graph("g.txt", &generators::path(3));
    let model = fx.file(
        "model.json",
        &format!(r#"{{"graph_path": "{g}", "alpha": [0.0, 1.5, 0.2], "rates": [0.5, 0.5, 0.5]}}"#),
    );
    let o = recmarket(&["analyze", "--model", &model, "--out", &fx.out("out")]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha of user 1"), "{err}");
    assert!(err.contains("rates sum to 1.5"), "{err}");
}

#[test]
fn model_file_paths_are_relative() {
    let fx = Fixture::new();
    fx.graph("g.txt", &generators::path(4));
    let model = fx.file(
        "model.json",
        r#"{"graph_path": "g.txt", "products": 3, "preferences": {"family": "exponential", "mean": 0.5, "k": 2}, "seed": 7}"#,
    );
    assert_ok(&recmarket(&["analyze", "--model", &model, "--product", "2", "--out", &fx.out("out")]));
    let resolved = json(fx.path("out/config.resolved.json"));
    assert_eq!(resolved["model"]["products"], 3);
    assert_eq!(resolved["model"]["seed"], 7);
    assert_eq!(resolved["model"]["preferences"]["k"], 2.0);
    assert_eq!(resolved["product"], 2);
}

#[test]
fn simulate_fixed_past_flags_constant_gap() {
    let fx = Fixture::new();
    let n = 30;
    let g = fx.graph("g.txt", &generators::random_digraph_without_dangling(n, 0.1, 5));
    let model = fx.file(
        "model.json",
        &format!(
            r#"{{"graph_path": "{g}", "alpha": 0.5, "preferences": {}, "histories": {}}}"#,
            serde_json::to_string(&vec![vec![0.0, 1.0]; n]).unwrap(),
            serde_json::to_string(&vec![vec![0]; n]).unwrap()
        ),
    );
    let out = fx.out("out");
    assert_ok(&recmarket(&[
        "simulate", "--model", &model, "--rule", "fixed-past", "--steps", "20000", "--seeds", "2", "--out", &out,
    ]));
    let d = json(fx.path("out/diagnostics.json"));
    let flags: Vec<&str> = d["flags"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(flags.contains(&"non-converging to x_infinity: constant gap"), "{flags:?}");
    assert_eq!(d["final_sup_norm_x"], 1.0);

    let csv = std::fs::read_to_string(fx.path("out/trajectory.csv")).unwrap();
    assert!(csv.starts_with("# rule=fixed-past\n"));
    assert!(csv.contains("\nt,sup_norm_x,sup_norm_z,aggregate_share_0,aggregate_share_1\n"));
    // default sample_every = n; 20000 / 30 samples plus the final step
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 666 + 1);
}

#[test]
fn simulate_usage_errors() {
    let fx = Fixture::new();
    let g = fx.graph("g.txt", &generators::clique(5));
    for bad in [
        vec!["--steps", "0"],
        vec!["--seeds", "0"],
        vec!["--rule", "sometimes"],
        vec!["--rule", "always:4"],
        vec!["--product", "2"],
        vec!["--tail-fraction", "0"],
    ] {
        let mut args = vec!["simulate", "--graph", &g, "--steps", "10"];
        args.extend(bad.iter().copied());
        let out = fx.out("out");
        args.extend(["--out", &out]);
        let o = recmarket(&args);
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
}

#[test]
fn simulate_defaults_converge() {
    let fx = Fixture::new();
    let g = fx.graph("g.txt", &generators::random_digraph_without_dangling(100, 0.05, 21));
    let out = fx.out("out");
    assert_ok(&recmarket(&["simulate", "--graph", &g, "--seeds", "20", "--out", &out]));
    let d = json(fx.path("out/diagnostics.json"));
    assert_eq!(d["steps"], 1_000_000);
    assert_eq!(d["sample_every"], 100);
    let z = d["final_sup_norm_z"].as_f64().unwrap();
    assert!(z <= 0.05, "{z}");
    assert!(d["flags"].as_array().unwrap().is_empty());
}

#[test]
fn supernode_dominates_and_matches_dense_oracle() {
    let fx = Fixture::new();
    let base = generators::random_digraph_without_dangling(150, 0.04, 9);
    let g = fx.graph("g.txt", &base);
    let model = fx.file(
        "model.json",
        &format!(
            r#"{{"graph_path": "{g}", "preferences": {}}}"#,
            serde_json::to_string(&vec![vec![0.5, 0.5]; 150]).unwrap()
        ),
    );
    let out = fx.out("out");
    assert_ok(&recmarket(&["supernode", "--model", &model, "--out", &out]));
    let report = json(fx.path("out/supernode.json"));
    assert_eq!(report["supernode_is_max"], true);
    assert!(report["delta_before"].as_f64().unwrap() - 1.0 < 1e-9);
    assert!(report["delta_after"].as_f64().unwrap() > 1.0);

    // Same model through the library, solved densely. The edge list relabels
    // nodes, so compare by label.
    let parsed = recmarket::graph::parse_edge_list(std::fs::read(fx.path("g.txt")).unwrap().as_slice(), true, false)
        .unwrap();
    let prefs = PreferenceMatrix::from_rows(vec![vec![0.5, 0.5]; 150]).unwrap();
    let m = build_basic_scenario(&parsed.graph, 0.2, prefs, vec![vec![0]; 150]).unwrap();
    let (with, sup) = m.with_supernode(SupernodePolicy::UniformRenormalize, 0).unwrap();
    let with = with.with_uniform_alpha(0.2).unwrap();
    let dense = dense_gamma(&with, &dense_l(&with));
    let cli = by_label(fx.path("out/gamma.csv"));
    assert!((cli["supernode"] - dense[sup]).abs() <= 1e-9);
    for (u, label) in parsed.labels.iter().enumerate() {
        assert!((cli[label] - dense[u]).abs() <= 1e-9);
        assert!(dense[u] <= dense[sup]);
    }
}

#[test]
fn supernode_share_must_be_a_fraction() {
    let fx = Fixture::new();
    let g = fx.graph("g.txt", &generators::clique(4));
    for bad in ["fixed:0", "fixed:1", "fixed:1.5", "fixed:x", "loud"] {
        let o = recmarket(&["supernode", "--graph", &g, "--supernode-policy", bad, "--out", &fx.out("o")]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
    assert_ok(&recmarket(&["supernode", "--graph", &g, "--supernode-policy", "fixed:0.3", "--out", &fx.out("o")]));
    assert_eq!(json(fx.path("o/supernode.json"))["policy"], "fixed:0.3");
}

#[test]
fn rank_clique_and_star() {
    let fx = Fixture::new();
    let g = fx.graph("clique.txt", &generators::clique(30));
    assert_ok(&recmarket(&["rank", "--graph", &g, "--out", &fx.out("c")]));
    let gini = json(fx.path("c/inequality.json"))["gini"].as_f64().unwrap();
    assert!(gini.abs() <= 1e-12, "{gini}");
    let lorenz = std::fs::read_to_string(fx.path("c/lorenz.csv")).unwrap();
    assert_eq!(lorenz.lines().count(), 32);

    let g = fx.graph("star.txt", &generators::oriented_star(50));
    assert_ok(&recmarket(&["rank", "--graph", &g, "--top-k", "3", "--out", &fx.out("s")]));
    let ranks = std::fs::read_to_string(fx.path("s/ranks.csv")).unwrap();
    let rows: Vec<Vec<&str>> = ranks.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for table in ["by_outdegree", "by_gamma"] {
        let top = rows.iter().find(|r| r[0] == table && r[1] == "1").unwrap();
        // the centre is the first label in the file
        assert_eq!(top[3], "0", "{table}");
        assert_eq!((top[6], top[7]), ("1", "1"));
    }
    let classes = json(fx.path("s/classify.json"));
    assert_eq!(classes["by_tag"]["MANY_FOLLOWERS"], serde_json::json!([0]));
}

#[test]
fn rank_top_k_bounded_by_users() {
    let fx = Fixture::new();
    let g = fx.graph("g.txt", &generators::clique(5));
    let o = recmarket(&["rank", "--graph", &g, "--top-k", "6", "--out", &fx.out("o")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--top-k 6"));
}

#[test]
fn reruns_are_byte_identical() {
    let fx = Fixture::new();
    let g = fx.graph("g.txt", &generators::random_digraph_without_dangling(40, 0.1, 3));
    let run = |name: &str| {
        let out = fx.out(name);
        assert_ok(&recmarket(&[
            "simulate", "--graph", &g, "--rule", "superlinear:2", "--seeds", "3", "--steps", "30000", "--seed", "11",
            "--out", &out,
        ]));
        std::fs::read(fx.path(&format!("{name}/trajectory.csv"))).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}
