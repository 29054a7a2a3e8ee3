//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cliquescat"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn generate(dir: &Path, count: usize) {
    run_ok(&[
        "generate",
        "--preset",
        "planted",
        "--count",
        &count.to_string(),
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ]);
}

#[test]
fn generate_writes_manifest_and_edge_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    generate(&data, 5);
    assert!(data.join("manifest.json").exists());
    let edges: Vec<_> = std::fs::read_dir(&data)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "edges")
        })
        .collect();
    assert_eq!(edges.len(), 5);
}

#[test]
fn train_evaluate_decode_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    generate(&data, 8);
    let ckpt = dir.path().join("ckpt.json");
    let stdout = run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--epochs",
        "25",
        "--seed",
        "7",
        "--beta",
        "1.0",
    ]);
    assert!(stdout.contains("checkpoint"));
    assert!(ckpt.exists());
    assert!(dir.path().join("ckpt.report.json").exists());

    let report = dir.path().join("report.csv");
    run_ok(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--kappa",
        "10",
        "--reference",
        "exact",
        "--out",
        report.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&report).unwrap();
    let header = csv
        .lines()
        .find(|l| !l.starts_with('#'))
        .expect("header row");
    assert_eq!(
        header,
        "method,instance_id,pred_size,ref_size,score,forward_s,decode_s"
    );
    let rows = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .count();
    assert_eq!(rows, 9); // header + 8 instances

    let decode_out = run_ok(&[
        "decode",
        "--graph",
        data.join("g0000.edges").to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--kappa",
        "10",
        "--tau",
        "32",
    ]);
    assert!(decode_out.contains("clique size"));
}

#[test]
fn features_and_oracle_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.edges");
    std::fs::write(&graph, "0 1\n1 2\n0 2\n2 3\n").unwrap();
    let csv = run_ok(&["features", "--graph", graph.to_str().unwrap()]);
    assert!(csv.starts_with("ecc,cc,logdeg\n"));
    assert_eq!(csv.lines().count(), 5);

    let exact = run_ok(&["oracle", "--graph", graph.to_str().unwrap()]);
    assert!(exact.contains("clique size 3"));
    let ls = run_ok(&[
        "oracle",
        "--graph",
        graph.to_str().unwrap(),
        "--local-search",
        "--eta1",
        "2",
        "--eta2",
        "10",
    ]);
    assert!(ls.contains("clique size 3"));
}

#[test]
fn benchmark_writes_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    generate(&data, 4);
    let ckpt = dir.path().join("ckpt.json");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--epochs",
        "5",
        "--seed",
        "1",
    ]);
    let table = dir.path().join("bench.csv");
    run_ok(&[
        "benchmark",
        "--data",
        data.to_str().unwrap(),
        "--methods",
        "hybrid,ls:2:20,exact",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.contains("method,mean_score,std_score,mean_s_per_graph"));
    assert!(csv.contains("hybrid,"));
    assert!(csv.contains("local-search(2,20),"));
    assert!(csv.lines().any(|l| l.starts_with("exact,1.000000")));
}

#[test]
fn train_accepts_key_value_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    generate(&data, 3);
    let cfg = dir.path().join("train.cfg");
    std::fs::write(&cfg, "# comment\nepochs=4\nlearning_rate=0.002\nbeta=0.5\nseed=3\n").unwrap();
    let ckpt = dir.path().join("ckpt.json");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ckpt.report.json")).unwrap())
            .unwrap();
    assert_eq!(report["train_config"]["epochs"], 4);
    assert_eq!(report["train_config"]["beta"], 0.5);

    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "nonsense=1\n").unwrap();
    let out = run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--config",
        bad.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}

#[test]
fn unknown_flags_exit_nonzero_with_usage() {
    let out = run(&["generate", "--bogus-flag"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage") || err.contains("--help"));

    let out = run(&["no-such-subcommand"]);
    assert!(!out.status.success());
}

#[test]
fn evaluate_reruns_reproduce_deterministic_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    generate(&data, 5);
    let ckpt = dir.path().join("ckpt.json");
    run_ok(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--epochs",
        "6",
        "--seed",
        "2",
    ]);
    let strip = |path: &Path| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split(',').take(5).collect::<Vec<_>>().join(","))
            .collect()
    };
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        run_ok(&[
            "evaluate",
            "--data",
            data.to_str().unwrap(),
            "--ckpt",
            ckpt.to_str().unwrap(),
            "--reference",
            "exact",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(strip(&a), strip(&b));
}
