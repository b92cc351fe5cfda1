use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mixcg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixcg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = mixcg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn simulate_chain(dir: &Path, seed: &str) {
    let out = dir.to_str().unwrap();
    ok(&[
        "simulate", "--kind", "chain", "--p", "6", "--q", "3", "--edges", "8", "--n", "400",
        "--seed", seed, "--out", out,
    ]);
}

#[test]
fn simulate_writes_files_and_edge_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "simulate", "--kind", "chain", "--p", "90", "--q", "10", "--edges", "80", "--n", "100",
        "--seed", "7", "--out", out,
    ]);
    for f in [
        "data.csv",
        "schema.json",
        "truth_params.json",
        "truth_graph.json",
        "truth.dot",
        "simulate.provenance.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let graph = json(dir.path().join("truth_graph.json"));
    assert_eq!(graph["edges"].as_array().unwrap().len(), 80);
    let prov = json(dir.path().join("simulate.provenance.json"));
    assert_eq!(prov["config"]["seed"], 7);
    assert_eq!(prov["config"]["edges"], 80);
    assert!(prov["version"].is_string());
    let csv = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn zero_edges_give_an_empty_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&[
        "simulate",
        "--kind",
        "erdos-renyi",
        "--p",
        "4",
        "--q",
        "2",
        "--edges",
        "0",
        "--n",
        "20",
        "--out",
        out,
    ]);
    let graph = json(dir.path().join("truth_graph.json"));
    assert!(graph["edges"].as_array().unwrap().is_empty());
}

#[test]
fn same_seed_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_chain(a.path(), "3");
    simulate_chain(b.path(), "3");
    for f in [
        "data.csv",
        "schema.json",
        "truth_params.json",
        "truth_graph.json",
        "truth.dot",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn fit_then_eval_recovers_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    simulate_chain(dir.path(), "11");
    let data = dir.path().join("data.csv");
    let fit_dir = dir.path().join("fit");
    ok(&[
        "--threads",
        "2",
        "fit",
        "--data",
        data.to_str().unwrap(),
        "--out",
        fit_dir.to_str().unwrap(),
    ]);
    let est = json(fit_dir.join("estimates.json"));
    assert_eq!(est["grid"].as_array().unwrap().len(), 50);
    assert!(fit_dir.join("dot/rho_000.dot").exists());

    let eval_dir = dir.path().join("eval");
    ok(&[
        "eval",
        "--truth",
        dir.path().join("truth_params.json").to_str().unwrap(),
        "--estimates",
        fit_dir.join("estimates.json").to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    let roc = fs::read_to_string(eval_dir.join("roc.csv")).unwrap();
    assert!(roc.starts_with("rho,level,TP,FP,TPR,FPR"));
    // Some grid point finds every true edge with no false one.
    assert!(roc.lines().any(|l| l.contains(",edge,8,0,1,0")), "{roc}");
    let auc = json(eval_dir.join("auc.json"));
    assert!(auc["edge"].as_f64().unwrap() > 0.9);

    // A bare graph works as truth too.
    ok(&[
        "eval",
        "--truth",
        dir.path().join("truth_graph.json").to_str().unwrap(),
        "--estimates",
        fit_dir.join("estimates.json").to_str().unwrap(),
        "--fpr-cap",
        "0.1",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
}

#[test]
fn penalty_variants_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    simulate_chain(dir.path(), "5");
    let cfg = dir.path().join("fit.toml");
    fs::write(
        &cfg,
        format!(
            "data = {:?}\npenalty = \"regular\"\ngrid_len = 5\n",
            dir.path().join("data.csv").to_str().unwrap()
        ),
    )
    .unwrap();
    for (flag, expect) in [
        (None, "regular"),
        (Some("simple"), "simple"),
        (Some("weighted"), "weighted"),
    ] {
        let out = dir.path().join(format!("fit_{expect}"));
        let mut args = vec![
            "fit",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        if let Some(f) = flag {
            args.extend(["--penalty", f]);
        }
        ok(&args);
        let est = json(out.join("estimates.json"));
        assert_eq!(est["penalty"], expect);
        assert_eq!(est["grid"].as_array().unwrap().len(), 5);
        let prov = json(out.join("fit.provenance.json"));
        assert_eq!(prov["config"]["estimate"]["penalty"], expect);
    }
    let seq = dir.path().join("fit_seq");
    ok(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--sequential",
        "--out",
        seq.to_str().unwrap(),
    ]);
    assert_eq!(
        json(seq.join("estimates.json")),
        json(dir.path().join("fit_regular/estimates.json"))
    );
}

#[test]
fn stability_defaults_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate_chain(dir.path(), "2");
    let data = dir.path().join("data.csv");
    let out = dir.path().join("st");
    let style = dir.path().join("style.json");
    fs::write(&style, r#"{"colors": {"Z1": "red", "Y2": "lightblue"}}"#).unwrap();
    ok(&[
        "stability",
        "--data",
        data.to_str().unwrap(),
        "--rho-fraction",
        "0.1",
        "--subsamples",
        "10",
        "--node-style",
        style.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let res = json(out.join("stability.json"));
    assert_eq!(res["subsamples"], 10);
    assert_eq!(res["threshold"], 0.9);
    assert_eq!(res["subsampleSize"], 200);
    let dot = fs::read_to_string(out.join("stability.dot")).unwrap();
    assert!(dot.contains("Z1 [shape=circle, style=filled, fillcolor=\"red\"]"));
    assert!(dot.contains("Y2 [shape=square, style=filled, fillcolor=\"lightblue\"]"));

    let strict = dir.path().join("st1");
    ok(&[
        "stability",
        "--data",
        data.to_str().unwrap(),
        "--rho-fraction",
        "0.1",
        "--subsamples",
        "10",
        "--threshold",
        "1.0",
        "--out",
        strict.to_str().unwrap(),
    ]);
    let res1 = json(strict.join("stability.json"));
    for e in res1["edgeFrequency"].as_array().unwrap() {
        let kept = res1["keptEdges"].as_array().unwrap().contains(&e["edge"]);
        assert_eq!(kept, e["frequency"] == 1.0);
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // Missing required flag.
    assert_eq!(mixcg(&["simulate", "--p", "3"]).status.code(), Some(2));
    // Unknown flag (reported by the argument parser).
    assert_eq!(mixcg(&["fit", "--bogus"]).status.code(), Some(2));

    // Empty dataset: a header and no rows.
    simulate_chain(dir.path(), "1");
    let data = dir.path().join("data.csv");
    let header = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, header + "\n").unwrap();
    let schema = dir.path().join("schema.json");
    let out = mixcg(&[
        "fit",
        "--data",
        empty.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no rows"));

    // Bad value with row and column context.
    let mut text = fs::read_to_string(&data).unwrap();
    text = text.replacen("\n1,", "\n7,", 1).replacen("\n0,", "\n7,", 1);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, text).unwrap();
    let out = mixcg(&[
        "fit",
        "--data",
        bad.to_str().unwrap(),
        "--schema",
        schema.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column Z1"));

    // Unknown key in a config file.
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "nonsense = 1\n").unwrap();
    assert_eq!(
        mixcg(&["eval", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn runtime_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // The output directory sits under a regular file.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = blocker.join("sub");
    let res = mixcg(&[
        "simulate",
        "--p",
        "3",
        "--q",
        "1",
        "--edges",
        "2",
        "--n",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(1));
}
