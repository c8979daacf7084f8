use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use blocked_bandits::harness::Algorithm;
use serde_json::Value;

fn bbandit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbandit"))
        .args(args)
        .current_dir(dir)
        .env_remove("BB_THREADS")
        .output()
        .expect("binary runs")
}

fn error_line(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 1, "stderr: {text}");
    serde_json::from_str(lines[0]).expect("machine-parsable error")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "dataset",
            "algorithm",
            "seed",
            "t",
            "roundwise_mean_reward",
            "cumulative_regret"
        ]
    );
    r.records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect()
}

const RUN: &str = r#"{
  "instance": { "dataset": "d2", "users": 12, "items": 16, "clusters": 2, "horizon": 8, "budget": 1 },
  "algorithm": { "kind": "etc", "exploration": { "kind": "rounds", "m": 3 } },
  "seeds": [4, 5],
  "event_log": true
}"#;

#[test]
fn run_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), RUN).unwrap();
    for out in ["a", "b"] {
        let o = bbandit(
            dir.path(),
            &["run", "--config", "run.json", "--out-dir", out, "--quiet"],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in [
        "trace.csv",
        "summary.json",
        "events-4.jsonl",
        "events-5.jsonl",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    assert_eq!(csv_rows(&dir.path().join("a/trace.csv")).len(), 2 * 8);
    let events = fs::read_to_string(dir.path().join("a/events-4.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 12 * 8);
}

#[test]
fn seeds_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), RUN).unwrap();
    let o = bbandit(
        dir.path(),
        &[
            "run",
            "--config",
            "run.json",
            "--seeds",
            "3",
            "--out-dir",
            "o",
            "--quiet",
        ],
    );
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("o/trace.csv"));
    let seeds: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(seeds.into_iter().collect::<Vec<_>>(), vec!["0", "1", "2"]);
}

#[test]
fn paperfig_writes_all_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = bbandit(
        dir.path(),
        &[
            "paperfig",
            "d1",
            "0.1",
            "--seeds",
            "2",
            "--out-dir",
            "pf",
            "--quiet",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("pf/paperfig_d1.csv"));
    // M = N = 15, T = 6
    assert_eq!(rows.len(), 4 * 2 * 6);
    let algs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(algs.len(), 4);
    let script = fs::read_to_string(dir.path().join("pf/paperfig_d1.gp")).unwrap();
    assert!(script.contains("paperfig_d1.dat"));
    assert!(dir.path().join("pf/summary.json").exists());
}

#[test]
fn sweep_rows_match_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
      "instances": [{ "dataset": "d3", "users": 10, "items": 10, "clusters": 2, "horizon": 5, "budget": 1 }],
      "algorithms": [{ "kind": "oracle" }, { "kind": "random" }, { "kind": "collab_greedy" }],
      "seeds": [0, 1],
      "horizons": [3, 5]
    }"#;
    fs::write(dir.path().join("sweep.json"), cfg).unwrap();
    let o = bbandit(
        dir.path(),
        &[
            "sweep",
            "--config",
            "sweep.json",
            "--out-dir",
            "s",
            "--quiet",
            "--threads",
            "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        csv_rows(&dir.path().join("s/sweep.csv")).len(),
        3 * 2 * (3 + 5)
    );
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 6);
}

#[test]
fn diag_of_a_single_cluster_has_unit_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let spec =
        r#"{ "dataset": "d2", "users": 8, "items": 12, "clusters": 1, "horizon": 4, "budget": 1 }"#;
    fs::write(dir.path().join("spec.json"), spec).unwrap();
    let o = bbandit(
        dir.path(),
        &[
            "generate",
            "spec.json",
            "--seed",
            "2",
            "--output",
            "inst.json",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = bbandit(dir.path(), &["diag", "inst.json"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let kappa: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("kappa "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((kappa - 1.0).abs() < 1e-12);
    assert!(text.lines().any(|l| l.starts_with("mu ")));
    assert!(text.lines().any(|l| l.starts_with("tau ")));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        RUN.replace("\"seeds\"", "\"seed\""),
    )
    .unwrap();
    let o = bbandit(dir.path(), &["run", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_line(&o);
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("seed"));

    let o = bbandit(dir.path(), &["run", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"], "config");

    let o = bbandit(dir.path(), &["paperfig", "d4"]);
    assert_eq!(o.status.code(), Some(1));
    error_line(&o);
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), RUN).unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    // the output directory cannot be created under a regular file
    let o = bbandit(
        dir.path(),
        &["run", "--config", "run.json", "--out-dir", "blocker/x"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"], "runtime");
}

#[test]
fn bad_thread_variable_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_bbandit"))
        .args(["paperfig", "d1", "0.1", "--seeds", "1", "--out-dir", "x"])
        .current_dir(dir.path())
        .env("BB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(error_line(&o)["message"]
        .as_str()
        .unwrap()
        .contains("BB_THREADS"));
}

/// Every key the default configs serialise is declared in the shipped schema.
#[test]
fn schema_covers_default_configs() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/config.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let defs = &schema["$defs"];
    let algs = [
        (Algorithm::Blattice(Default::default()), "Blattice"),
        (Algorithm::Bbuic(Default::default()), "Bbuic"),
        (Algorithm::Etc(Default::default()), "Etc"),
        (Algorithm::Pblattice(Default::default()), "Pblattice"),
        (Algorithm::CollabGreedy(Default::default()), "CollabGreedy"),
    ];
    for (alg, def) in algs {
        let value = serde_json::to_value(&alg).unwrap();
        for key in value.as_object().unwrap().keys() {
            assert!(
                defs[def]["properties"].get(key).is_some(),
                "{def} lacks `{key}`"
            );
        }
    }
    let solver =
        serde_json::to_value(blocked_bandits::completion::SolverConfig::default()).unwrap();
    for key in solver.as_object().unwrap().keys() {
        assert!(
            defs["Solver"]["properties"].get(key).is_some(),
            "Solver lacks `{key}`"
        );
    }
}
