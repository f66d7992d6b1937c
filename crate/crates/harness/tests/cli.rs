use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn cgames(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgames"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CGAMES_OUTPUT_DIR")
        .env_remove("CGAMES_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_run(dir: &Path, out: &str) -> Output {
    cgames(
        &["run", "--preset", "synthetic-small", "--T", "60", "--runs", "2", "--seed", "3", "--output-dir", out],
        dir,
    )
}

#[test]
fn synthetic_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&small_run(tmp.path(), "out"));
    let out = tmp.path().join("out");
    for f in ["config.json", "game.json", "aggregate.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for r in 0..2 {
        let run = out.join(format!("cgpmw-stochastic/run-{r}"));
        for f in ["trace.csv", "trace.json", "analysis.json"] {
            assert!(run.join(f).is_file(), "run-{r}/{f}");
        }
    }
    let csv = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("learner,round,loss_mean,loss_std,congestion_mean,congestion_std"));
    assert_eq!(lines.count(), 60);
    let trace = std::fs::read_to_string(out.join("cgpmw-stochastic/run-0/trace.csv")).unwrap();
    assert!(trace.starts_with("round,agent,action,reward,observed,raw_reward,loss,avg_congestion\n"));
    assert_eq!(trace.lines().count(), 1 + 60 * 2);
    let report = read_json(&out.join("cgpmw-stochastic/run-1/analysis.json"));
    assert_eq!(report["rounds"], 60);
    assert!(!tmp.path().join(".out.partial").exists());
}

#[test]
fn same_seed_gives_identical_aggregate() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&small_run(tmp.path(), "a"));
    ok(&small_run(tmp.path(), "b"));
    let a = std::fs::read(tmp.path().join("a/aggregate.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b/aggregate.csv")).unwrap();
    assert_eq!(a, b);
    let out = cgames(
        &["run", "--preset", "synthetic-small", "--T", "60", "--runs", "2", "--seed", "4", "--output-dir", "c"],
        tmp.path(),
    );
    ok(&out);
    assert_ne!(a, std::fs::read(tmp.path().join("c/aggregate.csv")).unwrap());
}

#[test]
fn sequential_polling_matches_concurrent() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&small_run(tmp.path(), "a"));
    ok(&cgames(
        &[
            "run", "--preset", "synthetic-small", "--T", "60", "--runs", "2", "--seed", "3", "--output-dir", "b",
            "--sequential",
        ],
        tmp.path(),
    ));
    for f in ["aggregate.csv", "cgpmw-stochastic/run-0/trace.csv"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(f)).unwrap(),
            std::fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn replayed_trace_gives_identical_report() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&small_run(tmp.path(), "out"));
    let out = tmp.path().join("out");
    let run = out.join("cgpmw-stochastic/run-0");
    let res = cgames(
        &[
            "analyze",
            "--trace",
            run.join("trace.json").to_str().unwrap(),
            "--spec",
            out.join("game.json").to_str().unwrap(),
        ],
        tmp.path(),
    );
    ok(&res);
    let replayed: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(replayed, read_json(&run.join("analysis.json")));
}

fn write_matching_pennies(dir: &Path) {
    // Player 0 wants to match, player 1 to mismatch.
    let spec = json!({
        "kind": "tabular",
        "game": {
            "actions": [2, 2],
            "contexts": [[0.0]],
            "payoffs": [[[1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 0.0]]]
        }
    });
    std::fs::write(dir.join("pennies.json"), spec.to_string()).unwrap();
}

fn trace(rows: Value) -> Value {
    json!({"num_players": 2, "rows": rows})
}

fn row(round: usize, actions: [usize; 2], rewards: [f64; 2]) -> Value {
    json!({
        "round": round,
        "context": [0.0],
        "actions": actions,
        "rewards": rewards,
        "observed": rewards,
        "distributions": [[0.5, 0.5], [0.5, 0.5]]
    })
}

#[test]
fn analyze_matches_hand_computed_regret() {
    let tmp = tempfile::tempdir().unwrap();
    write_matching_pennies(tmp.path());
    // Player 0 earns 1 and would have earned 2 always playing 0; player 1
    // earns 1 and no fixed action does better.
    let t = trace(json!([row(0, [0, 0], [1.0, 0.0]), row(1, [1, 0], [0.0, 1.0])]));
    std::fs::write(tmp.path().join("t.json"), t.to_string()).unwrap();
    let res = cgames(&["analyze", "--trace", "t.json", "--spec", "pennies.json"], tmp.path());
    ok(&res);
    let r: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(r["players"][0]["regret"], 1.0);
    assert_eq!(r["players"][1]["regret"], 0.0);
    assert_eq!(r["max_average_regret"], 0.5);
    assert_eq!(r["cce_gap"], 0.5);
    assert_eq!(r["welfare"]["realized"], 1.0);
}

#[test]
fn analyze_rejects_bad_traces() {
    let tmp = tempfile::tempdir().unwrap();
    write_matching_pennies(tmp.path());
    let cases = [
        ("empty", trace(json!([]))),
        ("wrong-reward", trace(json!([row(0, [0, 0], [0.5, 0.0])]))),
        (
            "foreign-context",
            trace(json!([{"round": 0, "context": [9.0], "actions": [0, 0], "rewards": [1.0, 0.0],
                          "observed": [1.0, 0.0], "distributions": [[1.0, 0.0], [1.0, 0.0]]}])),
        ),
    ];
    for (name, t) in cases {
        std::fs::write(tmp.path().join("t.json"), t.to_string()).unwrap();
        let res = cgames(&["analyze", "--trace", "t.json", "--spec", "pennies.json"], tmp.path());
        assert_eq!(res.status.code(), Some(3), "{name}: {}", String::from_utf8_lossy(&res.stderr));
    }
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--preset", "nope"],
        vec!["run", "--preset", "synthetic-small", "--T", "0"],
        vec!["run", "--preset", "synthetic-small", "--learner", "ucb"],
        vec!["run", "--config", "missing.json"],
        vec!["run", "--preset", "sioux-falls", "--data-dir", "nowhere"],
    ] {
        let res = cgames(&args, tmp.path());
        assert_eq!(res.status.code(), Some(if args[1] == "--config" { 3 } else { 2 }), "{args:?}");
        assert!(String::from_utf8_lossy(&res.stderr).contains("error"), "{args:?}");
    }
    let res = cgames(&["run", "--preset", "synthetic-small", "--T", "0"], tmp.path());
    assert!(String::from_utf8_lossy(&res.stderr).contains("`rounds`"));
}

#[test]
fn env_var_sets_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_cgames"))
        .args(["run", "--preset", "synthetic-small", "--T", "5", "--runs", "1", "--no-analysis"])
        .current_dir(tmp.path())
        .env("CGAMES_OUTPUT_DIR", "from-env")
        .env("CGAMES_THREADS", "1")
        .output()
        .unwrap();
    ok(&res);
    assert!(tmp.path().join("from-env/aggregate.csv").is_file());
    assert!(!tmp.path().join("from-env/cgpmw-stochastic/run-0/analysis.json").exists());
}

#[test]
fn failed_run_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config: Value = {
        ok(&small_run(tmp.path(), "seed"));
        read_json(&tmp.path().join("seed/config.json"))
    };
    config["output_dir"] = json!("out");
    config["rounds"] = json!(5);
    config["learners"] = json!([
        {"label": "fine", "spec": {"kind": "exp3"}},
        {"label": "broken", "spec": {"kind": "no-learning", "action": 7}}
    ]);
    std::fs::write(tmp.path().join("c.json"), config.to_string()).unwrap();
    let res = cgames(&["run", "--config", "c.json"], tmp.path());
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!tmp.path().join("out").exists());
    assert!(!tmp.path().join(".out.partial").exists());
}

#[test]
fn network_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sioux-falls");
    let net = data.join("SiouxFalls_net.tntp");
    let trips = data.join("SiouxFalls_trips.tntp");
    let res = cgames(
        &["net-info", "--net", net.to_str().unwrap(), "--trips", trips.to_str().unwrap()],
        tmp.path(),
    );
    ok(&res);
    let info: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(info["nodes"], 24);
    assert_eq!(info["edges"], 76);
    assert_eq!(info["od_pairs"], 528);
    assert_eq!(info["total_demand"], 360600.0);

    let res = cgames(
        &["routes", "--net", net.to_str().unwrap(), "--origin", "1", "--destination", "20", "--k", "5"],
        tmp.path(),
    );
    ok(&res);
    let routes: Value = serde_json::from_slice(&res.stdout).unwrap();
    let list = routes["routes"].as_array().unwrap();
    assert_eq!(list.len(), 5);
    let costs: Vec<f64> = list.iter().map(|r| r["cost"].as_f64().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(list[0]["nodes"][0], 1);
}
