use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spanbandit"));
    c.env_remove("SPANBANDIT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn span(trace: &str, id: &str, parent: Option<&str>, op: &str, start: i64, dur: i64) -> String {
    let parent = parent
        .map(|x| format!(r#""parentId":"{x}","#))
        .unwrap_or_default();
    format!(
        r#"{{"traceId":"{trace}","spanId":"{id}",{parent}"service":"svc","operation":"{op}","startUs":{start},"durationUs":{dur}}}"#
    )
}

#[test]
fn simulate_learn_report_pipeline() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&[
        "simulate",
        "--requests",
        "200",
        "--seed",
        "3",
        "--out",
        p(&sim),
    ]);
    let traces = fs::read_to_string(sim.join("traces.jsonl")).unwrap();
    assert!(traces.lines().count() > 200);
    let truth = json(&sim.join("ground_truth.json"));
    assert!(truth["tool"].as_str().unwrap().starts_with("spanbandit"));
    assert_eq!(truth["config"]["run"]["base_seed"], 3);

    let learned = dir.path().join("learned");
    ok(&[
        "learn",
        "--traces",
        p(&sim.join("traces.jsonl")),
        "--mc-rows",
        "5000",
        "--out",
        p(&learned),
    ]);
    let beliefs = json(&learned.join("beliefs.json"));
    assert_eq!(beliefs["epoch"], 1);
    let policy = json(&learned.join("policy.json"));
    let eps = policy["epsilon"].as_f64().unwrap();
    let entries = policy["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    for e in entries {
        let prob = e["probability"].as_f64().unwrap();
        assert!((eps..=1.0).contains(&prob), "{e}");
    }

    let out = ok(&[
        "report",
        "--beliefs",
        p(&learned.join("beliefs.json")),
        "--policy",
        p(&learned.join("policy.json")),
        "--top",
        "5",
    ]);
    let table = String::from_utf8(out.stdout).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().contains("confidence"));
    let ranks: Vec<&str> = lines
        .filter_map(|l| l.split_whitespace().next())
        .filter(|w| w.parse::<usize>().is_ok())
        .collect();
    assert!(ranks.len() >= 5);
    assert_eq!(ranks[0], "1");
}

#[test]
fn simulate_under_learned_policy_records_fewer_spans() {
    let dir = TempDir::new().unwrap();
    let all = dir.path().join("all");
    ok(&["simulate", "--requests", "100", "--out", p(&all)]);
    let learned = dir.path().join("learned");
    ok(&[
        "learn",
        "--traces",
        p(&all.join("traces.jsonl")),
        "--mc-rows",
        "5000",
        "--out",
        p(&learned),
    ]);
    let thin = dir.path().join("thin");
    ok(&[
        "simulate",
        "--requests",
        "100",
        "--policy",
        p(&learned.join("policy.json")),
        "--out",
        p(&thin),
    ]);
    let count = |d: &Path| {
        fs::read_to_string(d.join("traces.jsonl"))
            .unwrap()
            .lines()
            .count()
    };
    assert!(count(&thin) < count(&all));
    // Roots are always recorded.
    assert!(count(&thin) >= 100);
}

#[test]
fn malformed_line_is_reported_with_its_number() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.jsonl");
    fs::write(
        &path,
        format!("{}\n{{\"traceId\": \n", span("t", "a", None, "root", 0, 10)),
    )
    .unwrap();
    let out = run(&["learn", "--traces", p(&path), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["line"], 2);
    assert!(!err["error"].as_str().unwrap().is_empty());
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["learn"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn repeated_batch_reaches_a_fixed_policy() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    ok(&[
        "simulate",
        "--requests",
        "40",
        "--seed",
        "5",
        "--out",
        p(&sim),
    ]);
    let traces = sim.join("traces.jsonl");
    let state = dir.path().join("state");
    let entries = |d: &Path| json(&d.join("policy.json"))["entries"].clone();
    ok(&[
        "learn",
        "--traces",
        p(&traces),
        "--mc-rows",
        "2000",
        "--out",
        p(&state),
    ]);
    let mut prev = entries(&state);
    let mut stable = 0;
    for _ in 0..120 {
        let prior = dir.path().join("prior.json");
        fs::copy(state.join("beliefs.json"), &prior).unwrap();
        ok(&[
            "learn",
            "--traces",
            p(&traces),
            "--beliefs-in",
            p(&prior),
            "--mc-rows",
            "2000",
            "--out",
            p(&state),
        ]);
        let next = entries(&state);
        stable = if next == prev { stable + 1 } else { 0 };
        prev = next;
        if stable == 3 {
            break;
        }
    }
    assert_eq!(stable, 3, "policy still moving after 120 epochs");
}

#[test]
fn decompose_matches_hand_computation() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("t.jsonl");
    // root [0,100]: children a [10,40], b [30,60], d [90,120] (clipped to [90,100]).
    // a has child c [15,25].
    let lines = [
        span("t", "r", None, "root", 0, 100),
        span("t", "a", Some("r"), "a", 10, 30),
        span("t", "b", Some("r"), "b", 30, 30),
        span("t", "c", Some("a"), "c", 15, 10),
        span("t", "d", Some("r"), "d", 90, 30),
    ];
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = ok(&["decompose", "--traces", p(&path)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# {"));
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let got: Vec<(String, i64, i64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (
                r[1].to_string(),
                r[6].parse().unwrap(),
                r[7].parse().unwrap(),
            )
        })
        .collect();
    let mut got = got;
    got.sort();
    let want = [
        ("a", 10, 20),
        ("b", 0, 30),
        ("c", 0, 10),
        ("d", 0, 30),
        ("r", 60, 40),
    ];
    let want: Vec<(String, i64, i64)> = want
        .iter()
        .map(|(s, w, x)| (s.to_string(), *w, *x))
        .collect();
    assert_eq!(got, want);
}

#[test]
fn compare_baselines_emits_three_curves() {
    let out = ok(&["compare-baselines", "--seeds", "2", "--step", "500"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut algs: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    algs.dedup();
    assert_eq!(algs, ["abs", "median_elimination", "exponential_gap"]);
}

#[test]
fn experiment_outputs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = |d: &Path| {
        vec![
            "experiment",
            "--seeds",
            "2",
            "--epochs",
            "4",
            "--mc-rows",
            "2000",
            "--out",
        ]
        .into_iter()
        .map(String::from)
        .chain([p(d).to_string()])
        .collect::<Vec<_>>()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = bin().args(args(d)).output().unwrap();
        assert!(out.status.success());
    }
    for f in ["metrics.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let csv = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let meta: Value =
        serde_json::from_str(csv.lines().next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(meta["config"]["epochs"], 4);
    assert!(meta["tool"].as_str().unwrap().starts_with("spanbandit"));
    // Two seeds of four epochs.
    assert_eq!(csv.lines().count(), 2 + 8);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = TempDir::new().unwrap();
    ok(&[
        "experiment",
        "--seeds",
        "1",
        "--epochs",
        "3",
        "--mc-rows",
        "1000",
        "--percentile",
        "50,90",
        "--out",
        p(dir.path()),
    ]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
    let s = json(&dir.path().join("sweep.json"));
    assert_eq!(s["param"], "percentile");

    let out = run(&[
        "experiment",
        "--percentile",
        "50,90",
        "--epsilon",
        "0.01,0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_comes_from_environment_unless_flagged() {
    let dir = TempDir::new().unwrap();
    let sim = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut c = bin();
        c.args(["simulate", "--requests", "30", "--out", p(&out)]);
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        if let Some(e) = env {
            c.env("SPANBANDIT_SEED", e);
        }
        assert!(c.output().unwrap().status.success());
        fs::read(out.join("traces.jsonl")).unwrap()
    };
    let env7 = sim("e7", Some("7"), None);
    assert_eq!(env7, sim("f7", None, Some("7")));
    assert_ne!(env7, sim("d", None, None));
    assert_eq!(
        sim("f3", None, Some("3")),
        sim("e7f3", Some("7"), Some("3"))
    );

    let mut c = bin();
    c.env("SPANBANDIT_SEED", "seven")
        .args(["simulate", "--requests", "5", "--out", p(dir.path())]);
    assert_eq!(c.output().unwrap().status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"base_seed": 11, "epochs": 3, "mc_rows": 1000, "seeds": 1, "epsilon": 0.2}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&[
        "--config",
        p(&cfg),
        "experiment",
        "--epsilon",
        "0.1",
        "--out",
        p(&out),
    ]);
    let s = json(&out.join("summary.json"));
    assert_eq!(s["config"]["base_seed"], 11);
    assert_eq!(s["config"]["epochs"], 3);
    assert_eq!(s["config"]["epsilon"], 0.1);

    fs::write(&cfg, r#"{"lambda": "high"}"#).unwrap();
    assert_eq!(
        run(&["--config", p(&cfg), "experiment"]).status.code(),
        Some(1)
    );
}

#[test]
fn tags_ranks_version_first_on_canary() {
    let out = ok(&["tags", "--seed", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let first = rdr.records().next().unwrap().unwrap();
    assert!(first[0].contains("version"), "{first:?}");
}

#[test]
fn bench_reports_median() {
    let out = ok(&[
        "bench-inference",
        "--spans",
        "20",
        "--mc-rows",
        "500",
        "--runs",
        "3",
    ]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["runs_ms"].as_array().unwrap().len(), 3);
    assert!(r["median_ms"].as_f64().unwrap() >= 0.0);
}
