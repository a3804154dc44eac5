use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coverscope")).args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf8")
}

fn first_line(p: &Path) -> String {
    std::fs::read_to_string(p).expect("read").lines().next().unwrap_or_default().to_string()
}

#[test]
fn stages_chain_and_stamp_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |s: &str| d.join(s).to_str().unwrap().to_string();
    let cfg = p("cfg.json");
    std::fs::write(&cfg, r#"{"simulate": {"frames_min": 20, "frames_max": 25}}"#).unwrap();

    ok(&["--seed", "3", "--config", &cfg, "simulate", "--n-plays", "8", "--out", &p("sim")]);
    let head = first_line(&d.join("sim/tracking.csv"));
    assert!(head.starts_with("# coverscope ") && head.contains("seed=3") && head.ends_with("rng=chacha20"), "{head}");

    let msg = ok(&["ingest", "--tracking", &p("sim/tracking.csv"), "--plays", &p("sim/plays.csv"), "--out", &p("ing")]);
    assert!(msg.contains("retained 8 plays"), "{msg}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("ing/ingest_report.json")).unwrap()).unwrap();
    assert_eq!(report["provenance"]["rng"], "chacha20");

    ok(&["extract-features", "--series", &p("ing/series.jsonl"), "--out", &p("pre.csv")]);
    let head = std::fs::read_to_string(d.join("pre.csv")).unwrap();
    assert!(head.lines().nth(1).unwrap().contains("tot_dist_d"));
    assert!(!head.contains("per_play_RE"));
}

#[test]
fn evaluate_refuses_rows_without_hmm_features() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |s: &str| d.join(s).to_str().unwrap().to_string();
    ok(&["simulate", "--n-plays", "6", "--out", &p("sim")]);
    ok(&["ingest", "--tracking", &p("sim/tracking.csv"), "--plays", &p("sim/plays.csv"), "--out", &p("ing")]);
    ok(&["extract-features", "--series", &p("ing/series.jsonl"), "--out", &p("f.csv")]);
    let out = run(&["evaluate", "--features", &p("f.csv"), "--repeats", "1", "--out", &p("eval")]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    assert!(!d.join("eval/metrics.csv").exists());
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let m = missing.to_str().unwrap();
    for args in [
        vec!["train", "--features", m, "--model", "forest", "--feature-set", "pre", "--out", m],
        vec!["evaluate", "--features", m, "--out", m],
        vec!["--config", m, "simulate", "--out", m],
        vec!["select-lag", "--series", m, "--lags", "", "--out", m],
    ] {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?} should fail");
    }
}
