use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obstacles"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_tiny_corpus(path: &Path) {
    let mut text = String::from("track_id,timestamp,lat,lon\n");
    for track in 0..3 {
        for i in 0..20 {
            let lat = 1.25 + 0.001 * track as f64 + 0.0001 * (i as f64 * 0.5).sin();
            let lon = 103.8 + 0.0005 * i as f64;
            text.push_str(&format!("t{track},{},{lat},{lon}\n", 1000 + 30 * i));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn index_reports_windows_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_tiny_corpus(&d.join("tiny.csv"));
    let out = ok(d, &["index", "--input", "tiny.csv", "--output", "tiny.idx"]);
    assert!(out.contains("windows: 45\n"), "{out}");
    assert!(out.contains("w=6 s=1 k=8"), "{out}");
    assert!(d.join("tiny.idx").exists());
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["index", "--input", "missing.csv", "--output", "x.idx"]).status.code(), Some(2));
    assert_eq!(run(d, &["bogus"]).status.code(), Some(2));
    write_tiny_corpus(&d.join("tiny.csv"));
    ok(d, &["index", "--input", "tiny.csv", "--output", "tiny.idx"]);
    let bad_tau = run(
        d,
        &["detect", "--index", "tiny.idx", "--query", "tiny.csv", "--output", "o.geojson", "--tau", "-1"],
    );
    assert_eq!(bad_tau.status.code(), Some(2));
    let bad_step = run(d, &["index", "--input", "tiny.csv", "--output", "x.idx", "--step", "6"]);
    assert_eq!(bad_step.status.code(), Some(2));
    std::fs::write(d.join("empty.geojson"), r#"{"type":"FeatureCollection","features":[]}"#).unwrap();
    let empty_truth = run(d, &["eval", "--detections", "empty.geojson", "--truth", "empty.geojson"]);
    assert_eq!(empty_truth.status.code(), Some(2));
    std::fs::write(d.join("blocker"), "").unwrap();
    assert_eq!(run(d, &["synth", "--output", "blocker/sub"]).status.code(), Some(2));
}

#[test]
fn identical_corpora_detect_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--output", ".", "--reference-count", "15", "--query-count", "15"]);
    ok(d, &["index", "--input", "reference.csv", "--output", "r.idx"]);
    let out = ok(
        d,
        &["detect", "--index", "r.idx", "--query", "reference.csv", "--output", "o.geojson", "--tau", "1.960"],
    );
    assert!(out.contains("obstacles: 0\n"), "{out}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("o.geojson")).unwrap()).unwrap();
    assert_eq!(doc["features"], serde_json::json!([]));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["synth", "--output", "a", "--seed", "42"]);
    ok(d, &["synth", "--output", "b", "--seed", "42"]);
    assert!(out.contains("reference trajectories: 50\n") && out.contains("query trajectories: 50\n"));
    assert!(out.contains("truth vertices: 32\n"));
    for f in ["reference.csv", "query.csv", "truth.geojson", "scenario.json"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("a/truth.geojson")).unwrap()).unwrap();
    assert_eq!(truth["features"][0]["geometry"]["coordinates"][0].as_array().unwrap().len(), 33);

    // the scenario file regenerates the same corpus
    ok(d, &["synth", "--output", "c", "--params", "a/scenario.json"]);
    assert_eq!(std::fs::read(d.join("a/query.csv")).unwrap(), std::fs::read(d.join("c/query.csv")).unwrap());
}

#[test]
fn planted_pipeline_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--output", "."]);
    ok(d, &["index", "--input", "reference.csv", "--output", "r.idx"]);
    let args = ["detect", "--index", "r.idx", "--query", "query.csv", "--output", "o.geojson"];
    let first = ok(d, &args);
    let geo_first = std::fs::read(d.join("o.geojson")).unwrap();
    let second = ok(d, &args);
    assert_eq!(first, second);
    assert_eq!(geo_first, std::fs::read(d.join("o.geojson")).unwrap());
    assert!(first.contains("obstacles: 1\n"), "{first}");

    let report = ok(d, &["eval", "--detections", "o.geojson", "--truth", "truth.geojson"]);
    assert_eq!(report, "precision: 100.0\nrecall: 100.0\nf1: 100.0\n");

    let deltas = "0.5,1.0,1.5,2.0,2.5,3.0,3.5,4.0";
    let sweep = ok(
        d,
        &["sweep", "--index", "r.idx", "--query", "query.csv", "--truth", "truth.geojson", "--deltas", deltas],
    );
    let rows: Vec<&str> = sweep.lines().collect();
    assert_eq!(rows[0], "delta,tau,precision,recall,f1,query_time_s,obstacles,candidates");
    assert_eq!(rows.len(), 9);
    assert!(rows[1..].iter().all(|r| r.split(',').nth(1) == Some("1.645")));

    let grid = ok(d, &["sweep", "--index", "r.idx", "--query", "query.csv", "--truth", "truth.geojson"]);
    let sizes: Vec<usize> = grid
        .lines()
        .skip(9)
        .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(sizes.len(), 5);
    assert!(sizes.windows(2).all(|w| w[0] >= w[1]), "{sizes:?}");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_tiny_corpus(&d.join("tiny.csv"));
    std::fs::write(d.join("c.toml"), "window = 4\nk = 5\n").unwrap();
    let out = ok(d, &["--config", "c.toml", "index", "--input", "tiny.csv", "--output", "t.idx"]);
    assert!(out.contains("windows: 51\n") && out.contains("w=4 s=1 k=5"), "{out}");
    let out = ok(d, &["--config", "c.toml", "index", "--input", "tiny.csv", "--output", "t.idx", "--window", "6"]);
    assert!(out.contains("windows: 45\n"), "{out}");
    std::fs::write(d.join("bad.toml"), "windw = 4\n").unwrap();
    assert_eq!(run(d, &["--config", "bad.toml", "index", "--input", "tiny.csv", "--output", "t.idx"]).status.code(), Some(2));
}
