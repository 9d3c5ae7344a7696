//! End-to-end checks of the binary: reruns are byte-identical, exit codes
//! follow the documented contract, and failed runs leave no partial
//! artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symfocus"))
}

fn run_ok(args: &[&str], cwd: &Path) -> Output {
    let out = bin().args(args).current_dir(cwd).output().expect("binary runs");
    assert!(out.status.success(), "{:?} failed: {}", args, String::from_utf8_lossy(&out.stderr));
    out
}

fn exit_code(args: &[&str], cwd: &Path) -> (i32, String) {
    let out = bin().args(args).current_dir(cwd).output().expect("binary runs");
    (
        out.status.code().expect("terminated by signal"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// File name to content for every regular file directly inside `dir`.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).expect("artifact dir exists") {
        let entry = entry.unwrap();
        assert!(entry.file_type().unwrap().is_file(), "unexpected subdirectory");
        files.insert(entry.file_name().into_string().unwrap(), fs::read(entry.path()).unwrap());
    }
    files
}

#[test]
fn identical_runs_emit_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(
        &["phantom", "gen", "--out", "batch", "--count", "2", "--seed", "9", "--sigma", "3"],
        dir,
    );

    let scan = "batch/phantom_001.pgm";
    run_ok(&["pipeline", scan, "--out", "run_a", "--seed", "4"], dir);
    run_ok(&["pipeline", scan, "--out", "run_b", "--seed", "4"], dir);

    let a = snapshot(&dir.join("run_a"));
    let b = snapshot(&dir.join("run_b"));
    assert_eq!(
        a.keys().map(String::as_str).collect::<Vec<_>>(),
        vec!["asymmetry.pgm", "focus.json", "model.json", "summary.json"],
    );

    if a == b {
        let bytes: usize = a.values().map(Vec::len).sum();
        println!(
            "[8/8] identical runs emit identical artifacts: PASS ({} files, {} bytes)",
            a.len(),
            bytes
        );
    } else {
        let differing: Vec<&String> = a
            .iter()
            .filter(|(name, content)| b.get(*name) != Some(content))
            .map(|(name, _)| name)
            .collect();
        println!("[8/8] identical runs emit identical artifacts: FAIL (differing: {differing:?})");
        panic!("reruns differ in {differing:?}");
    }
}

#[test]
fn missing_input_exits_one_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, stderr) = exit_code(&["pipeline", "absent.pgm", "--out", "run"], tmp.path());
    assert_eq!(code, 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error: "), "diagnostic goes to stderr: {stderr}");
    assert_eq!(stderr.lines().count(), 1, "one line per failure: {stderr}");
    assert!(!tmp.path().join("run").exists(), "failed run must not create artifacts");
}

#[test]
fn truncated_scan_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cut.pgm"), b"P5\n10 10\n255\n").unwrap();
    let (code, stderr) = exit_code(&["segment", "cut.pgm"], tmp.path());
    assert_eq!(code, 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error: "), "stderr: {stderr}");
}

#[test]
fn config_problems_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), br#"{"tau_x": 1.0}"#).unwrap();
    // Config resolves before any input is touched, so the scan file does
    // not need to exist.
    let cases: [&[&str]; 4] = [
        &["segment", "absent.pgm", "--config", "bad.json"],
        &["segment", "absent.pgm", "--k-min", "5", "--k-max", "2"],
        &["pipeline", "absent.pgm", "--out", "r", "--tau-b", "2.0"],
        &["phantom", "eval", "nowhere", "--config", "missing.json"],
    ];
    for args in cases {
        let (code, stderr) = exit_code(args, tmp.path());
        assert_eq!(code, 2, "{args:?}: {stderr}");
        assert!(stderr.starts_with("error: "), "{args:?}: {stderr}");
        assert_eq!(stderr.lines().count(), 1, "{args:?}: {stderr}");
    }
}

#[test]
fn usage_errors_exit_two_and_help_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _) = exit_code(&["pipeline"], tmp.path());
    assert_eq!(code, 2);
    let (code, _) = exit_code(&["no-such-command"], tmp.path());
    assert_eq!(code, 2);

    let out = bin().arg("--help").current_dir(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["segment", "analyze", "report", "phantom", "pipeline"] {
        assert!(text.contains(name), "help lists {name}");
    }
}

#[test]
fn report_round_trips_and_baseline_is_parity() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(&["phantom", "gen", "--out", "b", "--count", "2", "--seed", "3"], dir);
    let out = run_ok(&["report", "b/phantom_001.pgm", "--baseline", "b/phantom_000.pgm"], dir);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = symfocus::report::parse_report(&text).expect("stdout parses back");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].label, "phantom_000");
    assert_eq!(rows[0].red_ratio, 1.0);
    assert_eq!(rows[0].green_ratio, 1.0);
    assert_eq!(rows[0].blue_ratio, 1.0);
    assert_eq!(rows[1].label, "phantom_001");
    assert!(rows[1].red_ratio > 0.0 && rows[1].red_ratio < 1.0, "lesion lowers the total");

    // The same report written to a file matches stdout byte for byte.
    run_ok(
        &["report", "b/phantom_001.pgm", "--baseline", "b/phantom_000.pgm", "--out", "r.csv"],
        dir,
    );
    assert_eq!(fs::read_to_string(dir.join("r.csv")).unwrap(), text);
}

#[test]
fn analyze_writes_midline_and_map() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(&["phantom", "gen", "--out", "b", "--count", "1", "--seed", "2"], dir);
    run_ok(&["analyze", "b/phantom_000.pgm", "--out", "an"], dir);

    let midline: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("an/midline.json")).unwrap()).unwrap();
    let axis = midline["axis_col"].as_u64().unwrap();
    assert!((102..=154).contains(&axis), "axis {axis} stays near the center");
    assert!(midline["mask_pixels"].as_u64().unwrap() > 1000, "mask covers the tissue");

    let pgm = fs::read(dir.join("an/asymmetry.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5"), "map is binary PGM");
}

#[test]
fn segment_reports_the_selected_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(&["phantom", "gen", "--out", "b", "--count", "1", "--seed", "6"], dir);
    let out = run_ok(&["segment", "b/phantom_000.pgm", "--k-max", "2"], dir);

    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["k_star"], 2);
    assert_eq!(v["sweep"].as_array().unwrap().len(), 1, "range [2, 2] sweeps one K");
    let points = v["points"].as_u64().unwrap() as usize;
    assert_eq!(v["model"]["assignments"].as_array().unwrap().len(), points);
    assert_eq!(v["model"]["centers"].as_array().unwrap().len(), 2);
}

#[test]
fn phantom_eval_scores_its_own_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    run_ok(&["phantom", "gen", "--out", "b", "--count", "2", "--seed", "5"], dir);
    let out = run_ok(&["phantom", "eval", "b"], dir);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("accuracy 1.000"), "easy batch detects cleanly: {text}");

    let report: symfocus::phantom::AccuracyReport =
        serde_json::from_str(&fs::read_to_string(dir.join("b/accuracy.json")).unwrap()).unwrap();
    assert_eq!(report.n, 2);
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.true_positives, 1);
    assert_eq!(report.true_negatives, 1);
}
