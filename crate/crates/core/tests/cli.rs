use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cmax_denoise::io::{parse_events, parse_ground_truth, parse_labels};

const SCENE: &[&str] = &["--width", "64", "--height", "48", "--focal", "60", "--edge-rate", "150", "--duration", "0.1", "--arms", "5"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmax-denoise")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(SCENE);
    args.extend_from_slice(extra);
    ok(&args);
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn simulate_writes_aligned_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--noise-hz", "3"]);
    let events = parse_events(&read(dir.path().join("events/events.txt"))).unwrap();
    let gt = parse_ground_truth(&read(dir.path().join("events/gt.txt"))).unwrap();
    assert_eq!(gt.labels.len(), events.len());
    assert!(gt.labels.iter().any(|l| !l.is_signal()));
    assert_eq!(gt.info.noise_hz, 3.0);

    let quiet = tempfile::tempdir().unwrap();
    simulate(quiet.path(), &["--noise-hz", "0"]);
    let gt = parse_ground_truth(&read(quiet.path().join("events/gt.txt"))).unwrap();
    assert!(gt.labels.iter().all(|l| l.is_signal()));
}

#[test]
fn denoise_and_evaluate_joint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    simulate(dir.path(), &["--noise-fraction", "0.15", "--seed", "4"]);
    let ev = format!("{d}/events/events.txt");
    let cam = format!("{d}/events/camera.txt");
    ok(&["denoise", "--events", &ev, "--camera", &cam, "--tau", "0.85", "--out", d]);
    for f in ["labels/labels.txt", "events/denoised.txt", "metrics/motion.json", "metrics/history.csv", "iwe/identity.pgm", "iwe/warped_all.pgm", "iwe/warped_signal.pgm"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let motion: serde_json::Value = serde_json::from_str(&read(dir.path().join("metrics/motion.json"))).unwrap();
    let iterations = motion["iterations_used"].as_u64().unwrap() as usize;
    let history = read(dir.path().join("metrics/history.csv"));
    assert_eq!(history.lines().filter(|l| !l.starts_with('#')).count(), iterations + 1);

    let labels = format!("{d}/labels/labels.txt");
    let gt = format!("{d}/events/gt.txt");
    let mjson = format!("{d}/metrics/motion.json");
    ok(&["evaluate", "--events", &ev, "--camera", &cam, "--labels", &labels, "--gt", &gt, "--motion", &mjson, "--out", d]);
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("metrics/metrics.json"))).unwrap();
    for k in ["auc", "precision", "recall", "fwl", "angvel_rms_deg"] {
        assert!(m[k].is_number(), "{k}");
    }
    assert!(m["auc"].as_f64().unwrap() > 0.9);
    assert!(read(dir.path().join("metrics/roc.csv")).contains("fpr,tpr"));
}

#[test]
fn full_ratio_keeps_every_event() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    simulate(dir.path(), &["--noise-hz", "2"]);
    let ev = format!("{d}/events/events.txt");
    ok(&["denoise", "--events", &ev, "--camera", &format!("{d}/events/camera.txt"), "--tau", "1.0", "--max-iters", "5", "--out", d]);
    assert_eq!(
        parse_events(&read(dir.path().join("events/denoised.txt"))).unwrap(),
        parse_events(&read(&ev)).unwrap()
    );
}

#[test]
fn baselines_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    simulate(dir.path(), &["--noise-hz", "5"]);
    let ev = format!("{d}/events/events.txt");
    let cam = format!("{d}/events/camera.txt");
    let gt = format!("{d}/events/gt.txt");
    let labels = format!("{d}/labels/labels.txt");

    ok(&["denoise", "--events", &ev, "--camera", &cam, "--method", "baf", "--out", d]);
    assert!(!dir.path().join("metrics/motion.json").exists());
    assert!(dir.path().join("labels/labels.txt").exists());

    // Labels equal to the ground truth.
    let truth = parse_ground_truth(&read(&gt)).unwrap();
    let mut exact = parse_labels(&read(&labels)).unwrap();
    exact.labels = truth.labels.clone();
    exact.scores = truth.labels.iter().map(|l| if l.is_signal() { 1.0 } else { 0.0 }).collect();
    fs::write(&labels, cmax_denoise::io::write_labels(&exact)).unwrap();
    ok(&["evaluate", "--events", &ev, "--camera", &cam, "--labels", &labels, "--gt", &gt, "--out", d]);
    let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("metrics/metrics.json"))).unwrap();
    assert_eq!(m["precision"].as_f64(), Some(1.0));
    assert_eq!(m["recall"].as_f64(), Some(1.0));

    let mut auc = 0.0;
    for seed in 0..5 {
        let s = seed.to_string();
        ok(&["denoise", "--events", &ev, "--camera", &cam, "--method", "random", "--tau", "0.5", "--seed", &s, "--out", d]);
        ok(&["evaluate", "--events", &ev, "--camera", &cam, "--labels", &labels, "--gt", &gt, "--out", d]);
        let m: serde_json::Value = serde_json::from_str(&read(dir.path().join("metrics/metrics.json"))).unwrap();
        auc += m["auc"].as_f64().unwrap() / 5.0;
    }
    assert!((auc - 0.5).abs() < 0.1, "{auc}");
}

#[test]
fn missing_sidecar_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    simulate(dir.path(), &["--noise-hz", "2"]);
    let ev = format!("{d}/events/events.txt");
    ok(&["denoise", "--events", &ev, "--camera", &format!("{d}/events/camera.txt"), "--method", "baf", "--out", d]);
    let out = run(&["evaluate", "--events", &ev, "--labels", &format!("{d}/labels/labels.txt"), "--gt", &format!("{d}/nope.txt"), "--out", d]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
    // Rotation without a camera file is refused.
    assert!(!run(&["denoise", "--events", &ev, "--tau", "0.9", "--out", d]).status.success());
    assert!(!run(&["denoise", "--events", &ev, "--method", "random", "--out", d]).status.success());
}

#[test]
fn sweep_is_a_cartesian_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let mut args = vec!["sweep", "--out", d, "--taus", "0.9,0.8,0.7,0.6,0.5", "--rates", "1,5,10", "--max-iters", "8"];
    args.extend_from_slice(SCENE);
    ok(&args);
    let csv = read(dir.path().join("metrics/sweep.csv"));
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 15);
    let aucs: Vec<&str> = rows.iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert!(aucs.iter().any(|a| *a != aucs[0]));
}

#[test]
fn dump_config_prints_resolved_values() {
    let out = ok(&["simulate", "--seed", "7", "--dump-config"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["scene"]["seed"], 7);
    assert_eq!(v["scene"]["noise_seed"], 8);
    let out = ok(&["denoise", "--events", "x.txt", "--tau", "0.7", "--dump-config"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["estimation"]["tau"], 0.7);
    assert_eq!(v["method"], "joint");
}
