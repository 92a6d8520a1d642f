use std::path::Path;
use std::process::{Command, Output};

use glucokin::container::{read_measurement, write_measurement};
use glucokin::core::calibrate::CalibrationCurve;
use glucokin::core::pipeline::Status;
use glucokin::evaluate::{DatasetReport, ResultsFile};
use glucokin::manifest::{container_path, DatasetManifest, Split};
use serde_json::Value;

fn glucokin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glucokin"))
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = glucokin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_dataset(dir: &Path, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join("ds");
    let mut args = vec![
        "simulate",
        "--levels",
        "80,320",
        "--repeats",
        "2",
        "--calibration-repeats",
        "1",
        "--compact",
        "--seed",
        "3",
        "--out",
        p(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out.join("manifest.json")
}

#[test]
fn manifest_round_trips_through_containers() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = small_dataset(dir.path(), &["--frames", "120"]);
    let manifest = DatasetManifest::load(&manifest_path).unwrap();
    assert_eq!(manifest.entries.len(), 6);
    assert_eq!(manifest.split(Split::Calibration).count(), 2);
    assert_eq!(manifest.split(Split::Evaluation).count(), 4);
    for e in &manifest.entries {
        let m = read_measurement(&container_path(&manifest_path, e), None).unwrap();
        let gen = e.plan.generator().unwrap();
        assert_eq!(m.frames.len(), 120);
        assert_eq!(m.calibration_frames.len(), 10);
        assert_eq!(m.metadata.glucose_mg_dl, Some(e.truth.g));
        assert_eq!(e.truth.n_d, gen.truth().n_d);
        for n in [0, 60, 119] {
            let expect = gen.frame_at(n);
            for (a, b) in m.frames[n].pixels().iter().zip(expect.pixels()) {
                assert!((a - b).abs() <= 1e-7 * b.abs().max(1e-3));
            }
        }
    }
    let text = std::fs::read_to_string(&manifest_path).unwrap();
    let again: DatasetManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(again, manifest);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = small_dataset(dir.path(), &["--frames", "100"]);
    let m = DatasetManifest::load(&manifest_path).unwrap();
    // the first 40 frames end before the drop
    let mut meas = read_measurement(&container_path(&manifest_path, &m.entries[0]), None).unwrap();
    meas.frames.truncate(40);
    let c = dir.path().join("short.glkf");
    write_measurement(&c, &meas).unwrap();

    let out = glucokin(&["detect", "--input", p(&c)]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["n_d"].is_null());

    let res = dir.path().join("r.json");
    let out = glucokin(&["run", "--input", p(&c), "--out", p(&res)]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&res).unwrap()).unwrap();
    assert_eq!(v["status"], "no-drop");

    assert_eq!(
        glucokin(&["detect", "--input", "/nonexistent.glkf"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        glucokin(&["run", "--input", p(&c), "--h", "-1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(glucokin(&["frobnicate"]).status.code(), Some(2));
    let bad = dir.path().join("bad.glkf");
    std::fs::write(&bad, b"GLKF\x01\0\0\0").unwrap();
    std::fs::copy(c.with_extension("json"), bad.with_extension("json")).unwrap();
    assert_eq!(
        glucokin(&["detect", "--input", p(&bad)]).status.code(),
        Some(2)
    );
}

#[test]
fn dataset_flow_and_method_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = small_dataset(dir.path(), &[]);
    let d = dir.path();
    let curve = d.join("curve.json");
    ok(&[
        "calibrate",
        "--manifest",
        p(&manifest_path),
        "--out",
        p(&curve),
    ]);
    let c: CalibrationCurve =
        serde_json::from_str(&std::fs::read_to_string(&curve).unwrap()).unwrap();
    assert_eq!(c.knots.len(), 2);
    assert_eq!(c.fitted_at, "2023-11-14T22:13:20Z");

    let mut frames = Vec::new();
    for method in ["ekf", "standard"] {
        let res = d.join(format!("{method}.json"));
        let rep = d.join(format!("{method}-report.json"));
        let ceg = d.join(format!("{method}.csv"));
        ok(&[
            "run",
            "--manifest",
            p(&manifest_path),
            "--curve",
            p(&curve),
            "--method",
            method,
            "--out",
            p(&res),
        ]);
        let results: ResultsFile =
            serde_json::from_str(&std::fs::read_to_string(&res).unwrap()).unwrap();
        assert_eq!(results.entries.len(), 4);
        assert!(results
            .entries
            .iter()
            .all(|e| e.result.status == Status::Complete));
        ok(&[
            "evaluate",
            "--results",
            p(&res),
            "--out",
            p(&rep),
            "--ceg",
            p(&ceg),
        ]);
        let report: DatasetReport =
            serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
        let metrics = report.metrics.unwrap();
        assert_eq!(metrics.measurements, 4);
        assert!(metrics.cv_r.is_some());
        let csv = std::fs::read_to_string(&ceg).unwrap();
        assert_eq!(csv.lines().next(), Some("g_true,g_est,zone"));
        assert_eq!(csv.lines().count(), 5);
        frames.push(report.mean_frames_to_result.unwrap());
    }
    assert!(
        frames[0] + 15.0 < frames[1],
        "ekf {} vs standard {}",
        frames[0],
        frames[1]
    );
}

#[test]
fn singleton_levels_leave_cv_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    ok(&[
        "simulate",
        "--levels",
        "150,400",
        "--repeats",
        "1",
        "--calibration-repeats",
        "1",
        "--compact",
        "--out",
        p(&out),
    ]);
    let manifest = out.join("manifest.json");
    let curve = dir.path().join("curve.json");
    let res = dir.path().join("res.json");
    let rep = dir.path().join("rep.json");
    let svg = dir.path().join("ceg.svg");
    ok(&["calibrate", "--manifest", p(&manifest), "--out", p(&curve)]);
    ok(&[
        "run",
        "--manifest",
        p(&manifest),
        "--curve",
        p(&curve),
        "--out",
        p(&res),
    ]);
    ok(&[
        "evaluate",
        "--results",
        p(&res),
        "--out",
        p(&rep),
        "--svg",
        p(&svg),
    ]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(v["metrics"]["cv_r"].is_null());
    assert_eq!(v["metrics"]["measurements"], 2);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    // one level cannot anchor a curve
    let single = dir.path().join("single");
    ok(&[
        "simulate",
        "--levels",
        "150",
        "--repeats",
        "1",
        "--calibration-repeats",
        "1",
        "--compact",
        "--frames",
        "100",
        "--out",
        p(&single),
    ]);
    let out = glucokin(&[
        "calibrate",
        "--manifest",
        p(&single.join("manifest.json")),
        "--out",
        p(&curve),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn segment_and_track_single_measurement() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = small_dataset(dir.path(), &[]);
    let m = DatasetManifest::load(&manifest_path).unwrap();
    let e = &m.entries[1];
    let c = container_path(&manifest_path, e);

    let out = ok(&["segment", "--input", p(&c), "--frame", "300"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let r_hat = v["r_hat"].as_f64().unwrap();
    let truth = e
        .plan
        .generator()
        .unwrap()
        .region_value(glucokin::core::synth::Region::Roi, 300);
    assert!((r_hat - truth).abs() < 0.5, "{r_hat} vs {truth}");

    let out = ok(&[
        "segment",
        "--input",
        p(&c),
        "--frame",
        "300",
        "--variant",
        "ms",
        "--tnu",
        "1e-3",
    ]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["variant"], "ssms");
    assert!(v["n_nu"].as_u64().unwrap() > 0);

    let trace = dir.path().join("trace.csv");
    let out = ok(&["track", "--input", p(&c), "--trace", p(&trace)]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "complete");
    let r_c = v["decision"]["r_c_hat"].as_f64().unwrap();
    assert!((r_c - e.truth.r_c).abs() < 1.0);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(csv.lines().next(), Some("n,r_hat,stage,r_C_hat,P"));
    assert!(csv.contains(",converged,"));
}
