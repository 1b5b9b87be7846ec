use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xcm_bootstrap::model::QuadraticModel;
use xcm_bootstrap::sim::{rotatable_ccd, CONCAVE_DOWN_COEFFICIENTS, SADDLE_COEFFICIENTS};

fn xcmboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xcmboot"))
        .args(args)
        .output()
        .unwrap()
}

fn noise_free_csv(dir: &Path, name: &str, coefs: [f64; 6], rows: usize) -> PathBuf {
    let m = QuadraticModel::from_coefficients(coefs);
    let mut s = String::from("x1,x2,y\n");
    for p in rotatable_ccd().into_iter().take(rows) {
        s += &format!("{},{},{}\n", p[0], p[1], m.value(p));
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_recovers_the_concave_down_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let input = noise_free_csv(dir.path(), "cd.csv", CONCAVE_DOWN_COEFFICIENTS, 13);
    let out = dir.path().join("out");
    let o = xcmboot(&[
        "fit",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let doc = json(&out.join("fit.json"));
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["result"]["classification"], "concave-down");
    let p = &doc["result"]["x_cm_hat"]["point"];
    assert!((p[0].as_f64().unwrap() - 0.828).abs() < 1e-3);
    assert!((p[1].as_f64().unwrap() - 0.819).abs() < 1e-3);
}

#[test]
fn saddle_stationary_point_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let input = noise_free_csv(dir.path(), "s.csv", SADDLE_COEFFICIENTS, 13);
    let out = dir.path().join("out");
    let o = xcmboot(&[
        "fit",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let doc = json(&out.join("fit.json"));
    assert_eq!(doc["result"]["classification"], "saddle");
    let note = doc["result"]["stationary_point"]["note"].as_str().unwrap();
    assert!(note.contains("not a maximum"));
    assert_eq!(doc["result"]["x_cm_hat"]["point"][0], -1.4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = d.join("out");
    let out = out.to_str().unwrap();

    let five = noise_free_csv(d, "five.csv", CONCAVE_DOWN_COEFFICIENTS, 5);
    let o = xcmboot(&["fit", five.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient runs"));

    let bad = d.join("bad.csv");
    std::fs::write(&bad, "x1,x2,y\n0,0,1\n0,zero,1\n").unwrap();
    let o = xcmboot(&["fit", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));

    // Only the corner runs: x1^2 and x2^2 are both constant columns.
    let degenerate = d.join("corners.csv");
    std::fs::write(
        &degenerate,
        "x1,x2,y\n-1,-1,1\n1,-1,2\n-1,1,3\n1,1,4\n-1,-1,1.5\n1,1,4.5\n",
    )
    .unwrap();
    let o = xcmboot(&["fit", degenerate.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rank deficient"));

    let good = noise_free_csv(d, "cd.csv", CONCAVE_DOWN_COEFFICIENTS, 13);
    let good = good.to_str().unwrap();
    let o = xcmboot(&[
        "region", good, "--seed", "1", "--b", "1001", "--alpha", "0.1", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(4));
    let o = xcmboot(&[
        "region", good, "--seed", "1", "--b", "1000", "--alpha", "0.15", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(0), "850 of 1000 is an integral mass");

    let o = xcmboot(&[
        "simulate", "saddle", "--seed", "1", "--b", "2000", "--alphas", "0.0003", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(6));
    let o = xcmboot(&[
        "simulate", "saddle", "--seed", "1", "--alphas", "", "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = xcmboot(&["simulate", "ridge", "--seed", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plugin_failure_exits_5_unless_fallback_is_allowed() {
    // Five bootstrap points are too few for the plug-in functionals.
    let dir = tempfile::tempdir().unwrap();
    let input = noise_free_csv(dir.path(), "cd.csv", CONCAVE_DOWN_COEFFICIENTS, 13);
    let out = dir.path().join("out");
    let args = [
        "region",
        input.to_str().unwrap(),
        "--seed",
        "3",
        "--b",
        "5",
        "--alpha",
        "0.2",
        "--bandwidth",
        "plugin",
        "--out",
        out.to_str().unwrap(),
    ];
    let o = xcmboot(&[&args[..], &["--no-plugin-fallback"]].concat());
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("plug-in"));

    let o = xcmboot(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let doc = json(&out.join("region.json"));
    assert_eq!(doc["result"]["bandwidth"]["method"], "rule-of-thumb");
    assert!(doc["result"]["bandwidth"]["fallback_reason"].is_string());
}

#[test]
fn region_outputs_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sys =
        xcm_bootstrap::sim::TrueSystem::reference(xcm_bootstrap::sim::SystemName::ConcaveDown)
            .unwrap();
    let e = xcm_bootstrap::sim::simulate_experiment(&sys, &rotatable_ccd(), 3.0, 5).unwrap();
    let mut s = String::from("x1,x2,y\n");
    for (p, y) in e.points.iter().zip(&e.responses) {
        s += &format!("{},{},{}\n", p[0], p[1], y);
    }
    let input = d.join("noisy.csv");
    std::fs::write(&input, s).unwrap();
    let a = d.join("a");
    let o = xcmboot(&[
        "region",
        input.to_str().unwrap(),
        "--seed",
        "11",
        "--b",
        "500",
        "--grid",
        "64",
        "--emit-cloud",
        "--emit-grid",
        "--emit-svg",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("bandwidths") && stdout.contains("f_alpha") && stdout.contains("captured")
    );

    let cloud = std::fs::read_to_string(a.join("cloud.csv")).unwrap();
    assert!(cloud.starts_with("x1,x2,value,on_b1,on_b2\n"));
    assert_eq!(cloud.lines().count(), 501);
    let grid = std::fs::read_to_string(a.join("grid.csv")).unwrap();
    assert!(grid.starts_with("x1,x2,f\n"));
    assert_eq!(grid.lines().count(), 1 + 65 * 65);
    assert!(std::fs::read_to_string(a.join("region.svg"))
        .unwrap()
        .contains("<path"));

    let doc = json(&a.join("region.json"));
    let region = &doc["result"]["region"];
    assert!(region["captured_count"].as_u64().unwrap() >= 450);
    for poly in region["polygons"].as_array().unwrap() {
        for v in poly.as_array().unwrap() {
            assert!(v[0].as_f64().unwrap().abs() <= 1.4 && v[1].as_f64().unwrap().abs() <= 1.4);
        }
    }
    assert_eq!(doc["config"]["seed"], 11);

    let b = d.join("b");
    let o = xcmboot(&[
        "replay",
        a.join("region.json").to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(o.status.success());
    for f in ["region.json", "cloud.csv", "grid.csv", "region.svg"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn simulate_writes_reports_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = xcmboot(&[
        "compare-n",
        "saddle",
        "--seed",
        "4",
        "--n-reps",
        "4",
        "--group-size",
        "2",
        "--b",
        "100",
        "--alphas",
        "0.1,0.05",
        "--replicates",
        "1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out.join("coverage.json"));
    assert_eq!(doc["kind"], "compare-n");
    assert_eq!(doc["result"]["reports"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(out.join("coverage_n26.csv")).unwrap();
    assert!(csv.starts_with("alpha,group,coverage\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let series = std::fs::read_to_string(out.join("coverage_series.csv")).unwrap();
    assert_eq!(series.lines().count(), 1 + 2 * 2);
}
