use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_horocell"));
    c.env("HOROCELL_LOG", "error");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(config: &Path, out: &Path) -> Output {
    bin().args(["run", "--config"]).arg(config).arg("--out-dir").arg(out).output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(o.stderr.trim_ascii()).unwrap_or_else(|_| panic!("stderr is not JSON: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn sample_brownian_csv_is_reproducible() {
    let cfg = configs().join("sample_brownian_sphere2.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = run_config(&cfg, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = std::fs::read(a.path().join("sample_brownian_sphere2.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("sample_brownian_sphere2.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b);
    let header = String::from_utf8_lossy(&csv_a).lines().next().unwrap().to_string();
    assert_eq!(header, "path,step,t,chart_id,x0,x1,u00,u01,u10,u11,dW0,dW1");

    let ra = read_json(&a.path().join("sample_brownian_sphere2.json"));
    let rb = read_json(&b.path().join("sample_brownian_sphere2.json"));
    assert_eq!(ra["values"], rb["values"]);
    assert_eq!(ra["config_hash"], rb["config_hash"]);
}

#[test]
fn unknown_manifold_is_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"manifold": "klein-bottle", "seed": 1, "operation": {"name": "sectional-curvature",
            "point": {"chart": 0, "coords": [0.0, 0.0]}, "a": [1.0, 0.0], "b": [0.0, 1.0]}}"#,
    )
    .unwrap();
    let o = run_config(&cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error_class"], "ConfigInvalid");
}

#[test]
fn unknown_key_is_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"manifold": "sphere2", "seed": 1, "colour": "blue", "operation": {"name": "sectional-curvature",
            "point": {"chart": 0, "coords": [0.0, 0.0]}, "a": [1.0, 0.0], "b": [0.0, 1.0]}}"#,
    )
    .unwrap();
    let o = run_config(&cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_operation_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("open.json");
    std::fs::write(
        &cfg,
        r#"{"manifold": "sphere2", "seed": 1, "operation": {"name": "holonomy",
            "frame": {"base": {"chart": 0, "coords": [0.0, 0.0]}},
            "path": [{"chart": 0, "coords": [0.0, 0.0]}, {"chart": 0, "coords": [0.1, 0.0]}]}}"#,
    )
    .unwrap();
    let o = run_config(&cfg, dir.path());
    assert_eq!(o.status.code(), Some(3));
    let err = stderr_json(&o);
    assert_eq!(err["error_class"], "OperationFailed");
    assert!(err["message"].as_str().unwrap().contains("OpenLoop"));
}

#[test]
fn sphere_curvature_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("k.json");
    std::fs::write(
        &cfg,
        r#"{"manifold": "sphere2", "seed": 0, "operation": {"name": "sectional-curvature",
            "point": {"chart": 0, "coords": [0.4, -0.3]}, "a": [1.0, 0.0], "b": [0.3, 1.0]}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert!(run_config(&cfg, &out).status.success());
    let r = read_json(&out.join("k.json"));
    assert!((r["values"].as_f64().unwrap() - 1.0).abs() < 1e-3);
    assert_eq!(r["operation"], "sectional-curvature");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn wdm_euclidean_mean_passes_gaussian_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(&configs().join("wdm_euclidean.json"), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("wdm_euclidean.json"));

    // N(Σ w_i x_i / Σ w_i, T / Σ w_i · I) for points (0,0), (2,0), (0,2), weights 1, 2, 1, T = 1.
    let expected = [1.0, 0.5];
    let var = 0.25;
    let ess = r["diagnostics"]["ess"].as_f64().unwrap();
    let mean = r["values"]["weighted_mean"]["coords"].as_array().unwrap();
    let cov = r["values"]["weighted_covariance"].as_array().unwrap();
    for i in 0..2 {
        let m = mean[i].as_f64().unwrap();
        let se = (var / ess).sqrt();
        assert!((m - expected[i]).abs() < 3.0 * se, "mean[{i}] = {m}");
        let v = cov[i][i].as_f64().unwrap();
        assert!((v / var - 1.0).abs() < 0.1, "var[{i}] = {v}");
    }
    let csv = std::fs::read_to_string(dir.path().join("wdm_euclidean.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "sample,chart_id,x0,x1,log_weight,normalized_weight,hit_defect");
    assert_eq!(lines.count(), 10_000);
}

#[test]
fn verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"manifold": "sphere2", "seed": 5, "operation": {"name": "heat-kernel",
            "from": {"chart": 0, "coords": [0.0, 0.0]}, "to": {"chart": 0, "coords": [0.4, 0.0]},
            "t": 0.5, "n_paths": 500, "n_steps": 50}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert!(run_config(&cfg, &out).status.success());
    let record = out.join("c.json");

    let ok = bin().args(["verify", "--rerun", "--config"]).arg(&cfg).arg("--result").arg(&record).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("reproduced"));

    // Reformatting the config keeps the canonical hash.
    let reformatted: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let pretty = dir.path().join("pretty.json");
    std::fs::write(&pretty, serde_json::to_string_pretty(&reformatted).unwrap()).unwrap();
    let ok = bin().args(["verify", "--config"]).arg(&pretty).arg("--result").arg(&record).output().unwrap();
    assert!(ok.status.success());

    let changed = dir.path().join("changed.json");
    std::fs::write(&changed, std::fs::read_to_string(&cfg).unwrap().replace("\"seed\": 5", "\"seed\": 6")).unwrap();
    let bad = bin().args(["verify", "--config"]).arg(&changed).arg("--result").arg(&record).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("MISMATCH"));
}

#[test]
fn seed_override_changes_values() {
    let cfg = configs().join("sample_brownian_sphere2.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_config(&cfg, a.path()).status.success());
    let o = bin().args(["run", "--seed-override", "8", "--config"]).arg(&cfg).arg("--out-dir").arg(b.path()).output().unwrap();
    assert!(o.status.success());
    let ra = read_json(&a.path().join("sample_brownian_sphere2.json"));
    let rb = read_json(&b.path().join("sample_brownian_sphere2.json"));
    assert_eq!(rb["seed"], 8);
    assert_ne!(ra["values"], rb["values"]);
    assert_eq!(ra["config_hash"], rb["config_hash"]);
}

#[test]
fn bundled_configs_parse_and_run() {
    for name in ["commutator_defect_sphere2.json", "conv_horizontal_sphere2.json", "heat_kernel_sphere2.json"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run_config(&configs().join(name), dir.path());
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn flat_reductions_suite_passes() {
    let o = bin().args(["--threads", "1", "suite", "flat-reductions"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("criterion  1 PASS"));
}

#[test]
fn commutator_suite_emits_table() {
    let o = bin().args(["suite", "theorem1"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    let header = stdout.lines().position(|l| l.contains("bracket_term")).expect("table header");
    let rows: Vec<&str> = stdout.lines().skip(header + 1).take(3).collect();
    for (row, r) in rows.iter().zip(["0.05", "0.1", "0.2"]) {
        assert_eq!(row.split_whitespace().next(), Some(r));
    }
}

#[test]
fn unknown_suite_exits_two() {
    let o = bin().args(["suite", "everything-else"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error_class"], "UnknownSuite");
}

#[test]
fn christoffel_mutation_fails_curvature_checks() {
    let o = bin().args(["suite", "sphere-oracles", "--mutation", "christoffel-sign-flip"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("criterion  2 FAIL"));
    assert!(stdout.contains("criterion  3 FAIL"));
}
