use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn fixture(name: &str) -> Value {
    serde_json::from_slice(&fs::read(fixtures().join(name)).unwrap()).unwrap()
}

fn write_config(dir: &TempDir, config: &Value) -> PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    path
}

fn run(subcommand: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magvirial"))
        .arg(subcommand)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("MAGVIRIAL_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let k = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k]).collect()
}

fn summary(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn multiplier_table_row_at_unit_radius() {
    let dir = TempDir::new().unwrap();
    let mut config = fixture("small.json");
    config["estimate"]["R_set"] = json!([1.0]);
    let path = write_config(&dir, &config);
    let out = dir.path().join("out");
    let o = run("multiplier-table", &path, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = out.join("multiplier_R1.csv");
    let r = column(&table, "r");
    let phi_p = column(&table, "phi_p");
    let k = r.iter().position(|r| *r == 1.0).unwrap();
    assert!((phi_p[k] - 17.0 / 15.0).abs() < 1e-15);
    assert_eq!(summary(&out)["passed"], json!(true));
}

#[test]
fn malformed_json_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, "{\"grid\": {\"n\": 3,").unwrap();
    let out = dir.path().join("out");
    let o = run("simulate", &path, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn invalid_fields_are_named() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cases = [
        (
            json!({"time": {"horizon": 0.1, "dt": 0.0, "snapshot_stride": 1}}),
            "time",
        ),
        (
            json!({"grid": {"n": 3, "extent": 4.0, "points": "eight"}}),
            "grid.points",
        ),
        (
            json!({"grid": {"n": 3, "extent": 4.0, "points": 9}}),
            "grid",
        ),
        (
            json!({"data": {"type": "gaussian", "center": [0.0, 0.0], "width": 1.0, "momentum": [0.0, 0.0]}}),
            "data",
        ),
        (json!({"multiplier": {"M": 0.5}}), "multiplier"),
        (json!({"solver": {"tolerance": -1.0}}), "solver.tolerance"),
        (
            json!({"grid": {"n": 3, "extent": 4.0, "points": 8, "spacing": 1.0}}),
            "grid",
        ),
    ];
    for (patch, path_prefix) in cases {
        let mut config = fixture("small.json");
        for (k, v) in patch.as_object().unwrap() {
            config[k] = v.clone();
        }
        let path = write_config(&dir, &config);
        let o = run("simulate", &path, &out, &[]);
        assert_eq!(o.status.code(), Some(1), "{patch}");
        assert!(
            stderr(&o).contains(&format!("config error: {path_prefix}")),
            "{}",
            stderr(&o)
        );
        assert!(!out.exists());
    }
}

#[test]
fn oracle_comparison_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let config = fixtures().join("small.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run("oracle-compare", &config, &a, &["--threads", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run("oracle-compare", &config, &b, &["--threads", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(summary(&a)["max_distance"].as_f64().unwrap() < 1e-6);
    for file in ["oracle.csv", "oracle.json", "summary.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let manifest: Value =
        serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], json!(3));
    assert_eq!(manifest["dt"], json!(1e-4));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn thread_count_from_environment() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_magvirial"))
        .args(["assumptions-check", "--config"])
        .arg(fixtures().join("small.json"))
        .arg("--out")
        .arg(&out)
        .env("MAGVIRIAL_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["threads"], json!(2));
}

#[test]
fn oracle_refuses_large_grids() {
    let dir = TempDir::new().unwrap();
    let mut config = fixture("small.json");
    config["grid"]["points"] = json!(18);
    let path = write_config(&dir, &config);
    let out = dir.path().join("out");
    let o = run("oracle-compare", &path, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dense limit"));
    assert!(!out.exists());
}

#[test]
fn failed_assumptions_exit_two() {
    let dir = TempDir::new().unwrap();
    let mut config = fixture("small.json");
    config["potential"]["electric"] = json!({"type": "zero"});
    let path = write_config(&dir, &config);
    let out = dir.path().join("out");
    let o = run("assumptions-check", &path, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(out.join("assumptions.json").exists());
    let o = run(
        "smoothing-estimate",
        &path,
        &dir.path().join("estimate"),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn boundary_breach_exits_three() {
    let dir = TempDir::new().unwrap();
    let mut config = fixture("small.json");
    config["data"]["center"] = json!([3.5, 0.0, 0.0]);
    config["solver"] = json!({});
    let path = write_config(&dir, &config);
    let out = dir.path().join("out");
    let o = run("simulate", &path, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("boundary mass"));
    assert!(!out.exists());
}

#[test]
fn repulsive_rhs_needs_repulsive_potential() {
    let dir = TempDir::new().unwrap();
    let mut config = fixture("small.json");
    config["estimate"]["use_repulsive_rhs"] = json!(true);
    let path = write_config(&dir, &config);
    let o = run("smoothing-estimate", &path, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("estimate.use_repulsive_rhs"));
}

#[test]
fn harmonic_virial_check() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run("virial-check", &fixtures().join("harmonic.json"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let residual = column(&out.join("virial.csv"), "residual");
    assert!(!residual.is_empty());
    assert!(residual.iter().all(|r| *r < 1e-3));
    assert_eq!(summary(&out)["passed"], json!(true));
}

#[test]
fn smoothing_columns_are_nonnegative() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(
        "smoothing-estimate",
        &fixtures().join("small.json"),
        &out,
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&out.join("estimate.csv"));
    assert_eq!(
        header,
        [
            "R",
            "term_grad",
            "term_tan",
            "term_surface",
            "lhs_total",
            "rhs_norm2",
            "ratio",
            "term_surface_alt"
        ]
    );
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().flatten().all(|v| *v >= 0.0));
}

#[test]
fn simulate_and_gauge_outputs() {
    let dir = TempDir::new().unwrap();
    let mut config = fixture("small.json");
    config["output"]["formats"] = json!(["csv", "binary"]);
    let path = write_config(&dir, &config);
    let out = dir.path().join("sim");
    let o = run("simulate", &path, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(column(&out.join("snapshots.csv"), "t").len(), 11);
    assert_eq!(column(&out.join("diagnostics.csv"), "step").len(), 1000);
    assert_eq!(
        fs::metadata(out.join("snapshots/u_00010.bin"))
            .unwrap()
            .len(),
        512 * 16
    );
    assert_eq!(
        fs::read_to_string(out.join("snapshots/u_00000.csv"))
            .unwrap()
            .lines()
            .count(),
        513
    );

    let out = dir.path().join("gauge");
    let o = run("gauge-check", &path, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(column(&out.join("gauge.csv"), "field_change")
        .iter()
        .all(|v| *v <= 1e-10));

    let out = dir.path().join("hardy");
    let o = run("hardy-check", &path, &out, &["--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&out);
    assert_eq!(s["passed"], json!(true));
    assert_eq!(s["states"], json!(11 + 4));
}

#[test]
fn recorded_references() {
    let entries: Vec<Value> =
        serde_json::from_slice(&fs::read(fixtures().join("reference/tolerances.json")).unwrap())
            .unwrap();
    let dir = TempDir::new().unwrap();
    for (k, e) in entries.iter().enumerate() {
        let out = dir.path().join(k.to_string());
        let config = fixtures().join(e["config"].as_str().unwrap());
        let o = run(e["subcommand"].as_str().unwrap(), &config, &out, &[]);
        assert!(o.status.success(), "{}", stderr(&o));
        let (header, got) = read_csv(&out.join(e["output"].as_str().unwrap()));
        let reference = e["reference"].as_str().unwrap();
        let (ref_header, expected) = read_csv(&fixtures().join("reference").join(reference));
        assert_eq!(header, ref_header, "{reference}");
        assert_eq!(got.len(), expected.len(), "{reference}");
        let (rtol, atol) = (e["rtol"].as_f64().unwrap(), e["atol"].as_f64().unwrap());
        for (a, b) in got.iter().flatten().zip(expected.iter().flatten()) {
            assert!(
                (a - b).abs() <= atol + rtol * b.abs(),
                "{reference}: {a} vs {b}"
            );
        }
    }
}
