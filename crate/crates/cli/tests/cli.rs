use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use noonmzi::mzi::{coincidence_probability, MziConfig};
use serde_json::Value;
use tempfile::TempDir;

fn noonmzi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noonmzi"))
        .args(args)
        .current_dir(dir)
        .env_remove("NOON_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_manifest(dir: &Path, seed: u64) {
    let o = noonmzi(&["default-manifest", "--seed", &seed.to_string()], dir);
    assert!(o.status.success());
    fs::write(dir.join("run.json"), &o.stdout).unwrap();
}

fn simulated(seed: u64) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path(), seed);
    let o = noonmzi(&["simulate", "--manifest", "run.json", "--out", "sweep.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    dir
}

fn fit_json(dir: &Path, harmonic: &str) -> Value {
    let o = noonmzi(&["fit", "sweep.csv", "--harmonic", harmonic], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn simulate_writes_all_artifacts() {
    let dir = simulated(3);
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    assert_eq!(lines.next(), Some("concentration_pct,exposure,A1,A2,B1,B2,AB,CD,AC,BD"));
    assert_eq!(lines.count(), 15);
    let hom = fs::read_to_string(dir.path().join("sweep.hom.csv")).unwrap();
    assert_eq!(hom.lines().next(), Some("delay,coincidences"));
    assert_eq!(hom.lines().count(), 62);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["plan"]["seed"], 3);
}

#[test]
fn simulate_is_deterministic() {
    let dir = simulated(11);
    let o = noonmzi(&["simulate", "--manifest", "run.json", "--out", "again.csv"], dir.path());
    assert!(o.status.success());
    let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("sweep.csv"), read("again.csv"));
    assert_eq!(read("sweep.hom.csv"), read("again.hom.csv"));
    assert_eq!(read("sweep.manifest.json"), read("again.manifest.json"));
}

#[test]
fn seed_variable_overrides_manifest() {
    let dir = simulated(11);
    let o = Command::new(env!("CARGO_BIN_EXE_noonmzi"))
        .args(["simulate", "--manifest", "run.json", "--out", "seeded.csv"])
        .current_dir(dir.path())
        .env("NOON_SEED", "12")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_ne!(fs::read(dir.path().join("sweep.csv")).unwrap(), fs::read(dir.path().join("seeded.csv")).unwrap());
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("seeded.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["plan"]["seed"], 12);

    let o = Command::new(env!("CARGO_BIN_EXE_noonmzi"))
        .args(["simulate", "--manifest", "run.json", "--out", "x.csv"])
        .current_dir(dir.path())
        .env("NOON_SEED", "twelve")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_manifests_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path(), 0);
    let good = fs::read_to_string(dir.path().join("run.json")).unwrap();

    fs::write(dir.path().join("zero.json"), good.replace("\"tau1\": 0.61", "\"tau1\": 0.0")).unwrap();
    let o = noonmzi(&["simulate", "--manifest", "zero.json", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau1"), "{}", stderr(&o));

    fs::write(dir.path().join("missing.json"), good.replace("\"dn_dc\": 0.00179,", "")).unwrap();
    let o = noonmzi(&["simulate", "--manifest", "missing.json", "--out", "x.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dn_dc"), "{}", stderr(&o));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    write_manifest(dir.path(), 0);
    let o = noonmzi(&["simulate", "--manifest", "run.json", "--out", "no/such/dir/sweep.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = noonmzi(&["simulate", "--manifest", "absent.json", "--out", "sweep.csv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fit_two_photon_fringe() {
    let dir = simulated(5);
    let report = fit_json(dir.path(), "2");
    let v = report["fit"]["visibility"].as_f64().unwrap();
    assert!((0.8..=0.95).contains(&v), "V = {v}");
    assert_eq!(report["harmonic"], 2);
    assert_eq!(report["exceeds_supersensitivity_threshold"], true);
    assert_eq!(report["sha256"].as_str().unwrap().len(), 64);
    let slope = report["regression"]["slope"].as_f64().unwrap();
    let err = report["regression"]["slope_err"].as_f64().unwrap();
    assert!((slope - 1.79e-3).abs() <= 4.0 * err, "{slope} +/- {err}");
    assert_eq!(report["points"].as_array().unwrap().len(), 15);
}

#[test]
fn fit_singles_fringe() {
    let dir = simulated(5);
    let report = fit_json(dir.path(), "1");
    let v = report["fit"]["visibility"].as_f64().unwrap();
    assert!((v - 0.97).abs() < 0.01, "V = {v}");
    let single = report["fit"]["alpha"].as_f64().unwrap();
    let double = fit_json(dir.path(), "2")["fit"]["alpha"].as_f64().unwrap();
    assert!((single / double - 1.0).abs() < 0.01);
}

#[test]
fn fit_writes_to_file_and_digests_input() {
    let dir = simulated(5);
    let o = noonmzi(&["fit", "sweep.csv", "--harmonic", "2", "--out", "fit.json"], dir.path());
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let from_file: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(from_file, fit_json(dir.path(), "2"));

    let other = simulated(6);
    assert_ne!(fit_json(other.path(), "2")["sha256"], from_file["sha256"]);
}

#[test]
fn fit_rejects_bad_input() {
    let dir = simulated(5);
    fs::write(dir.path().join("empty.csv"), "").unwrap();
    let o = noonmzi(&["fit", "empty.csv", "--harmonic", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines: Vec<&str> = sweep.lines().collect();
    lines[6] = "2.5,1,12,oops,3,4,5,6,7,8";
    fs::write(dir.path().join("bad.csv"), lines.join("\n")).unwrap();
    let o = noonmzi(&["fit", "bad.csv", "--harmonic", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));

    let o = noonmzi(&["fit", "sweep.csv", "--harmonic", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = noonmzi(&["fit", "absent.csv", "--harmonic", "2"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sense_map_lossless_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = noonmzi(&["sense-map", "--grid", "51", "--out", "map.csv"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("(0.50, 0.50)"), "{}", stdout(&o));
    let map = fs::read_to_string(dir.path().join("map.csv")).unwrap();
    assert_eq!(map.lines().count(), 52);
    assert!(map.lines().all(|l| l.split(',').count() == 52));
}

#[test]
fn sense_map_grid_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = noonmzi(&["sense-map", "--grid", "3"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 4));
    assert_eq!(rows[0][1..], ["0", "0.5", "1"]);

    let o = noonmzi(&["sense-map", "--grid", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

// Dense-grid maximum of P'^2 / (P (1 - P)) with central differences.
fn fisher_oracle(config: &MziConfig) -> f64 {
    let h = 1e-6;
    (0..200_000)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / 200_000.0;
            let p = coincidence_probability(config, phi);
            let d = (coincidence_probability(config, phi + h) - coincidence_probability(config, phi - h)) / (2.0 * h);
            if p > 1e-9 && p < 1.0 - 1e-9 {
                d * d / (p * (1.0 - p))
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
        .sqrt()
}

#[test]
fn sense_map_lossy_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let o = noonmzi(&["sense-map", "--tau1", "0.61", "--grid", "51", "--out", "map.csv"], dir.path());
    assert!(o.status.success());
    let line = stdout(&o);
    assert!(line.contains("(0.50, 0.50)") && line.contains("S = 1.347716"), "{line}");
    let oracle = fisher_oracle(&MziConfig::new(0.5, 0.5, 0.61, 1.0, 0.0).unwrap());
    assert!((oracle - 1.347716).abs() < 1e-5, "oracle {oracle}");
}

#[test]
fn limits_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = noonmzi(&["limits", "--v", "0.82", "--n", "2"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("exceeds supersensitivity threshold: true"));
    assert!(text.contains("SQL delta-phi: 0.7071"));
    assert!(text.contains("Heisenberg delta-phi: 0.5000"));

    let o = noonmzi(&["limits", "--v", "0.70"], dir.path());
    assert!(stdout(&o).contains("exceeds supersensitivity threshold: false"));
}

#[test]
fn acceptance_table_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let o = noonmzi(&["make-paper-numbers", "--format", "json", "--seed", "7"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<Value> = serde_json::from_slice(&o.stdout).unwrap();
    let mut criteria: Vec<u64> = rows.iter().map(|r| r["criterion"].as_u64().unwrap()).collect();
    criteria.dedup();
    assert_eq!(criteria, (1..=11).collect::<Vec<u64>>());

    let again = noonmzi(&["make-paper-numbers", "--format", "json", "--seed", "7"], dir.path());
    assert_eq!(o.stdout, again.stdout);
}
