use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mixmu::cli::ControllerFile;
use mixmu::config::RunConfig;
use mixmu::synthesis::ParamBounds;

fn mixmu(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixmu"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn uncertainty_without_family_names_missing_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = mixmu(&["uncertainty"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mixmu family"), "{}", stderr(&o));
}

#[test]
fn inverted_bounds_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    let mut b = ParamBounds::around_first_mode(2.0 * PI * 156.0, 2.0 * PI * 179.0, 2, 0.05).unwrap();
    b.omega_c = (b.omega_c.1, b.omega_c.0);
    cfg.synthesis.bounds = Some(b);
    let path = dir.path().join("cfg.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let o = mixmu(&["synth", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("config"), "{}", stderr(&o));
    assert!(!dir.path().join("controller_m31.json").exists());
}

#[test]
fn unknown_variant_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mixmu(&["family"], dir.path()).status.success());
    let o = mixmu(&["uncertainty", "--variant", "m99"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn uncertified_design_exits_nonzero_but_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mixmu(&["family"], dir.path()).status.success());
    let manifest = fs::read_to_string(dir.path().join("family.json")).unwrap();
    assert!(manifest.contains(&RunConfig::default().hash()));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 12);

    let o = mixmu(&["synth", "--variant", "m01"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let c = ControllerFile::load(&dir.path().join("controller_m01.json")).unwrap();
    assert!(!c.certified);
    assert!(c.mu_peak > 1.0);
    let table = fs::read_to_string(dir.path().join("mu_m01.csv")).unwrap();
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert!(lines.next().unwrap().contains(','));
}
