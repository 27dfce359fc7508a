use dirac_congruence::cli_harness::{InitialSpec, RunConfig};
use dirac_congruence::reference_solver::{write_field, SpinorField};
use num_complex::Complex64 as C64;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac-congruence")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, cfg: &RunConfig) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, cfg.to_toml().unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["verify", "--deterministic", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let r = report(dir.path());
    assert_eq!(r["subcommand"], "verify");
    assert_eq!(r["passed"], true);
    assert!(r.get("wall_time_s").map_or(true, |v| v.is_null()));
}

#[test]
fn invalid_configurations_exit_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::plane_wave_demo();
    cfg.schema_version = 99;
    let path = write_config(dir.path(), &cfg);
    let o = bin(&["planewave-demo", "--config", &path]);
    assert_eq!(code(&o), 2, "{}", text(&o));

    std::fs::write(dir.path().join("extra.toml"), RunConfig::plane_wave_demo().to_toml().unwrap() + "\nsurprise = 1\n").unwrap();
    let o = bin(&["planewave-demo", "--config", dir.path().join("extra.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", text(&o));

    let o = bin(&["planewave-demo", "--dt", "1.0", "--print-config"]);
    assert_eq!(code(&o), 2, "{}", text(&o));
}

#[test]
fn printed_configuration_parses_back() {
    let o = bin(&["planewave-demo", "--labels-per-axis", "4", "--angle-nodes", "2,4,8", "--print-config"]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let cfg = RunConfig::from_toml(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg.labels.per_axis, 4);
    assert_eq!(cfg.labels.angle_nodes, [2, 4, 8]);
}

fn small_demo(out: &Path) -> Output {
    bin(&[
        "planewave-demo",
        "--deterministic",
        "--labels-per-axis",
        "2",
        "--angle-nodes",
        "4,4,8",
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let names = ["report.json", "bundle_R.bin", "bundle_I.bin", "reconstructed.bin"];
    let o = small_demo(dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert_eq!(report(dir.path())["passed"], true);
    let first: Vec<Vec<u8>> = names.iter().map(|n| std::fs::read(dir.path().join(n)).unwrap()).collect();
    let o = small_demo(dir.path());
    assert_eq!(code(&o), 0, "{}", text(&o));
    for (name, bytes) in names.iter().zip(&first) {
        assert!(std::fs::read(dir.path().join(name)).unwrap() == *bytes, "{name} differs");
    }
}

#[test]
fn trajectories_then_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut cfg = RunConfig::plane_wave_demo();
    cfg.labels.per_axis = 2;
    cfg.labels.angle_nodes = [2, 2, 4];
    cfg.time.t_end = 0.5;
    let path = write_config(dir.path(), &cfg);
    let o = bin(&["evolve-traj", "--config", &path, "--out", out]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    assert!(dir.path().join("bundle_R.csv").exists());
    let o = bin(&["reconstruct", "--config", &path, "--out", out]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let r = report(dir.path());
    assert!(r["artifacts"].as_array().unwrap().iter().any(|a| a == "reconstructed.bin"));
}

#[test]
fn reconstruct_without_bundles_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["reconstruct", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", text(&o));
}

fn file_config(dir: &Path, field_path: &Path) -> String {
    let mut cfg = RunConfig::default();
    cfg.grid.n = 8;
    cfg.grid.l = 8.0;
    cfg.initial = InitialSpec::File { path: field_path.to_path_buf() };
    write_config(dir, &cfg)
}

#[test]
fn unnormalised_input_fields_are_rescaled_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { grid: dirac_congruence::cli_harness::config::GridSpec { n: 8, l: 8.0 }, ..RunConfig::default() };
    let field = SpinorField::from_fn(cfg.grid(), cfg.physics, |x| {
        let mut v = dirac_congruence::angular_algebra::SpinCoefficients::zeros();
        v[0] = C64::from(3.0 + (x[0] * 0.785).cos());
        v
    });
    let fp = dir.path().join("psi.bin");
    write_field(&fp, &field).unwrap();
    let path = file_config(dir.path(), &fp);
    let o = bin(&["evolve-ref", "--config", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o));
    let r = report(dir.path());
    let warnings = r["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().starts_with("NormalizationWarning")), "{warnings:?}");
}

#[test]
fn corrupt_input_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let fp = dir.path().join("psi.bin");
    std::fs::write(&fp, b"definitely not a spinor field").unwrap();
    let path = file_config(dir.path(), &fp);
    let o = bin(&["evolve-ref", "--config", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", text(&o));
}
