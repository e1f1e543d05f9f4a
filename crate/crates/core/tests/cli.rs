use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_burgers-lab"));
    c.env_remove("BURGERS_LAB_OUTPUT_DIR");
    c
}

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.toml"));
    let out = dir.join("out").join(name);
    std::fs::write(&p, format!("name = \"{name}\"\nseed = 1\noutput_dir = {:?}\n\n{body}", out.display().to_string())).unwrap();
    p
}

const SMALL_FLUCTUATION: &str = r#"[scenario]
kind = "fluctuation"
nu_viscosity = 0.2
start_time = 0.5
end_time = 1.0
steps = 200
paths = 400
variance_cap = CAP

[scenario.source]
kind = "khokhlov"
length = 1.0

[scenario.rho0]
mean = 0.0
std = 0.5

[scenario.rho_final]
mean = 0.0
std = 0.3
"#;

#[test]
fn list_shows_every_scenario() {
    let o = bin().arg("list").output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let kinds: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ') && l.contains(':')).collect();
    assert_eq!(kinds.len(), 7, "{text}");
    assert!(text.contains("kind = \"escape_sweep\""));
}

#[test]
fn shipped_specs_validate() {
    for e in std::fs::read_dir(specs()).unwrap() {
        let p = e.unwrap().path();
        let o = bin().arg("validate").arg(&p).output().unwrap();
        assert_eq!(code(&o), 0, "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn config_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(code(&bin().arg("validate").arg(&empty).output().unwrap()), 64);
    let extra = write_spec(dir.path(), "extra", "colour = \"red\"\n[scenario]\nkind = \"anomaly_suite\"\n");
    assert_eq!(code(&bin().arg("run").arg(&extra).output().unwrap()), 64);
    assert_eq!(code(&bin().arg("run").arg(dir.path().join("missing.toml")).output().unwrap()), 74);
    assert_eq!(code(&bin().arg("frobnicate").output().unwrap()), 64);
}

#[test]
fn run_writes_artifacts_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "fl", &SMALL_FLUCTUATION.replace("CAP", "1e6"));
    let o = bin().args(["--seed", "42", "--jobs", "2", "run"]).arg(&spec).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out/fl");
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["exit_code"], 0);
    let samples = std::fs::read_to_string(out.join("w_samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 401);
    assert!(out.join("summary.json").exists());
}

#[test]
fn failed_invariant_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "fl", &SMALL_FLUCTUATION.replace("CAP", "1e-9"));
    assert_eq!(code(&bin().arg("run").arg(&spec).output().unwrap()), 2);
}

#[test]
fn missed_tolerance_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"[scenario]
kind = "limit_measures"
length_scale = 1.0
data_time = 0.1
x_position = 0.0
s_time = 0.5
t_time = 1.0
viscosities = [1.0, 0.8]
shock_frame_fractions = [0.25]
search_half_width = 3.0
"#;
    let spec = write_spec(dir.path(), "lm", body);
    assert_eq!(code(&bin().arg("run").arg(&spec).output().unwrap()), 3);
}

#[test]
fn output_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "fl", &SMALL_FLUCTUATION.replace("CAP", "1e6"));
    let target = dir.path().join("elsewhere");
    let o = bin().env("BURGERS_LAB_OUTPUT_DIR", &target).arg("run").arg(&spec).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("w_samples.csv").exists());
    assert!(!dir.path().join("out/fl").exists());
}
