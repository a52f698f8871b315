use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn burgulence(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burgulence")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL_SPECTRUM: &str = r#"
experiment = "spectrum"
ensemble_size = 2
[solver]
nu = 0.02
n_modes = 128
[bracket]
t_start = 1.0
width = 1.0
blocks = 2
[fit]
spectrum = [2.0, 30.0]
"#;

#[test]
fn list_names_every_experiment() {
    let out = burgulence(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["spectrum", "structure", "four-fifths", "kruzkov", "entropy-stats", "mixing", "scaling-symmetry"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn defaults_run_as_a_config_file() {
    let out = burgulence(&["show-defaults"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let text = String::from_utf8(out.stdout).unwrap().replace("ensemble_size = 16", "ensemble_size = 1");
    let text = text.replace("experiment = \"spectrum\"", "experiment = \"scaling-symmetry\"");
    let cfg = write_config(dir.path(), &text);
    let out = burgulence(&["run", &cfg, "--output-dir", dir.path().join("o").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("o/scaling.csv")).unwrap();
    let worst = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "scaling symmetry error {worst}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"spectrum\"\n[forcing]\namplitude = 0.0\n");
    let out = burgulence(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("B₀"));
    let cfg = write_config(dir.path(), "experiment = \"spectra\"\n");
    let out = burgulence(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("four-fifths"));
    let out = burgulence(&["run", &cfg, "--preset", "huge"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three_and_records_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = \"kruzkov\"\nensemble_size = 1\n[solver]\nnoise_mode = \"exact-ou\"\n");
    let o = dir.path().join("o");
    let out = burgulence(&["run", &cfg, "--output-dir", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(o.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["failure"].as_str().unwrap().contains("shared"));
}

#[test]
fn spectrum_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SPECTRUM);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        let out = burgulence(&["--threads", "2", "run", &cfg, "--seed", "11", "--output-dir", o.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["spectrum.csv", "fits.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let fits = fs::read_to_string(a.join("fits.csv")).unwrap();
    let row = fits.lines().find(|l| l.starts_with("spectrum,")).expect("spectrum fit row");
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[5], "ok");
    let exponent: f64 = cells[1].parse().unwrap();
    assert!(exponent.is_finite() && exponent < 0.0, "exponent {exponent}");
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert!(manifest["config"].as_str().unwrap().contains("master_seed = 11"));
    let other = dir.path().join("c");
    burgulence(&["run", &cfg, "--seed", "12", "--output-dir", other.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("spectrum.csv")).unwrap(), fs::read(other.join("spectrum.csv")).unwrap());
}
