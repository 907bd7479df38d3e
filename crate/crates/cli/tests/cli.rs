use std::path::Path;
use std::process::Command;

fn grem() -> Command {
    Command::new(env!("CARGO_BIN_EXE_grem"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "N = 10\np = 0.5\na = 0.2\nseed = 7\nout = \"{}\"\n{body}",
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn params_run_succeeds_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "beta = 1.0\nexperiment = \"params\"\n");
    let out = grem().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((summary["beta_star"].as_f64().unwrap() - 1.1774100).abs() < 1e-6);
    assert!(dir.path().join("out/manifest.json").exists());
}

#[test]
fn validation_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "beta = -1.0\nexperiment = \"params\"\n");
    let out = grem().arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let cfg = write_config(
        dir.path(),
        "beta = 1.0\nexperiment = \"params\"\nbogus = 1\n",
    );
    assert_eq!(
        grem()
            .arg("--config")
            .arg(&cfg)
            .output()
            .unwrap()
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn budget_exhaustion_exits_two_with_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "beta = 1.0\nexperiment = \"simulate\"\nhorizon = 1e12\n",
    );
    let out = grem()
        .arg("--config")
        .arg(&cfg)
        .args(["--budget", "50"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("out/trajectory-0000.json").exists());
}

#[test]
fn manifest_replay_reproduces_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "beta = 1.0\nexperiment = \"occupation\"\nreplicas = 3\nhorizon = 5.0\n",
    );
    assert!(grem()
        .arg("--config")
        .arg(&cfg)
        .args(["--workers", "2"])
        .output()
        .unwrap()
        .status
        .success());
    let replay = dir.path().join("replay");
    let status = grem()
        .arg("--manifest")
        .arg(dir.path().join("out/manifest.json"))
        .arg("--out")
        .arg(&replay)
        .status()
        .unwrap();
    assert!(status.success());
    let a = std::fs::read(dir.path().join("out/occupation.csv")).unwrap();
    let b = std::fs::read(replay.join("occupation.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn format_flag_switches_to_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "experiment = \"kemperman\"\nbeta = 1.0\nns = [4]\nqs = [0.2]\n",
    );
    assert!(grem()
        .arg("--config")
        .arg(&cfg)
        .args(["--format", "json"])
        .output()
        .unwrap()
        .status
        .success());
    assert!(dir.path().join("out/kemperman.json").exists());
}
