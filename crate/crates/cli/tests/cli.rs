use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_respotopt");

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = r#"{
  "geometry": { "length": 2.0, "height": 1.0, "nx": 16, "ny": 8 },
  "materials": { "e_s": 1.0, "nu_s": 0.3, "e_r": 0.5, "nu_r": 0.3,
                 "eps_star": [[-0.1, 0.0], [0.0, 0.1]] },
  "objective": { "kind": "blocking_load" },
  "optimizer": { "max_iter": 5 }
}"#;

#[test]
fn version_flag() {
    let out = Command::new(BIN).arg("--version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn run_writes_artifacts_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("result");
    let out = Command::new(BIN)
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in [
        "config.resolved.json",
        "density.csv",
        "density.vtk",
        "density.pgm",
        "convergence.csv",
        "summary.json",
    ] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["objective"], "blocking_load");
    assert_eq!(summary["iterations"], 5);
}

#[test]
fn gradcheck_and_identities_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let g = Command::new(BIN)
        .args([
            "gradcheck",
            cfg.to_str().unwrap(),
            "--probes",
            "8",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(g.status.success(), "{}", String::from_utf8_lossy(&g.stdout));
    assert_eq!(String::from_utf8_lossy(&g.stdout).matches(" ok").count(), 3);
    let i = Command::new(BIN)
        .args(["identities", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(i.status.success(), "{}", String::from_utf8_lossy(&i.stdout));
    assert!(!String::from_utf8_lossy(&i.stdout).contains("FAIL"));
}

#[test]
fn invalid_config_exits_nonzero_naming_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("\"nu_s\": 0.3", "\"nu_s\": 0.55"),
    );
    let out = Command::new(BIN)
        .args(["identities", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("materials.nu_s"));
    let missing = Command::new(BIN)
        .args(["run", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut csv = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("t{threads}"));
        let out = Command::new(BIN)
            .env("RESPOTOPT_THREADS", threads)
            .args([
                "run",
                cfg.to_str().unwrap(),
                "--out",
                out_dir.to_str().unwrap(),
                "-q",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        csv.push(fs::read(out_dir.join("density.csv")).unwrap());
    }
    assert_eq!(csv[0], csv[1]);
}
