use std::path::Path;
use std::process::{Command, Output};

const VORTEX: &str = "[lattice]\ndim = 2\nextent = 6\nspacing = 0.1\n\n[vortex]\neps = 1\n";

fn vortexlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortexlab")).args(args).env("VORTEXLAB_THREADS", "1").output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_flag_is_rejected() {
    let out = vortexlab(&["solve-vortex", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!vortexlab(&["no-such-command"]).status.success());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[lattice]\ndim = 2\nextent 6\n");
    let out = vortexlab(&["solve-vortex", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let missing = vortexlab(&["solve-vortex", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_set = vortexlab(&["solve-vortex", "--config", &cfg, "--set", "novalue"]);
    assert_eq!(bad_set.status.code(), Some(2));
}

#[test]
fn solve_vortex_writes_stamped_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), VORTEX);
    let out_dir = dir.path().join("run");
    let out = vortexlab(&["solve-vortex", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS quantization"));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    let energy = std::fs::read_to_string(out_dir.join("energy.csv")).unwrap();
    let stamp = energy.lines().next().unwrap().strip_prefix("# manifest ").unwrap().to_string();
    assert!(manifest.contains(&stamp));
}

#[test]
fn failed_checks_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), VORTEX);
    let out_dir = dir.path().join("run");
    let out = vortexlab(&[
        "solve-vortex",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "check.quantization_tol=1e-9",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL quantization"));
}

#[test]
fn sweeps_fan_out_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), VORTEX);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = vortexlab(&["solve-vortex", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--sweep", "vortex.eps=1,0.8"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for sweep in ["sweep-000", "sweep-001"] {
        for file in ["energy.csv", "manifest.json", "checks.csv"] {
            let x = std::fs::read(a.join(sweep).join(file)).unwrap();
            let y = std::fs::read(b.join(sweep).join(file)).unwrap();
            assert_eq!(x, y, "{sweep}/{file}");
        }
    }
    let e0 = std::fs::read_to_string(a.join("sweep-000/energy.csv")).unwrap();
    let e1 = std::fs::read_to_string(a.join("sweep-001/energy.csv")).unwrap();
    assert_ne!(e0.lines().next(), e1.lines().next());
}
