use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use zklab::snapshot::write_snapshot;
use zklab::{Grid2D, RealField};

fn zklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zklab")).args(args).output().expect("spawn zklab")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "\
experiment = dispersive-blowup
nx = 64
ny = 64
lx = 32
ly = 32
dt = 0.01
t_end = 1
probe_radius = 6
band_min = 1.5
band_max = 3
";

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "experiment = lp-blowup\nnx = twelve\n");
    let out = zklab(&["run", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let empty = write(dir.path(), "empty.cfg", "");
    let out = zklab(&["run", &empty]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing required keys"));

    let ok = write(dir.path(), "ok.cfg", SMALL);
    assert_eq!(zklab(&["run", &ok, "--override", "nx=48"]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_four() {
    assert_eq!(zklab(&["run", "/nonexistent/cfg"]).status.code(), Some(4));
    assert_eq!(zklab(&["info", "/nonexistent/s.zkf"]).status.code(), Some(4));
}

#[test]
fn divergence_exits_with_three_and_leaves_partial_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "hot.cfg", &format!("{SMALL}k = 2\namplitude = 2000\n"));
    let out_dir = dir.path().join("out");
    let out = zklab(&["run", &cfg, "--out", out_dir.to_str().unwrap(), "--override", "dt=0.05"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["partial"], true);
    assert!(summary["diverged_at"].is_number());
}

#[test]
fn run_writes_artifacts_and_info_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", SMALL);
    let out_dir = dir.path().join("out");
    let out = zklab(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("regularity_series.csv").exists());
    let snap = out_dir.join("snapshot_t01.000.zkf");
    assert!(snap.exists());

    let info = zklab(&["info", snap.to_str().unwrap()]);
    assert!(info.status.success());
    let text = String::from_utf8_lossy(&info.stdout);
    assert!(text.contains("nx = 64") && text.contains("t = 1"), "{text}");
}

#[test]
fn info_on_handwritten_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.zkf");
    let g = Grid2D::new(16, 8, 4.0, 2.0).unwrap();
    write_snapshot(&RealField::zeros(g), 0.25, &p).unwrap();
    let out = zklab(&["info", p.to_str().unwrap()]);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout),
        "nx = 16\nny = 8\nlx = 4\nly = 2\nt = 0.25\n"
    );
    fs::write(&p, b"ZKF2 not a snapshot at all, far too short").unwrap();
    assert_eq!(zklab(&["info", p.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn check_estimates_reports_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = zklab(&["check-estimates", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for kind in ["dispersive_decay", "strichartz", "kato_smoothing", "dual_smoothing", "maximal", "commutator", "leibniz", "interpolation"] {
        let line = text.lines().find(|l| l.starts_with(kind)).unwrap_or_else(|| panic!("{kind} missing"));
        assert_eq!(line.split_whitespace().last(), Some("stable"), "{line}");
    }
    assert!(dir.path().join("estimates.csv").exists());
}
