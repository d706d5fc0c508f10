use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qjump::config::parse_config;

fn qjump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qjump")).args(args).output().expect("run qjump")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

const TWO_LEVEL: &str = "model = two_level\nA = 3\nt_total = 1500\nn_traj = 2\nbase_seed = 3\n";

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_analyze_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_LEVEL);
    let sim = dir.path().join("sim");
    let out = qjump(&["simulate", "--config", s(&cfg), "--out", s(&sim)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let manifest = fs::read_to_string(sim.join("manifest.txt")).unwrap();
    assert!(manifest.contains("# output = traj_0001.csv"));
    let resolved = parse_config(&manifest).unwrap();
    assert_eq!(resolved.base_seed, 3);
    assert_eq!(resolved.n_traj, 2);

    let traj = fs::read_to_string(sim.join("traj_0000.csv")).unwrap();
    assert!(traj.lines().any(|l| l == "t,n"));
    assert!(traj.contains("# base_seed = 3"));

    let ana = dir.path().join("ana");
    let out = qjump(&[
        "analyze",
        "--config",
        s(&cfg),
        "--out",
        s(&ana),
        s(&sim.join("traj_0000.csv")),
        s(&sim.join("traj_0001.csv")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("trajectories = 2"));
    assert!(ana.join("histogram.csv").exists());

    let fit = dir.path().join("fit");
    let out = qjump(&[
        "fit",
        "--config",
        s(&cfg),
        "--out",
        s(&fit),
        s(&ana.join("histogram.csv")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(fit.join("fit.txt")).unwrap();
    assert!(text.contains("model = two_state"));
    assert!(text.contains("model = exponential"));
}

#[test]
fn seed_flag_overrides_config_and_threads_do_not_matter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TWO_LEVEL);
    let run = |name: &str, extra: &[&str]| {
        let out_dir = dir.path().join(name);
        let mut args = vec!["simulate", "--config", s(&cfg), "--out", s(&out_dir)];
        args.extend_from_slice(extra);
        let out = qjump(&args);
        assert!(out.status.success());
        fs::read(out_dir.join("traj_0001.csv")).unwrap()
    };
    let base = run("a", &["--threads", "1"]);
    assert_eq!(base, run("b", &["--threads", "3"]));
    assert_ne!(base, run("c", &["--seed", "4"]));
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");

    let bad = write_config(dir.path(), "model = two_level\nbogus = 1\n");
    assert_eq!(qjump(&["simulate", "--config", s(&bad), "--out", s(&out_dir)]).status.code(), Some(2));

    let missing = dir.path().join("nope.cfg");
    assert_eq!(qjump(&["simulate", "--config", s(&missing), "--out", s(&out_dir)]).status.code(), Some(3));

    let three = write_config(dir.path(), "model = three_level\n");
    assert_eq!(
        qjump(&["phase-diagram", "--config", s(&three), "--out", s(&out_dir)]).status.code(),
        Some(2)
    );

    // a flat signal has no jumps: analysis error, but the summary is still written
    let cfg = write_config(dir.path(), "model = two_level\nmu = 0.5\nalpha = 0.1\nbin_width = 5\n");
    let flat = dir.path().join("flat.csv");
    let rows: String = (0..100).map(|i| format!("{i},0.1\n")).collect();
    fs::write(&flat, format!("t,n\n{rows}")).unwrap();
    let out = qjump(&["analyze", "--config", s(&cfg), "--out", s(&out_dir), s(&flat)]);
    assert_eq!(out.status.code(), Some(5));
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("intervals = 0"));
}

#[test]
fn phase_diagram_and_noise_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model = two_level\nt_total = 100\nphase_delta = 10:30:5\nphase_omega = 1,2\n",
    );
    let out_dir = dir.path().join("out");
    assert!(qjump(&["phase-diagram", "--config", s(&cfg), "--out", s(&out_dir)]).status.success());
    let table = fs::read_to_string(out_dir.join("phase_diagram.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "delta,omega,stable_count");
    assert_eq!(rows.len(), 1 + 5 * 2);

    assert!(qjump(&["noise-dump", "--config", s(&cfg), "--out", s(&out_dir), "--index", "2"]).status.success());
    let noise = fs::read_to_string(out_dir.join("noise_0002.csv")).unwrap();
    assert!(noise.contains("# trajectory = 2"));
    let last = noise.lines().last().unwrap();
    assert!(last.starts_with("100,"));
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model = two_level\nA = 3\nt_total = 1000\nn_traj = 1\nsweep.Delta = 18,18.5\n",
    );
    let out_dir = dir.path().join("sweep");
    let out = qjump(&["sweep", "--config", s(&cfg), "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "param,value,C,window_count,intervals,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("Delta,18,"));
    assert!(out_dir.join("point_001_summary.txt").exists());
}
