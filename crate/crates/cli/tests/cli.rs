use std::process::{Command, Output};

use qrn_cli::{ExperimentConfig, ExperimentReport, Kind};

fn qrn(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qrn"));
    cmd.args(args).env_remove("QRN_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("qrn runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn slit_with_default_eps_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("slit.cfg");
    std::fs::write(&cfg, "kind = slit\n# eps defaults to 0.04\nz1 = -2\nz2 = 2\nregions = 4\n").unwrap();
    let out = qrn(&["slit", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("id,margin,passed,detail\n"));
    for id in ["slit/theorem1", "slit/theorem2", "slit/theorem3", "slit/corollary1", "slit/theorem4/bounded"] {
        assert!(csv.contains(id), "{id} missing from\n{csv}");
    }
    assert!(!csv.contains(",false,"));
}

#[test]
fn missing_z2_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("slit.cfg");
    std::fs::write(&cfg, "z1 = -2\neps = 0.04\n").unwrap();
    let out = qrn(&["slit", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("z2"));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_keys_and_bad_values_exit_two() {
    assert_eq!(code(&qrn(&["born", "--set", "copiez=10"], &[])), 2);
    assert_eq!(code(&qrn(&["born", "--set", "p1=1.5"], &[])), 2);
    assert_eq!(code(&qrn(&["born", "--config", "/nonexistent/born.cfg"], &[])), 2);
    assert_eq!(code(&qrn(&["born"], &[("QRN_THREADS", "zero")])), 2);
    assert_eq!(code(&qrn(&["frobnicate"], &[])), 2);
}

#[test]
fn failed_check_exits_one() {
    let out = qrn(&["born", "--set", "mean_tol=1e-12", "--set", "spectrum_max=2"], &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("born/mean-frequency"));
}

#[test]
fn same_config_and_seed_give_identical_bytes() {
    let args = ["luders", "--seed", "17", "--set", "trials=10"];
    let a = qrn(&args, &[("QRN_THREADS", "1")]);
    let b = qrn(&args, &[("QRN_THREADS", "2")]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = qrn(&["luders", "--seed", "18", "--set", "trials=10"], &[]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn json_report_round_trips_and_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = qrn(&["pointer", "--format", "json", "--out", path.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let report = ExperimentReport::from_json(&text).unwrap();
    assert_eq!(report.to_json(), text);
    assert_eq!(report.kind, "pointer");
    assert_eq!(report.version, qrn_core::VERSION);
    assert!(report.wall_time_s > 0.0);
    assert_eq!(report.config["g"], "1");
    assert!(!report.config.contains_key("output"));
    assert!(report.records.iter().all(|r| r.passed == (r.margin >= -1e-9)));
}

#[test]
fn evolve_writes_trajectory_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let set = format!("trajectory={}", path.display());
    let out = qrn(&["evolve", "--set", "n=256", "--set", "t_max=1", "--set", &set], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,q_classical,p_classical,q_quantum,p_quantum,gap,energy"));
    assert_eq!(lines.count(), 21);
}

#[test]
fn collapse_exponential_profile() {
    let out = qrn(&["collapse", "--set", "variance=exponential", "--set", "t_max=40", "--set", "tol=1e-6"], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout).unwrap().contains("collapse/exponential-variance"));
}

#[test]
fn templates_are_valid_configs() {
    for kind in Kind::ALL {
        let out = qrn(&["template", kind.name()], &[]);
        assert_eq!(code(&out), 0);
        let mut text = String::from_utf8(out.stdout).unwrap();
        if kind == Kind::Slit {
            text.push_str("z1 = -1\nz2 = 1\n");
        }
        ExperimentConfig::from_text(kind, &text).unwrap();
    }
}

#[test]
fn selftest_bodies_do_not_depend_on_thread_count() {
    let args = ["selftest", "--only", "2,6-9,12", "--format", "json"];
    let a = qrn(&args, &[("QRN_THREADS", "1")]);
    let b = qrn(&args, &[("QRN_THREADS", "3")]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0, "{}", stderr(&b));
    let ra = ExperimentReport::from_json(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    let rb = ExperimentReport::from_json(std::str::from_utf8(&b.stdout).unwrap()).unwrap();
    assert_eq!(ra.body(), rb.body());
    let det = ra.records.last().unwrap();
    assert_eq!(det.id, "c13/determinism");
    assert!(det.passed);
    assert!(stderr(&a).contains("PASS criterion  6"));
}

#[test]
fn selftest_rejects_bad_criteria() {
    assert_eq!(code(&qrn(&["selftest", "--only", "0,99"], &[])), 2);
}
