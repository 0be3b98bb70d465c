use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsrm_cli::experiment::mask_timing;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn qsrm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsrm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("QSRM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn extreme_prints_the_two_generators() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(&["extreme", "--class", fixture("midpoint_class.json").to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o), "m1\nm2\n");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("extreme.json")).unwrap()).unwrap();
    assert_eq!(report["certificates"][0]["id"], "mid");
}

#[test]
fn extreme_with_source_checks_opt_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(
        &[
            "extreme",
            "--class",
            fixture("midpoint_class.json").to_str().unwrap(),
            "--source",
            fixture("two_atom_source.json").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("PASS"));
}

#[test]
fn norm_of_identity_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(&["norm", "--operator", fixture("identity.json").to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["shadow_norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["method"]["kind"], "exact");
}

#[test]
fn norm_of_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(&["norm", "--class", fixture("midpoint_class.json").to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cstar_size"], 2);
    assert!(v["v_cstar"].as_f64().unwrap() > 0.0);
}

#[test]
fn shadows_of_plus_converge() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(&["shadows", "--state", "plus", "--n", "100000", "--seed", "5"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let last = text.lines().find_map(|l| l.strip_prefix("final_error=")).unwrap();
    assert!(last.parse::<f64>().unwrap() < 0.05, "{text}");
    let lines = std::fs::read_to_string(dir.path().join("shadows.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 100_001);
}

#[test]
fn experiment_writes_outputs_and_reruns_identically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixture("minimal.json");
    for d in [&a, &b] {
        let o = qsrm(&["--config", cfg.to_str().unwrap(), "experiment"], d.path());
        assert!(o.status.success(), "{o:?}");
    }
    let ra = std::fs::read_to_string(a.path().join("results.csv")).unwrap();
    let rb = std::fs::read_to_string(b.path().join("results.csv")).unwrap();
    // Two learners × two budgets × ten trials, plus the header.
    assert_eq!(ra.lines().count(), 41);
    assert_eq!(mask_timing(&ra), mask_timing(&rb));
    assert_eq!(
        std::fs::read(a.path().join("summary.json")).unwrap(),
        std::fs::read(b.path().join("summary.json")).unwrap()
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 11);
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixture("minimal.json");
    qsrm(&["--config", cfg.to_str().unwrap(), "experiment"], a.path());
    qsrm(&["--config", cfg.to_str().unwrap(), "--seed", "12", "experiment"], b.path());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 12);
    let ra = std::fs::read_to_string(a.path().join("results.csv")).unwrap();
    let rb = std::fs::read_to_string(b.path().join("results.csv")).unwrap();
    assert_ne!(mask_timing(&ra), mask_timing(&rb));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qsrm"))
        .args(["--config", fixture("minimal.json").to_str().unwrap(), "experiment"])
        .env("QSRM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("results.csv").exists());
}

#[test]
fn custom_file_task() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(&["--config", fixture("custom.json").to_str().unwrap(), "experiment"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["class_size"], 3);
    assert_eq!(summary["cstar_size"], 2);
}

#[test]
fn learn_prints_choice() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(&["--config", fixture("minimal.json").to_str().unwrap(), "learn", "--n", "200"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("chosen=c00 "), "{}", stdout(&o));
}

#[test]
fn concentration_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsrm(
        &["--config", fixture("minimal.json").to_str().unwrap(), "concentration", "--trials", "200"],
        dir.path(),
    );
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).trim_end().ends_with("PASS"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = qsrm(&["--config", fixture("unknown_task.json").to_str().unwrap(), "experiment"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
    let missing = qsrm(&["--config", "/nonexistent/config.json", "experiment"], dir.path());
    assert_eq!(missing.status.code(), Some(3));
    let no_config = qsrm(&["experiment"], dir.path());
    assert_eq!(no_config.status.code(), Some(2));
    let bad_flag = qsrm(&["extreme", "--bogus"], dir.path());
    assert_eq!(bad_flag.status.code(), Some(2));
    let help = qsrm(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
}
