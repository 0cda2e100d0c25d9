use std::process::Command;

fn nlh() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlh"))
}

#[test]
fn bundled_check_kernel_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlh().args(["check-kernel", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("condition_report.json").exists());
}

#[test]
fn configs_lists_every_criterion() {
    let out = nlh().arg("configs").output().unwrap();
    let s = String::from_utf8(out.stdout).unwrap();
    for i in 1..=10 {
        assert!(s.lines().any(|l| l == format!("criterion-{i}")), "criterion-{i} missing");
    }
}

#[test]
fn invalid_config_exits_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"experiment": "check-kernel", "kernel": {"type": "fractional_heat", "params": {"alpha": 2.5, "lambda": 4}}}"#).unwrap();
    let out = nlh().args(["check-kernel", "--config"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn wrong_experiment_kind_is_refused() {
    let out = nlh().args(["solve-linear", "--bundled", "check-kernel"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_criterion_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = nlh().args(["criterion", "4", "--threads", "1", "--out"]).arg(dir.path()).output().unwrap();
    let s = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{s}");
    assert!(s.contains("criterion  4") && s.contains("PASS"), "{s}");
}
