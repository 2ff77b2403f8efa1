use std::process::Command;

fn ri(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ri")).args(args).output().unwrap()
}

#[test]
fn config_errors_exit_with_2() {
    let out = ri(&["green", "nosuchkey=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuchkey"));
    assert_eq!(ri(&["density", "escapeRadius=2"]).status.code(), Some(2));
    assert_eq!(ri(&["green", "d=9"]).status.code(), Some(2));
}

#[test]
fn unknown_subcommands_are_rejected() {
    assert_eq!(ri(&["percolate"]).status.code(), Some(2));
}

#[test]
fn a_quiet_run_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# tiny soup, hardly any pairs\nu = 0.001\nbaseRadius = 4\nwindowRadius = 2\nescapeRadius = 8\nreplicas = 2\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = ri(&["connectivity", "--config", cfg.to_str().unwrap(), "--seed", "3", "--out", out_dir.to_str().unwrap(), "radii=2,4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"seed\": \"3\""));
    assert!(out_dir.join("timing.json").exists());
}

#[test]
fn failed_checks_exit_with_4() {
    let out = ri(&["green", "d=3", "windowRadius=1", "accuracy=1e-300"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
