//! End-to-end runs of the `drssd` binary.

use std::process::Command;

fn drssd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_drssd"))
}

#[test]
fn missing_config_exits_with_two_and_names_the_path() {
    let out = drssd().args(["lower", "--config", "/no/such/config.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/config.json"));
}

#[test]
fn unknown_command_is_a_usage_error() {
    let out = drssd().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_agrees_on_every_trial() {
    let out = drssd().args(["verify", "--seed", "7", "--trials", "100"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("100/100"));
}

#[test]
fn example_writes_a_config_that_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = drssd().args(["example", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let config = dir.path().join("example1.json");
    assert!(config.exists());

    // a cheaper variant of the bundled instance
    let text =
        std::fs::read_to_string(&config).unwrap().replace("\"n_xi\": 300", "\"n_xi\": 30").replace("\"n_eta\": 300", "\"n_eta\": 30");
    std::fs::write(&config, text).unwrap();
    let out = drssd().args(["lower", "--config"]).arg(&config).arg("--out").arg(dir.path().join("run")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/report.json").exists());
    assert!(dir.path().join("run/results.csv").exists());
}
