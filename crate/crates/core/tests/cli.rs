use std::fs;
use std::process::{Command, Output};

use fluxseek::harness::{CONFIG_ENV, CSV_HEADER, DEFAULT_CONFIG};

fn fluxseek(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fluxseek"));
    cmd.args(args).env_remove(CONFIG_ENV);
    cmd
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.csv");
    let out = fluxseek(&["run", "quarter-load", "--out", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 15_000);
    assert!(stderr(&out).contains("converged"));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = fluxseek(&["run", "speed-change", "--out", p.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn unknown_scenario_fails_with_a_diagnostic() {
    let out = fluxseek(&["run", "nope"]).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no scenario named `nope`"));
}

#[test]
fn invalid_config_from_env_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, DEFAULT_CONFIG.replace("min_excitation_current = 1.2", "min_excitation_current = 7.0")).unwrap();
    let out = fluxseek(&["scenarios"]).env(CONFIG_ENV, &bad).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("machine.min_excitation_current"), "{}", stderr(&out));
}

#[test]
fn config_flag_takes_precedence_over_env() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(
        &good,
        DEFAULT_CONFIG.replace("name = \"load-step\"", "name = \"renamed-step\""),
    )
    .unwrap();
    let out = fluxseek(&["scenarios", "--config", good.to_str().unwrap()])
        .env(CONFIG_ENV, dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("renamed-step"));
}

#[test]
fn missing_config_file_is_reported() {
    let out = fluxseek(&["scenarios", "--config", "/no/such/file.toml"]).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("/no/such/file.toml"));
}

#[test]
fn sweep_reports_the_minimum() {
    let out = fluxseek(&["sweep", "--torque", "6", "--grid", "201"]).output().unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(csv.lines().count(), 202);
    assert!(stderr(&out).contains("minimum P_in"));
}

#[test]
fn unreachable_sweep_fails() {
    let out = fluxseek(&["sweep", "--torque", "1000"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn table_csv_has_both_halves() {
    let out = fluxseek(&["table", "--csv"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("off,")).count(), 4);
    assert_eq!(csv.lines().filter(|l| l.starts_with("on,")).count(), 4);
    assert!(csv.lines().filter(|l| l.starts_with("on,")).all(|l| l.contains(",true,")));
}
