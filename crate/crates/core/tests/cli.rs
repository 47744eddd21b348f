// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::process::Command;

fn qthermo() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qthermo"))
}

#[test]
fn free_run_writes_report_with_reference_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("free");
    let status = qthermo().args(["free-run", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.starts_with("J variant"));
    for f in ["history.csv", "summary.json", "schedule.csv", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn train_then_replay_reproduces_rewards() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("quick.txt");
    fs::write(
        &cfg,
        "policy.n_epochs = 3\npolicy.epsilon_cutoff_epochs = 1\npolicy.batch_size = 5\npolicy.hidden = [6]\n",
    )
    .unwrap();
    let out = dir.path().join("a1");
    let status = qthermo()
        .args(["train", "--experiment", "single-spin-a1", "--seeds", "0..2", "--deterministic", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("policy-seed1.bin").exists());
    let replay = qthermo().arg("replay").arg(out.join("schedule.csv")).output().unwrap();
    assert!(replay.status.success());
    let text = String::from_utf8(replay.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(" ok")).count(), 2, "{text}");
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = qthermo()
            .args(["train", "--experiment", "single-spin-a3", "--seed", "4", "--deterministic"])
            .env("QTHERMO_OUT", &out)
            .status()
            .unwrap();
        assert!(status.success());
        ["history.csv", "schedule.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    // Defaults are full-size; this stays quick because only one seed trains.
    assert_eq!(run("a"), run("b"));
}

#[test]
fn bad_config_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.txt");
    fs::write(&cfg, "policy.sigma = 1.0\npolicy.sigmaa = 2.0\n").unwrap();
    let out = qthermo().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("policy.sigmaa") && err.contains('2'), "{err}");
}

#[test]
fn grad_check_succeeds() {
    let out = qthermo().arg("grad-check").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches(" 0 failures").count(), 2, "{text}");
}

#[test]
fn config_experiment_line_selects_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("two.txt");
    fs::write(
        &cfg,
        "experiment = \"two-spin-smooth\"\npolicy.n_epochs = 2\npolicy.epsilon_cutoff_epochs = 1\npolicy.batch_size = 3\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    let status = qthermo().args(["train", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(text.starts_with("experiment = \"two-spin-smooth\""), "{text}");
}
