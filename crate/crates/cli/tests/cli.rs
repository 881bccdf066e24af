//! End-to-end runs of the `mast` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mast"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

const QUICK: &[&str] = &["--policy", "random", "--trials", "1", "--seed", "7", "--steps", "8", "--targets", "3"];

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn same_flags_give_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = mast(tmp.path(), &[QUICK, &["--out", out]].concat());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert!(names.contains(&"traces_random_k3_J2_p1.csv".to_string()), "{names:?}");
    assert!(names.contains(&"summary.json".to_string()));
    for n in &names {
        assert_eq!(read(&a, n), read(&b, n), "{n}");
    }
}

#[test]
fn output_defaults_to_results() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mast(tmp.path(), QUICK);
    assert!(o.status.success());
    assert!(tmp.path().join("results/config.txt").is_file());
    let traces = read(&tmp.path().join("results"), "traces_random_k3_J2_p1.csv");
    // header plus 2 agents x 8 steps
    assert_eq!(traces.lines().count(), 17);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(mast(tmp.path(), &[QUICK, &["--comm-prob", "0.5", "--out", "first"]].concat()).status.success());
    let echo = tmp.path().join("first/config.txt");
    let o = mast(tmp.path(), &["--config", echo.to_str().unwrap(), "--out", "second"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let name = "traces_random_k3_J2_p0.5.csv";
    assert_eq!(read(&tmp.path().join("first"), name), read(&tmp.path().join("second"), name));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), "policy = renyi\nsteps = 4\ntargets = 2\ntrials = 1\n").unwrap();
    let o = mast(tmp.path(), &["--config", "run.cfg", "--policy", "random", "--agents", "1,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("results");
    assert!(dir.join("traces_random_k2_J1_p1.csv").is_file());
    assert!(dir.join("traces_random_k2_J2_p1.csv").is_file());
    assert!(!dir.join("traces_renyi_k2_J1_p1.csv").exists());
    assert!(read(&dir, "config.txt").contains("steps = 4"));
}

#[test]
fn unknown_policy_fails_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mast(tmp.path(), &["--policy", "greedy"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("unknown policy 'greedy'"), "{err}");
    assert!(!tmp.path().join("results").exists());
}

#[test]
fn malformed_config_fails() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.cfg"), "steps = 10\nno equals sign here\n").unwrap();
    let o = mast(tmp.path(), &["--config", "bad.cfg"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = mast(tmp.path(), &["--comm-prob", "1.5", "--trials", "1"]);
    assert!(!o.status.success());
}
