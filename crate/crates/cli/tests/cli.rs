use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn haltsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_haltsim"))
        .args(args)
        .env("HALTSIM_THREADS", "4")
        .output()
        .expect("binary runs")
}

fn run_into(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    haltsim(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn every_shipped_config_runs() {
    let cases = [
        ("finite", "finite.json", "finite.csv"),
        ("bounds", "bounds.json", "bounds.csv"),
        ("tentative", "tentative.json", "section.csv"),
        ("brownian", "brownian.json", "brownian.csv"),
        ("halting", "halting.json", "halting.csv"),
        ("run", "halting-counter.json", "halting.csv"),
    ];
    for (sub, file, table) in cases {
        let dir = TempDir::new().unwrap();
        let o = run_into(sub, &configs().join(file), dir.path(), &["--trials", "2000"]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        assert!(dir.path().join(table).is_file(), "{file} did not write {table}");
        let summary: String = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(summary.contains("\"seed\""), "{file}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("wrote "));
    }
}

#[test]
fn replay_is_byte_identical() {
    let config = configs().join("brownian.json");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let o = run_into("brownian", &config, d.path(), &["--trials", "20000"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read_to_string(a.path().join("brownian.csv")).unwrap(),
        fs::read_to_string(b.path().join("brownian.csv")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let config = configs().join("finite.json");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = |d: &TempDir| {
        vec![
            "finite".to_string(),
            "--config".into(),
            config.to_str().unwrap().into(),
            "--out".into(),
            d.path().to_str().unwrap().into(),
            "--trials".into(),
            "5000".into(),
        ]
    };
    for (d, threads) in [(&a, "1"), (&b, "8")] {
        let o = Command::new(env!("CARGO_BIN_EXE_haltsim"))
            .args(args(d))
            .env("HALTSIM_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(
        fs::read(a.path().join("finite.csv")).unwrap(),
        fs::read(b.path().join("finite.csv")).unwrap()
    );
}

#[test]
fn seed_override_changes_estimates() {
    let config = configs().join("finite.json");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    run_into("finite", &config, a.path(), &["--trials", "5000"]);
    run_into("finite", &config, b.path(), &["--trials", "5000", "--seed", "99"]);
    let read = |d: &TempDir| fs::read_to_string(d.path().join("finite.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
    let summary = fs::read_to_string(b.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 99"), "{summary}");
}

#[test]
fn trials_override_reaches_the_table() {
    let dir = TempDir::new().unwrap();
    let o = run_into("finite", &configs().join("finite.json"), dir.path(), &["--trials", "1234"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("finite.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "trials").unwrap();
    for line in lines {
        assert_eq!(line.split(',').nth(col), Some("1234"));
    }
}

#[test]
fn unknown_field_is_reported_at_its_line() {
    let dir = TempDir::new().unwrap();
    let path = write_config(
        &dir,
        "{\n  \"seed\": 1,\n  \"kind\": \"finite\",\n  \"params\": {\"n\": 5, \"gamma\": 0.001, \"epsilon\": 0.01,\n    \"times\": [10], \"trials\": 10,\n    \"colour\": 3}\n}\n",
    );
    let o = run_into("finite", &path, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("config.json:6"), "{err}");
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn syntax_error_carries_line_and_column() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, "{\n  \"seed\": 1,\n  \"kind\": \"finite\"\n  \"params\": {}\n}\n");
    let o = run_into("run", &path, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.json:4:"), "{}", stderr(&o));
}

#[test]
fn out_of_range_parameter_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = write_config(
        &dir,
        "{\n  \"seed\": 1,\n  \"kind\": \"finite\",\n  \"params\": {\n    \"n\": 5,\n    \"gamma\": 0.001,\n    \"epsilon\": -1,\n    \"times\": [10],\n    \"trials\": 10\n  }\n}\n",
    );
    let o = run_into("finite", &path, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.json:7"), "{}", stderr(&o));
}

#[test]
fn missing_seed_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = write_config(
        &dir,
        r#"{"kind": "bounds", "params": {"n": 5, "gamma": 0.001, "epsilon": 0.01, "times": [10], "etas": [0.1]}}"#,
    );
    let o = run_into("bounds", &path, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
    let o = run_into("bounds", &path, dir.path(), &["--seed", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn subcommand_must_match_kind() {
    let dir = TempDir::new().unwrap();
    let o = run_into("brownian", &configs().join("finite.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cannot run a finite config"));
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn unstable_weights_exit_3() {
    let dir = TempDir::new().unwrap();
    let o = run_into("brownian", &configs().join("brownian.json"), dir.path(), &["--trials", "50"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("effective sample size"));
}

#[test]
fn missing_config_file_exits_1() {
    let dir = TempDir::new().unwrap();
    let o = run_into("run", &dir.path().join("absent.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_haltsim"))
        .args(["run", "--config", configs().join("bounds.json").to_str().unwrap()])
        .env("HALTSIM_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
