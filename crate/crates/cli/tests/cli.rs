use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_wienerlab");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.header"));
    fs::read_to_string(path).unwrap().trim_end().to_string()
}

fn run_into(out: &Path, config: &Path, extra: &[&str]) -> Output {
    Command::new(BIN).arg("run").arg(config).args(extra).env("WIENERLAB_OUT", out).output().unwrap()
}

/// Comment lines and the first data line (the header row).
fn split_header(text: &str) -> (Vec<&str>, &str) {
    let comments: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    let header = text.lines().nth(comments.len()).unwrap();
    (comments, header)
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn minimal_config_writes_capacity_only() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("minimal");
    let res = run_into(&out, &config("minimal.toml"), &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(csv_files(&out), ["capacity.csv"]);
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.ends_with("status: pass\n"), "{report}");
}

#[test]
fn suite_config_writes_every_schema() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("suite");
    let res = run_into(&out, &config("suite.toml"), &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(csv_files(&out), ["capacity.csv", "checks.csv", "snapshots.csv", "trace.csv"]);
    for name in ["capacity", "checks", "snapshots", "trace"] {
        let text = fs::read_to_string(out.join(format!("{name}.csv"))).unwrap();
        let (comments, header) = split_header(&text);
        assert_eq!(header, golden(name), "{name}.csv header");
        assert_eq!(comments[0], concat!("# wienerlab ", env!("CARGO_PKG_VERSION")));
        assert!(comments[1].starts_with("# config_sha256: ") && comments[1].len() == 17 + 64);
        assert_eq!(comments[2], "# h: 0.03125");
        assert_eq!(comments[3], "# seed: 17");
        let width = header.split(',').count();
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert!(!rows.is_empty(), "{name}.csv has no rows");
        assert!(rows.iter().all(|r| r.len() == width && &r[0] != "FAILED"));
    }
    let checks = fs::read_to_string(out.join("checks.csv")).unwrap();
    for check in ["comparison-principle", "energy-spacetime", "psi-decay", "reverse-holder", "weak-harnack"] {
        assert!(checks.contains(&format!("\n{check},flat-halfspace,")), "{check}");
    }
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("  status = pass"), "{report}");
}

#[test]
fn identical_config_reproduces_bytes() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert!(run_into(dir, &config("suite.toml"), &["--jobs", "1"]).status.success());
    }
    for name in csv_files(&a).into_iter().chain(["report.txt".to_string()]) {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name}");
    }
}

#[test]
fn occupied_output_requires_force() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("minimal");
    assert!(run_into(&out, &config("minimal.toml"), &[]).status.success());
    let again = run_into(&out, &config("minimal.toml"), &[]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    assert!(run_into(&out, &config("minimal.toml"), &["--force"]).status.success());
}

#[test]
fn parse_errors_name_field_and_line() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.toml");
    let text = fs::read_to_string(config("minimal.toml")).unwrap().replace("q = 4", "q = 2.5");
    fs::write(&path, text).unwrap();
    let res = run_into(&tmp.path().join("out"), &path, &[]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 10: field `exponents.q`"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn stage_failure_leaves_marker_row() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("offgrid.toml");
    let text = fs::read_to_string(config("minimal.toml")).unwrap() + "\n[capacity]\ncenter = [0.01, 0.0]\n";
    fs::write(&path, text).unwrap();
    let out = tmp.path().join("out");
    let res = run_into(&out, &path, &[]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("stage `capacity` failed"));
    let capacity = fs::read_to_string(out.join("capacity.csv")).unwrap();
    let (_, header) = split_header(&capacity);
    assert_eq!(header, golden("capacity"));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(capacity.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let last = rows.last().unwrap();
    assert_eq!(last.len(), 7);
    assert_eq!(&last[0], "FAILED");
    assert!(last[1].starts_with("capacity: precondition failed"), "{last:?}");
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("FAILED capacity:") && report.ends_with("status: fail\n"));
}

#[test]
fn scenario_catalog_lists_modes() {
    let out = Command::new(BIN).arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in ["flat-halfspace", "spike", "exterior-cone", "p-mode", "q-mode"] {
        assert!(text.contains(needle), "{needle}");
    }
    let machine = Command::new(BIN).args(["list-scenarios", "--machine"]).output().unwrap();
    let text = String::from_utf8(machine.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["flat-halfspace", "exterior-cone", "slit", "spike", "full-ball-complement"]);
}
