//! Behaviour of the `battarb` executable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TABLE_PRICES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/table1.csv");

fn battarb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_battarb")).args(args).output().expect("launching battarb")
}

fn report(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report.json");
    serde_json::from_str(&text).expect("valid report.json")
}

fn run_power_energy(prices: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--model", "power-energy", "--prices", prices, "--eta", "0.9", "--out"];
    args.push(out.to_str().unwrap());
    args.extend_from_slice(extra);
    battarb(&args)
}

#[test]
fn missing_price_file_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_power_energy("/nonexistent/prices.csv", &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error[config]"));
    assert!(!out.exists());
}

#[test]
fn subintervals_must_fit_the_audit_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run_power_energy(TABLE_PRICES, &out, &["--subintervals", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn shuffled_price_rows_give_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(TABLE_PRICES).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.reverse();
    let shuffled = dir.path().join("shuffled.csv");
    std::fs::write(&shuffled, format!("{header}\n{}\n", lines.join("\n"))).unwrap();

    let a: PathBuf = dir.path().join("a");
    let b: PathBuf = dir.path().join("b");
    assert!(run_power_energy(TABLE_PRICES, &a, &[]).status.success());
    assert!(run_power_energy(shuffled.to_str().unwrap(), &b, &[]).status.success());
    assert_eq!(report(&a), report(&b));
    for file in ["schedule.csv", "hourly.csv", "audit.json", "trace.csv"] {
        let left = std::fs::read(a.join("power-energy").join(file)).unwrap();
        let right = std::fs::read(b.join("power-energy").join(file)).unwrap();
        assert!(left == right, "{file} differs");
    }
}

#[test]
fn child_process_solver_matches_the_linked_one() {
    let dir = tempfile::tempdir().unwrap();
    let linked = dir.path().join("linked");
    let child = dir.path().join("child");
    assert!(run_power_energy(TABLE_PRICES, &linked, &["--emit-mps"]).status.success());
    let o = run_power_energy(TABLE_PRICES, &child, &["--solver", "self-process"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let objective = |d: &Path| report(d)["models"]["power-energy"]["objective"].as_f64().unwrap();
    assert!((objective(&linked) - objective(&child)).abs() <= 1e-6);
    let mps = std::fs::read_to_string(linked.join("power-energy/model.mps")).unwrap();
    assert!(mps.starts_with("NAME") && mps.trim_end().ends_with("ENDATA"));
}

#[test]
fn efficiency_command_reports_the_ratio() {
    let o = battarb(&["efficiency", "--c-rate", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    let eta: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((eta - 0.90).abs() <= 0.02, "{text}");
}

#[test]
fn unreadable_mps_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mps");
    std::fs::write(&bad, "NAME x\nCOLUMNS\n    x  NOROW  1\nENDATA\n").unwrap();
    let sol = dir.path().join("sol.txt");
    let o = battarb(&["solve-mps", bad.to_str().unwrap(), "--solution", sol.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!sol.exists());
}
