use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lorafair"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.env_remove("LORAFAIR_WORKERS").output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn sweep_matches_golden_csv() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(bin()
        .args(["sweep", "--axis", "nodes", "--values", "30,60", "--workers", "1", "--config"])
        .arg(fixture("small.cfg"))
        .arg("--out")
        .arg(&csv));
    assert!(out.status.success(), "{}", stderr(&out));
    let got = std::fs::read_to_string(&csv).unwrap();
    let want = std::fs::read_to_string(fixture("small_sweep.csv")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn sweep_has_one_row_per_value_and_strategy() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("radius.csv");
    let out = run(bin()
        .args(["sweep", "--axis", "cell_radius", "--values", "200,300,400", "--seeds", "4", "--config"])
        .arg(fixture("small.cfg"))
        .arg("--out")
        .arg(&csv));
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("sweep_value,strategy,seed_count,der_mean"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 3);
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("1")));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let mut files = Vec::new();
    for workers in ["1", "3"] {
        let csv = dir.path().join(format!("w{workers}.csv"));
        let out = run(bin()
            .args(["sweep", "--axis", "strategy", "--values", "fadr-one-region,equal-sf", "--workers", workers])
            .arg("--config")
            .arg(fixture("small.cfg"))
            .arg("--out")
            .arg(&csv));
        assert!(out.status.success(), "{}", stderr(&out));
        files.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn simulate_is_byte_identical_for_same_seed() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let summary = dir.path().join(format!("{tag}.csv"));
        let events = dir.path().join(format!("{tag}_events.csv"));
        let nodes = dir.path().join(format!("{tag}_nodes.csv"));
        let out = run(bin()
            .args(["simulate", "--seed", "9", "--config"])
            .arg(fixture("small.cfg"))
            .arg("--out")
            .arg(&summary)
            .arg("--events")
            .arg(&events)
            .arg("--nodes")
            .arg(&nodes));
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push([summary, events, nodes].map(|p| std::fs::read(p).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let events = String::from_utf8(outputs[0][1].clone()).unwrap();
    let header = events.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 8);
    let nodes = String::from_utf8(outputs[0][2].clone()).unwrap();
    assert_eq!(nodes.lines().count(), 1 + 3 * 60);
}

#[test]
fn simulate_prints_summary_to_stdout() {
    let out = run(bin().args(["simulate", "--seed", "3", "--config"]).arg(fixture("small.cfg")));
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("single,fadr-one-region,1,"));
}

#[test]
fn missing_config_fails_without_output() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("never.csv");
    let out = run(bin()
        .args(["sweep", "--axis", "nodes", "--values", "10", "--config"])
        .arg(dir.path().join("absent.cfg"))
        .arg("--out")
        .arg(&csv));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("error"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_config_line_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "nodes = 20\ncell_radius = wide\n").unwrap();
    let out = run(bin().args(["simulate", "--seed", "1", "--config"]).arg(&cfg));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn paper_scale_needs_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("big.cfg");
    std::fs::write(&cfg, "nodes = 5000\nsimulation_time = 60\nstrategy = sn5\n").unwrap();
    let out = run(bin().args(["simulate", "--seed", "1", "--config"]).arg(&cfg));
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--paper-scale"));

    let out = run(bin().args(["simulate", "--seed", "1", "--paper-scale", "--config"]).arg(&cfg));
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn ratios_for_fifty_nodes() {
    let out = run(bin().args(["ratios", "--n", "50"]));
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let counts: Vec<usize> = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(counts, vec![23, 13, 7, 4, 2, 1, 50]);
}

#[test]
fn unknown_axis_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = run(bin()
        .args(["sweep", "--axis", "bandwidth", "--values", "1", "--config"])
        .arg(fixture("small.cfg"))
        .arg("--out")
        .arg(dir.path().join("x.csv")));
    assert!(!out.status.success());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}
