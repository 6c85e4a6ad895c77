use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_unruh-otto"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

const FEASIBLE: [&str; 12] = [
    "eval",
    "--motion",
    "anti-parallel",
    "--A",
    "1",
    "--W",
    "0.2",
    "--alpha-h",
    "0.2",
    "--alpha-c",
    "0.1",
    "--b2",
];

#[test]
fn eval_reports_a_feasible_point() {
    let mut args = FEASIBLE.to_vec();
    args.push("0.9");
    let o = run(&args);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("feasible        true"), "{text}");

    args.extend(["--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&run(&args).stdout).unwrap();
    assert_eq!(v["assessment"]["feasible"], true);
    assert!(v["assessment"]["eta_e"].as_f64().unwrap() > 0.0);
}

#[test]
fn validation_errors_exit_two() {
    let near_pole = run(&[
        "eval",
        "--motion",
        "parallel",
        "--A",
        "6.28",
        "--W",
        "0.2",
        "--alpha-h",
        "0.5",
        "--alpha-c",
        "0.25",
        "--b2",
        "0.9",
    ]);
    assert_eq!(near_pole.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&near_pole.stderr).contains("2π"));

    let mut args = FEASIBLE.to_vec();
    args.extend(["0.5", "--b1", "0.5"]);
    assert_eq!(run(&args).status.code(), Some(2));

    assert_eq!(
        run(&["eval", "--motion", "sideways"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

fn scan_args<'a>(out: &'a str, workers: &'a str) -> Vec<&'a str> {
    vec![
        "scan",
        "--motion",
        "anti-parallel",
        "--axis",
        "A=0.2:7:12",
        "--axis",
        "b2=-0.9,0.9",
        "--fixed",
        "W=0.2",
        "--fixed",
        "alpha_H=0.2",
        "--fixed",
        "alpha_C=0.1",
        "--out",
        out,
        "--workers",
        workers,
    ]
}

#[test]
fn scan_writes_identical_files_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.csv");
    let four = dir.path().join("four.csv");
    assert_eq!(
        run(&scan_args(one.to_str().unwrap(), "1")).status.code(),
        Some(0)
    );
    assert_eq!(
        run(&scan_args(four.to_str().unwrap(), "4")).status.code(),
        Some(0)
    );
    let a = fs::read_to_string(&one).unwrap();
    assert_eq!(a, fs::read_to_string(&four).unwrap());
    let header = a.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "A,b2,trace_work,trace_heat_in,trace_heat_out,eta_ratio,eta_E,feasible,masked"
    );
    assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 1 + 24);
    assert!(a.contains("# mask_bands:"));
}

#[test]
fn failed_scan_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let o = run(&[
        "scan",
        "--motion",
        "parallel",
        "--axis",
        "A=1,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn table1_matches_reference() {
    let o = run(&["table1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("pass").count(), 10);
    let csv = run(&["table1", "--alpha-h", "0.5", "--format", "csv"]);
    let rows: Vec<&str> = std::str::from_utf8(&csv.stdout)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[1].starts_with("0.1,0.5,10,0.0104596331,"));
}

#[test]
fn table2_reproduces_pattern() {
    let o = run(&["table2", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("# A: [0.1, 10] x 40"));
    let cycles: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(cycles, ["No", "No", "No", "No", "No", "Yes"]);
}

#[test]
fn oracle_streams_json_lines() {
    let o = run(&[
        "oracle",
        "--checkpoints",
        fixture("single_point.json").to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    for key in [
        "point",
        "kind",
        "closed_form",
        "oracle_value",
        "est_error",
        "rel_dev",
        "pass",
    ] {
        assert!(lines[0].get(key).is_some(), "missing {key}");
    }
    assert_eq!(lines[1]["point"]["motion"], "anti-parallel");
    assert_eq!(lines[1]["closed_form"], 0.0);
}

#[test]
fn oracle_flags_a_broken_closed_form() {
    let o = run(&[
        "oracle",
        "--checkpoints",
        fixture("broken_closed_form.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).lines().next().unwrap()).unwrap();
    assert_eq!(rec["pass"], false);
}

#[test]
fn config_file_sits_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "format = json\noracle.n_max = 5\n").unwrap();
    let mut args = vec!["--config", cfg.to_str().unwrap()];
    args.extend(FEASIBLE);
    args.push("0.9");
    let o = run(&args);
    assert!(serde_json::from_slice::<serde_json::Value>(&o.stdout).is_ok());
    args.extend(["--format", "text"]);
    assert!(stdout(&run(&args)).starts_with("motion"));

    let bad = run(&["--config", cfg.to_str().unwrap(), "oracle"]);
    assert_eq!(bad.status.code(), Some(2));
    let fixed = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "oracle",
        "--n-max",
        "200",
        "--checkpoints",
        fixture("broken_closed_form.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(fixed.status.code(), Some(1));
}
