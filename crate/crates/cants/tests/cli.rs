use std::path::Path;
use std::process::{Command, Output};

use cants::trace;

fn cants(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cants")).args(args).env("RUST_LOG", "info").output().unwrap()
}

const SMALL: [&str; 10] = [
    "--set",
    "synth_length=240",
    "--set",
    "max_iterations=6",
    "--set",
    "population_size=3",
    "--set",
    "epochs=2",
    "--set",
    "num_ants=6",
];

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["run", "--synth", "noisy-sine", "--out", out];
    args.extend(SMALL);
    let o = cants(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let p = |name: &str| dir.path().join(name);
    let frames = trace::read_frames(std::io::BufReader::new(std::fs::File::open(p("trace.jsonl")).unwrap())).unwrap();
    assert!(!frames.is_empty());

    let mut history = csv::Reader::from_path(p("history.csv")).unwrap();
    assert!(history.headers().unwrap().iter().any(|h| h == "hidden_nodes"));
    let rows = history.records().count();
    assert_eq!(rows, 6);
    let accepted = frames.len();
    assert!(accepted <= rows);

    let genome: cants::core::RnnGenome =
        serde_json::from_str(&std::fs::read_to_string(p("best_genome.json")).unwrap()).unwrap();
    genome.validate().unwrap();

    let summary = std::fs::read_to_string(p("summary.txt")).unwrap();
    assert!(summary.contains("candidates: 6"));
    assert!(summary.contains("test_mae:"));
}

#[test]
fn missing_num_ants_is_announced() {
    let dir = tempfile::tempdir().unwrap();
    let o = cants(&[
        "run",
        "--synth",
        "linear-ar",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "synth_length=200",
        "--set",
        "max_iterations=2",
        "--set",
        "epochs=1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("num_ants not set; defaulting to 30"));
}

#[test]
fn configuration_errors_exit_with_1() {
    assert_eq!(cants(&["run", "--synth", "noisy-sine", "--set", "num_ants=0"]).status.code(), Some(1));
    assert_eq!(cants(&["run", "--synth", "noisy-sine", "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(cants(&["run"]).status.code(), Some(1));
    assert_eq!(cants(&["sweep", "--synth", "noisy-sine", "--param", "colour"]).status.code(), Some(1));
    assert_eq!(cants(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    assert_eq!(cants(&["run", "--data", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,target\n1,2\n3,oops\n").unwrap();
    let o = cants(&["run", "--data", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep",
        "--synth",
        "noisy-sine",
        "--param",
        "sensing_radius",
        "--values",
        "0.2,random",
        "--trials",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ];
    args.extend(SMALL);
    let o = cants(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(Path::new(dir.path()).join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "param,value,trials,min,median,max");
    assert!(lines[1].starts_with("sensing_radius,0.2,2,"));
    assert!(lines[2].starts_with("sensing_radius,random,2,"));
}
