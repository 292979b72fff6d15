use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clustered-consensus"))
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin().args(["run", "paper-fig2", "-o"]).arg(dir.path()).status().unwrap();
    assert!(status.success());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["J"].as_f64().unwrap() < 0.0);
    assert_eq!(summary["certificate"]["flow"]["verdict"], "semidefinite_with_structured_null");
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,tag,x1,x2,x3,x4,x5,x6,x7\n"));
    let svg = std::fs::read_to_string(dir.path().join("trajectory.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, "").unwrap();
    let out = bin().args(["run"]).arg(&empty).args(["-o"]).arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));

    assert_eq!(bin().args(["verify", "paper-fig1"]).output().unwrap().status.code(), Some(0));
    let fig2 = bin().args(["verify", "paper-fig2"]).output().unwrap();
    assert_eq!(fig2.status.code(), Some(1));
    let text = String::from_utf8_lossy(&fig2.stdout);
    assert!(text.contains("[pass] flow LMI") && text.contains("[FAIL] jump LMI"));

    assert_eq!(bin().args(["sweep", "paper-fig1", "--delta", "0.5,0"]).output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["run", "/nonexistent/scenario.json", "-o", "x"]).output().unwrap().status.code(), Some(3));
}

#[test]
fn sweep_prints_table() {
    let out = bin().args(["sweep", "paper-fig1", "--delta", "0.1,0.5,1.0"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "delta,consensus_value,residual,convergence_time");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let residual: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(residual < 1e-8);
    }
}
