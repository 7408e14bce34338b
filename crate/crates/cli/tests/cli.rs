use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magicflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn psi_k_builds_classify_to_their_k() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..=3 {
        let k_arg = k.to_string();
        let out = run(dir.path(), &["build-state", "--kind", "psi-k", "--d", "2", "--n", "3", "--k", &k_arg, "--seed", "7", "--out", "s.json"]);
        assert!(out.status.success());
        let report = run(dir.path(), &["classify", "--in", "s.json"]);
        assert_eq!(report.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&stdout(&report)).unwrap();
        assert_eq!(v["k"], k);
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["verdicts"]["agree"], true);
    }
}

#[test]
fn zeros_classify_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["build-state", "--kind", "zeros", "--d", "7", "--n", "2", "--out", "z.json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(dir.path(), &["classify", "--in", "z.json"]))).unwrap();
    assert_eq!(v["k"], 0);
    assert_eq!(v["group_size"], 49);
}

#[test]
fn stabilizer_flow_has_zero_gap() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.json"),
        r#"{"format_version":1,"d":7,"n":2,"gates":[{"kind":"FOURIER","targets":[0]},{"kind":"SUM","targets":[0,1]},{"kind":"PHASE","targets":[1]},{"kind":"MULT","targets":[0],"a":3},{"kind":"WEYL","p":[1,2],"q":[0,5]}]}"#,
    )
    .unwrap();
    assert!(run(dir.path(), &["build-state", "--kind", "stabilizer", "--circuit", "c.json", "--out", "s.json"]).status.success());
    let out = run(dir.path(), &["run-cg", "--in", "s.json", "--L", "5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let gap: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!(gap < 1e-9, "{row}");
    }
}

#[test]
fn magic_state_gap_decreases() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["build-state", "--kind", "psi-k", "--d", "7", "--n", "1", "--k", "1", "--seed", "1", "--out", "m.json"]);
    let text = stdout(&run(dir.path(), &["run-cg", "--in", "m.json", "--L", "6", "--s", "2", "--t", "2"]));
    assert!(text.starts_with("# format_version=1\n"));
    let gaps: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps.len(), 6);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn zero_steps_echo_input() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["build-state", "--kind", "random", "--d", "7", "--n", "1", "--seed", "4", "--out", "r.json"]);
    let out = run(dir.path(), &["run-cg", "--in", "r.json", "--L", "0", "--out", "o.json"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().filter(|l| !l.starts_with('#')).count(), 1);
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o.json")).unwrap()).unwrap();
    assert_eq!(a["data"], b["data"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["classify", "--in", "missing.json"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["build-state", "--kind", "zeros", "--d", "4", "--n", "1"]).status.code(), Some(2));
    run(dir.path(), &["build-state", "--kind", "zeros", "--d", "5", "--n", "1", "--out", "z5.json"]);
    assert_eq!(run(dir.path(), &["run-cg", "--in", "z5.json", "--L", "1"]).status.code(), Some(2));
    // Hermitian but not positive
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"format_version":1,"d":2,"n":1,"repr":"dense","data":[[0.5,0],[0.8,0],[0.8,0],[0.5,0]]}"#,
    )
    .unwrap();
    assert_eq!(run(dir.path(), &["classify", "--in", "bad.json"]).status.code(), Some(1));
    let v = run(dir.path(), &["verify", "duality", "--seed", "1"]);
    assert_eq!(v.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&v)).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["seed"], 1);
}

#[test]
fn report_lists_bound_table() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["build-state", "--kind", "psi-k", "--d", "7", "--n", "3", "--k", "1", "--seed", "2", "--out", "p.json"]);
    let out = run(dir.path(), &["report", "--in", "p.json"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("k=1"));
    assert!(text.contains("required_iterations="));
    assert_eq!(text.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 6);
}
