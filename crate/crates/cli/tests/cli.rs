use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fbasis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbasis")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dims_single_and_grid() {
    let o = fbasis(&["dims", "--space", "St", "--order", "3", "--dim", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "7\n");
    assert!(o.stderr.is_empty());
    assert_eq!(stdout(&fbasis(&["dims", "--space", "S", "--order", "3", "--dim", "3"])), "10\n");

    let grid = stdout(&fbasis(&["dims", "--space", "St", "--order", "2-3", "--dim", "3,4"]));
    let rows: Vec<&str> = grid.lines().skip(1).collect();
    assert_eq!(rows, ["St 2 3 5", "St 2 4 9", "St 3 3 7", "St 3 4 16"]);
}

#[test]
fn malformed_space_exits_2() {
    assert_eq!(fbasis(&["dims", "--space", "St", "--order", "1", "--dim", "3"]).status.code(), Some(2));
    assert_eq!(fbasis(&["dims", "--space", "Q", "--order", "3", "--dim", "3"]).status.code(), Some(2));
    assert_eq!(fbasis(&["bound", "--space", "S", "--order", "1", "--dim", "3"]).status.code(), Some(2));
}

#[test]
fn bounds() {
    let cases = [
        (["St", "3", "3", "O"], "7 3 4\n"),
        (["S", "3", "3", "O"], "10 3 7\n"),
        (["St", "2", "3", "SO"], "5 3 2\n"),
    ];
    for ([k, m, n, g], want) in cases {
        let o = fbasis(&["bound", "--space", k, "--order", m, "--dim", n, "--group", g]);
        assert_eq!(stdout(&o), want);
    }
}

#[test]
fn eval_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.json");
    fs::write(&zero, r#"{"order": 3, "dim": 3, "entries": []}"#).unwrap();
    let o = fbasis(&["eval", "--family", "ST33_DEFAULT", "--tensor", path(&zero)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().starts_with("# eval"));
    assert_eq!(lines.next(), Some("0 0 0 0"));
}

#[test]
fn random_is_deterministic_and_planted_pair_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let (a, a2, b) = (dir.path().join("a.json"), dir.path().join("a2.json"), dir.path().join("b.json"));
    for p in [&a, &a2] {
        let o = fbasis(&["random", "--space", "St", "--order", "3", "--dim", "3", "--seed", "7", "--out", path(p)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&a2).unwrap());

    assert_eq!(fbasis(&["act", "--tensor", path(&a), "--seed", "11", "--out", path(&b)]).status.code(), Some(0));
    let moved: serde_json::Value = serde_json::from_slice(&fs::read(&b).unwrap()).unwrap();
    assert_eq!(moved["config"]["command"], "act");

    let o = fbasis(&["orbit-distance", path(&a), path(&b)]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let d: f64 = out.lines().nth(1).unwrap().parse().unwrap();
    assert!(d <= 1e-6, "{d}");
    assert_eq!(out.lines().nth(2), Some("same_orbit true"));
}

#[test]
fn project_gives_traceless_output() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.json");
    fs::write(&t, r#"{"order": 2, "dim": 3, "entries": [[[1, 1], 3.0], [[1, 2], 1.0]]}"#).unwrap();
    let o = fbasis(&["project", "--tensor", path(&t)]);
    assert_eq!(o.status.code(), Some(0));
    let p = fbasis::SymTensor::<f64>::from_json_str(&stdout(&o)).unwrap();
    assert!(fbasis::tensor::is_traceless(&p, 1e-12));
    assert_eq!(p.get(&[0, 1]), 1.0);
}

#[test]
fn certify_classical_family_and_reject_truncated_file() {
    let o = fbasis(&["certify", "--family", "S23_CLASSICAL", "--samples", "20", "--inv-samples", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["verdict"], "IRREDUCIBLE_BY_COUNT");

    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("trunc.fam");
    fs::write(&fam, "name T\nspace St 3 3\ngroup O 3\ninv J2 2 = A_ijk A_ij").unwrap();
    let o = fbasis(&["certify", "--family", path(&fam)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn small_family_certifies_bound_only_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("small.fam");
    fs::write(
        &fam,
        "name SMALL\nspace St 3 3\ngroup O 3\nlet B_ij = A_ipq A_jpq\ninv J2 2 = A_ijk A_ijk\ninv J4 4 = B_ij B_ij\n",
    )
    .unwrap();
    let o = fbasis(&["certify", "--family", path(&fam), "--samples", "10", "--inv-samples", "20"]);
    assert_eq!(o.status.code(), Some(1));
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(cert["verdict"], "BOUND_ONLY");
}

#[test]
fn quotient_dim_and_rank() {
    let o = fbasis(&["quotient-dim", "--space", "S", "--order", "2", "--dim", "3", "--samples", "10"]);
    assert_eq!(stdout(&o).lines().nth(1), Some("3 3"));
    let o = fbasis(&["rank", "--family", "S23_CLASSICAL", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["rank"], 3);
}

#[test]
fn probe_flags_norm_only_family() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("j2.fam");
    fs::write(&fam, "name J2_ONLY\nspace St 3 3\ngroup O 3\ninv J2 2 = A_ijk A_ijk\n").unwrap();
    let out = dir.path().join("probe.json");
    let o = fbasis(&["probe", "--family", path(&fam), "--samples", "3", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let rep: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(rep["verdict"], "CANDIDATE_COUNTEREXAMPLES");
    assert!(rep["violations"][0]["a"]["entries"].is_array());
}

#[test]
fn eval_single_expression() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.json");
    fs::write(&t, r#"{"order": 2, "dim": 3, "entries": [[[1, 1], 2.0], [[2, 3], 1.0]]}"#).unwrap();
    let o = fbasis(&["eval", "--expr", "T_ij T_ij", "--tensor", path(&t)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().nth(1), Some("6"));
    assert_eq!(fbasis(&["eval", "--expr", "T_ij", "--tensor", path(&t)]).status.code(), Some(0));
    assert_eq!(fbasis(&["eval", "--expr", "T_ij S_ij", "--tensor", path(&t)]).status.code(), Some(2));
    assert_eq!(fbasis(&["eval", "--tensor", path(&t)]).status.code(), Some(2));
}
