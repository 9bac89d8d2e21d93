//! End-to-end runs of the `convergent` binary.

use std::process::{Command, Output};

use convergent::report::{Conclusion, MatrixReport, SimulateReport, Verdict, WitnessJson, SCHEMA_VERSION};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convergent"))
        .args(args)
        .env_remove(convergent::solver::SOLVER_ENV)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn verdict(crdt: &str, policy: &str) -> (Verdict, i32) {
    let o = run(&["verify", "--crdt", crdt, "--policy", policy, "--format", "json"]);
    let v: Verdict = serde_json::from_slice(&o.stdout).unwrap();
    (v, o.status.code().unwrap())
}

#[test]
fn orset_converges_under_cc() {
    let (v, code) = verdict("orset", "cc");
    assert_eq!(code, 0);
    assert_eq!(v.schema_version, SCHEMA_VERSION);
    assert_eq!(v.conclusion, Conclusion::Converges);
    assert!(v.witness.is_none());
}

#[test]
fn rga_no_tomb_diverges_under_cc() {
    let (v, code) = verdict("rga-no-tomb", "cc");
    assert_eq!(code, 1);
    assert_eq!(v.conclusion, Conclusion::NotConvergent);
    let ops: Vec<String> = match v.witness.unwrap() {
        WitnessJson::Ni1 { events, .. } | WitnessJson::Simulation { events, .. } => events.into_iter().map(|e| e.op.op).collect(),
    };
    assert!(ops.iter().any(|o| o == "AddRight") && ops.iter().any(|o| o == "Remove"), "{ops:?}");
}

#[test]
fn simple_set_converges_under_sc() {
    let (v, code) = verdict("simple-set", "sc");
    assert_eq!(code, 0);
    assert_eq!(v.ni2.unwrap().status, convergent::solver::Status::Unsat);
}

#[test]
fn simple_set_ec_text_report() {
    let o = run(&["verify", "--crdt", "simple-set", "--policy", "ec"]);
    assert_eq!(o.status.code(), Some(1));
    let s = stdout(&o);
    assert!(s.contains("NI-1: sat"), "{s}");
    assert!(s.contains("verdict: NOT CONVERGENT"), "{s}");
}

#[test]
fn spec_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("set.crdt");
    std::fs::write(&path, convergent_core::spec::builtin_source("simple-set").unwrap()).unwrap();
    let o = run(&["verify", "--crdt", path.to_str().unwrap(), "--policy", "psi"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_spec_file_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.crdt");
    std::fs::write(&path, "(crdt Bad (state (S Elem)) (op Add ((a Elem)) (add Q (a))))").unwrap();
    let o = run(&["verify", "--crdt", path.to_str().unwrap(), "--policy", "ec"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.crdt:"), "{err}");
}

#[test]
fn usage_errors_exit_above_two() {
    for args in [
        vec!["verify", "--crdt", "nope", "--policy", "cc"],
        vec!["verify", "--crdt", "orset", "--policy", "weird"],
        vec!["verify", "--crdt", "orset"],
        vec!["verify", "--crdt", "orset", "--policy", "rb:Frobnicate"],
        vec!["verify", "--crdt", "orset", "--policy", "cc", "--solver", "/nonexistent/z3"],
        vec!["simulate", "--crdt", "orset", "--policy", "cc", "--elems", "0"],
        vec!["frobnicate"],
    ] {
        let code = run(&args).status.code().unwrap();
        assert!(code > 2, "{args:?} exited {code}");
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_finds_uset_witness_of_length_three() {
    let o = run(&["simulate", "--crdt", "uset", "--policy", "cc", "--depth", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let r: SimulateReport = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r.simulation.witness.unwrap().len(), 3);
}

#[test]
fn simulate_exhausts_orset_and_depth_zero() {
    let o = run(&["simulate", "--crdt", "orset", "--policy", "cc", "--depth", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no violation up to depth 3 with budget 2 elems / 3 ids"));
    let o = run(&["simulate", "--crdt", "uset", "--policy", "ec", "--depth", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("no violation up to depth 0"));
}

#[test]
fn emit_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["emit", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 64);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap());
    }
    let one = tempfile::tempdir().unwrap();
    run(&["emit", "--crdt", "orset", "--policy", "cc", "--out", one.path().to_str().unwrap()]);
    assert_eq!(std::fs::read_dir(one.path()).unwrap().count(), 2);
}

#[test]
fn emitted_simple_set_ec_ni1_is_sat_in_z3() {
    let d = tempfile::tempdir().unwrap();
    run(&["emit", "--crdt", "simple-set", "--policy", "ec", "--out", d.path().to_str().unwrap()]);
    let o = Command::new("z3").arg(d.path().join("simple-set-ec-ni1.smt2")).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().next(), Some("sat"));
}

#[test]
fn matrix_rows_and_report_file() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("m.json");
    let o = run(&[
        "matrix",
        "--crdt",
        "uset",
        "--crdt",
        "orset-tomb",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let m: MatrixReport = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!(m.mismatches.is_empty());
    let row = |c: &str| -> Vec<Conclusion> { ["EC", "CC", "PSI+RB", "PSI"].iter().map(|p| m.matrix[c][*p]).collect() };
    use Conclusion::*;
    assert_eq!(row("uset"), vec![NotConvergent, NotConvergent, NotConvergent, Converges]);
    assert_eq!(row("orset-tomb"), vec![Converges; 4]);
}

#[test]
fn list_names_builtins_and_policies() {
    let s = stdout(&run(&["list"]));
    for n in convergent_core::spec::BUILTIN_NAMES {
        assert!(s.contains(n));
    }
    assert!(s.contains("psi+rb"));
}
