//! Solver driver against z3 and against stand-in executables.

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use convergent::solver::{Solver, SolverError, Status};
use convergent_core::encoder::encode_ni1;
use convergent_core::{builtin, Policy};

fn z3() -> Solver {
    Solver::locate(None, Duration::from_secs(60)).expect("z3 on PATH")
}

/// A shell script standing in for the solver.
fn fake(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("fake-solver");
    std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
    p
}

#[test]
fn trivial_scripts() {
    let z = z3();
    let r = z.run_text("(assert false)\n(check-sat)\n").unwrap();
    assert_eq!(r.status, Status::Unsat);
    assert!(r.model.is_none());
    let r = z.run_text("(declare-const p Bool)\n(assert p)\n(check-sat)\n(get-model)\n").unwrap();
    assert_eq!(r.status, Status::Sat);
    assert!(r.model.unwrap().contains("define-fun p"));
}

#[test]
fn orset_cc_ni1_is_unsat() {
    let s = builtin("orset").unwrap();
    assert_eq!(z3().run(&encode_ni1(&s, &Policy::Cc)).unwrap().status, Status::Unsat);
}

#[test]
fn simple_set_ec_ni1_is_sat_with_model() {
    let s = builtin("simple-set").unwrap();
    let r = z3().run(&encode_ni1(&s, &Policy::Ec)).unwrap();
    assert_eq!(r.status, Status::Sat);
    assert!(r.model.is_some());
}

#[test]
fn slow_solver_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let path = fake(dir.path(), "sleep 30");
    let s = Solver { path, timeout: Duration::from_millis(300) };
    let r = s.run_text("(check-sat)").unwrap();
    assert_eq!(r.status, Status::Timeout);
    assert!(r.seconds < 10.0);
}

#[test]
fn garbage_output_is_a_crash() {
    let dir = tempfile::tempdir().unwrap();
    let path = fake(dir.path(), "echo boom; echo 'bad things' >&2; exit 3");
    let s = Solver { path, timeout: Duration::from_secs(5) };
    let r = s.run_text("(check-sat)").unwrap();
    assert_eq!(r.status, Status::Crash);
    assert!(r.detail.unwrap().contains("bad things"));
}

#[test]
fn unknown_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = fake(dir.path(), "echo unknown");
    let s = Solver { path, timeout: Duration::from_secs(5) };
    assert_eq!(s.run_text("(check-sat)").unwrap().status, Status::Unknown);
}

#[test]
fn solver_receives_a_single_file_argument() {
    let dir = tempfile::tempdir().unwrap();
    let path = fake(dir.path(), "[ $# -eq 1 ] && grep -q check-sat \"$1\" && echo unsat");
    let s = Solver { path, timeout: Duration::from_secs(5) };
    assert_eq!(s.run_text("(check-sat)").unwrap().status, Status::Unsat);
}

#[test]
fn missing_solver_is_an_error() {
    let e = Solver::locate(Some(Path::new("/nonexistent/z3")), Duration::from_secs(1));
    if std::env::var_os(convergent::solver::SOLVER_ENV).is_none() {
        assert!(matches!(e, Err(SolverError::Missing(_))));
    }
}
