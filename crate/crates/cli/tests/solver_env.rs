//! The environment variable takes precedence over `--solver`. Kept in its
//! own binary because it mutates the process environment.

use std::path::Path;
use std::time::Duration;

use convergent::solver::{Solver, SolverError, SOLVER_ENV};

#[test]
fn environment_overrides_flag() {
    std::env::set_var(SOLVER_ENV, "/usr/local/bin/z3");
    let s = Solver::locate(Some(Path::new("/nonexistent/solver")), Duration::from_secs(1)).unwrap();
    assert_eq!(s.path, Path::new("/usr/local/bin/z3"));

    std::env::set_var(SOLVER_ENV, "/nonexistent/from-env");
    let z3 = Path::new("/usr/local/bin/z3");
    assert!(matches!(Solver::locate(Some(z3), Duration::from_secs(1)), Err(SolverError::Missing(_))));

    std::env::remove_var(SOLVER_ENV);
    assert_eq!(Solver::locate(Some(z3), Duration::from_secs(1)).unwrap().path, z3);
}
