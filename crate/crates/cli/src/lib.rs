//! Command-line verifier for convergence of operation-based CRDTs.
//!
//! The heavy lifting lives in `convergent-core`; this crate drives the
//! external SMT solver, runs the bounded simulation in parallel and renders
//! reports.

pub mod commands;
pub mod report;
pub mod solver;
pub mod text;
pub mod verify;
