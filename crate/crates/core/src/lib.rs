//! Core of the `convergent` verifier.
//!
//! Everything in this crate is pure computation over values: the CRDT
//! specification language, the concrete interpreter, the labeled transition
//! system over events and configurations, the consistency policies, and the
//! SMT-LIB encoding of the non-interference conditions. Process handling,
//! file IO and the command line live in the `convergent` crate.

#![no_std]

extern crate alloc;

pub mod consistency;
pub mod encoder;
pub mod interp;
pub mod opsem;
pub mod sexpr;
pub mod spec;

pub use consistency::Policy;
pub use interp::{Atom, ConcreteState, Effector};
pub use spec::{builtin, parse_spec, pretty_print, CrdtSpec};
