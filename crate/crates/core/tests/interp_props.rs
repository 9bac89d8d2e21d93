//! Randomized properties of the concrete interpreter over every built-in.

mod common;

use convergent_core::builtin;
use convergent_core::spec::BUILTIN_NAMES;

#[test]
fn history_folding_identity() {
    for name in BUILTIN_NAMES {
        common::folding(&builtin(name).unwrap()).unwrap_or_else(|e| panic!("{e}"));
    }
}

#[test]
fn effectors_only_touch_their_write_set() {
    for name in BUILTIN_NAMES {
        common::footprint(&builtin(name).unwrap()).unwrap_or_else(|e| panic!("{e}"));
    }
}
