//! CRDT specification language: AST, parser, validator, printer and the
//! built-in library.

mod ast;
mod parse;
mod print;
mod validate;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use ast::*;
pub use print::pretty_print;
pub use validate::validate;

use crate::sexpr::Pos;

/// A diagnostic from parsing or validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError {
    pub pos: Option<Pos>,
    /// Enclosing item, e.g. `op Remove`.
    pub context: Option<String>,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.pos {
            write!(f, "{p}: ")?;
        }
        if let Some(c) = &self.context {
            write!(f, "in {c}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl core::error::Error for SpecError {}

/// Parses and validates a `.crdt` source text.
pub fn parse_spec(text: &str) -> Result<CrdtSpec, Vec<SpecError>> {
    parse::parse(text)
}

/// Names accepted by [`builtin`], in the order of the verdict matrix.
pub const BUILTIN_NAMES: [&str; 8] = [
    "simple-set",
    "orset",
    "orset-tomb",
    "uset",
    "rga",
    "rga-no-tomb",
    "2p2p-graph",
    "graph-with-orset",
];

/// Source text of a built-in specification.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "simple-set" => include_str!("../../builtins/simple-set.crdt"),
        "orset" => include_str!("../../builtins/orset.crdt"),
        "orset-tomb" => include_str!("../../builtins/orset-tomb.crdt"),
        "uset" => include_str!("../../builtins/uset.crdt"),
        "rga" => include_str!("../../builtins/rga.crdt"),
        "rga-no-tomb" => include_str!("../../builtins/rga-no-tomb.crdt"),
        "2p2p-graph" => include_str!("../../builtins/2p2p-graph.crdt"),
        "graph-with-orset" => include_str!("../../builtins/graph-with-orset.crdt"),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown built-in CRDT `{0}`")]
pub struct UnknownBuiltin(pub String);

/// Returns a built-in specification by name.
pub fn builtin(name: &str) -> Result<CrdtSpec, UnknownBuiltin> {
    let src = builtin_source(name).ok_or_else(|| UnknownBuiltin(name.into()))?;
    Ok(parse_spec(src).unwrap_or_else(|e| panic!("built-in `{name}` is invalid: {e:?}")))
}

/// Operation pairs that synchronise (run under PSI) in the mixed PSI+RB
/// configuration used for the verdict matrix. Order within a pair is
/// irrelevant.
pub fn default_sync_pairs(name: &str) -> &'static [(&'static str, &'static str)] {
    match name {
        "simple-set" | "orset" | "orset-tomb" => &[("Add", "Remove")],
        "uset" => &[("Add", "Add")],
        "rga" | "rga-no-tomb" => &[("AddRight", "AddRight"), ("AddRight", "Remove")],
        "2p2p-graph" => &[("AddVertex", "RemoveVertex"), ("AddEdge", "RemoveEdge")],
        "graph-with-orset" => &[
            ("AddVertex", "RemoveVertex"),
            ("AddVertex", "AddEdge"),
            ("AddEdge", "RemoveEdge"),
            ("RemoveVertex", "AddEdge"),
            ("RemoveVertex", "RemoveEdge"),
        ],
        _ => &[],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_print_canonically() {
        for n in BUILTIN_NAMES {
            let spec = builtin(n).unwrap();
            assert_eq!(spec.name, n);
            let text = pretty_print(&spec);
            assert_eq!(text, builtin_source(n).unwrap(), "{n} source is not canonical");
            assert_eq!(parse_spec(&text).unwrap(), spec);
        }
    }

    #[test]
    fn unknown_builtin() {
        assert_eq!(builtin("counter"), Err(UnknownBuiltin("counter".into())));
    }

    #[test]
    fn target_in_guard_is_rejected_with_position() {
        let src = "(crdt bad\n  (state (S Elem))\n  (op Add ((a Elem))\n    (guard (in S' a))\n    (add S (a))))";
        let errs = parse_spec(src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("guard references target state")));
        assert_eq!(errs[0].pos, Some(Pos { line: 3, col: 3 }));
    }

    #[test]
    fn comprehension_over_target_is_rejected() {
        let src = "(crdt bad (state (S Elem Id)) (op Remove ((a Elem)) (remove S (a i) (for (S' a i)))))";
        let errs = parse_spec(src).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("comprehension ranges over target state")));
    }

    #[test]
    fn empty_ops_is_valid() {
        let spec = parse_spec("(crdt empty (state (S Elem)))").unwrap();
        assert!(spec.ops.is_empty());
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let errs = parse_spec("(crdt x\n  (state (S Blob)))").unwrap_err();
        assert_eq!(errs[0].pos, Some(Pos { line: 2, col: 13 }));
        assert!(errs[0].message.contains("unknown sort"));
        assert!(parse_spec("(crdt x (state (S Elem))").is_err());
    }

    #[test]
    fn add_and_remove_on_one_relation_is_rejected() {
        let src = "(crdt bad (state (S Elem)) (op Flip ((a Elem)) (add S (a)) (remove S (a))))";
        assert!(parse_spec(src).is_err());
    }
}
