use alloc::string::String;
use core::fmt::Write;

use super::ast::*;

fn slot(out: &mut String, s: &Slot) {
    match s {
        Slot::Bind(v) | Slot::Match(v) => out.push_str(v),
        Slot::Wild => out.push('_'),
    }
}

fn pattern(out: &mut String, rel: &RelRef, slots: &[Slot]) {
    let _ = write!(out, "({rel}");
    for s in slots {
        out.push(' ');
        slot(out, s);
    }
    out.push(')');
}

fn list(out: &mut String, head: &str, fs: &[Formula]) {
    out.push('(');
    out.push_str(head);
    for f in fs {
        out.push(' ');
        formula(out, f);
    }
    out.push(')');
}

/// Writes a formula on a single line.
pub(crate) fn formula(out: &mut String, f: &Formula) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Not(g) => {
            out.push_str("(not ");
            formula(out, g);
            out.push(')');
        }
        Formula::And(gs) => list(out, "and", gs),
        Formula::Or(gs) => list(out, "or", gs),
        Formula::Implies(a, b) => {
            out.push_str("(=> ");
            formula(out, a);
            out.push(' ');
            formula(out, b);
            out.push(')');
        }
        Formula::Eq(a, b) => {
            let _ = write!(out, "(= {a} {b})");
        }
        Formula::Lt(a, b) => {
            let _ = write!(out, "(< {a} {b})");
        }
        Formula::In(r, args) => {
            let _ = write!(out, "(in {r}");
            for a in args {
                out.push(' ');
                out.push_str(a);
            }
            out.push(')');
        }
        Formula::Exists(r, slots, body) | Formula::Forall(r, slots, body) => {
            let kw = if matches!(f, Formula::Exists(..)) { "exists" } else { "forall" };
            let _ = write!(out, "({kw} ");
            pattern(out, r, slots);
            out.push(' ');
            formula(out, body);
            out.push(')');
        }
    }
}

fn params(out: &mut String, ps: &[Param]) {
    out.push('(');
    for (i, p) in ps.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "({} {}{})", p.name, p.sort, if p.fresh { " fresh" } else { "" });
    }
    out.push(')');
}

/// Canonical text form. Layout is fixed so output is byte-stable.
pub fn pretty_print(spec: &CrdtSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(crdt {}", spec.name);
    for c in &spec.consts {
        let _ = writeln!(out, "  (const {} {})", c.name, c.sort);
    }
    out.push_str("  (state");
    for r in &spec.state {
        let _ = write!(out, "\n    ({}", r.name);
        for c in &r.columns {
            let _ = write!(out, " {c}");
        }
        out.push(')');
    }
    out.push(')');
    for op in &spec.ops {
        let _ = write!(out, "\n  (op {} ", op.name);
        params(&mut out, &op.params);
        if op.guard != Formula::True {
            out.push_str("\n    (guard ");
            formula(&mut out, &op.guard);
            out.push(')');
        }
        if !op.unique.is_empty() {
            out.push_str("\n    (unique");
            for u in &op.unique {
                let _ = write!(out, " {u}");
            }
            out.push(')');
        }
        for u in &op.updates {
            let _ = write!(out, "\n    ({} {} (", u.kind.keyword(), u.rel);
            for (i, t) in u.tuple.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(t.as_deref().unwrap_or("_"));
            }
            out.push(')');
            if let Some(r) = &u.range {
                out.push_str(" (for ");
                pattern(&mut out, &r.rel, &r.slots);
                out.push(')');
            }
            if u.when != Formula::True {
                out.push_str(" (when ");
                formula(&mut out, &u.when);
                out.push(')');
            }
            out.push(')');
        }
        out.push(')');
    }
    for q in &spec.queries {
        let _ = write!(out, "\n  (query {} ", q.name);
        params(&mut out, &q.params);
        out.push_str("\n    ");
        formula(&mut out, &q.body);
        out.push(')');
    }
    out.push_str(")\n");
    out
}
