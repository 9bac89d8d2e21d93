use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::SpecError;

type Scope = BTreeMap<String, Sort>;

struct Checker<'a> {
    spec: &'a CrdtSpec,
    errors: Vec<SpecError>,
    context: String,
}

impl Checker<'_> {
    fn err(&mut self, message: String) {
        self.errors.push(SpecError {
            pos: None,
            context: Some(self.context.clone()),
            message,
        });
    }

    fn columns(&mut self, rel: &str) -> Option<Vec<Sort>> {
        match self.spec.relation(rel) {
            Some((_, r)) => Some(r.columns.clone()),
            None => {
                self.err(format!("unknown relation `{rel}`"));
                None
            }
        }
    }

    fn var_sort(&mut self, scope: &Scope, name: &str) -> Option<Sort> {
        match scope.get(name) {
            Some(s) => Some(*s),
            None => {
                self.err(format!("unknown variable `{name}`"));
                None
            }
        }
    }

    fn expect_sort(&mut self, scope: &Scope, name: &str, want: Sort) {
        if let Some(got) = self.var_sort(scope, name) {
            if got != want {
                self.err(format!("`{name}` has sort {got}, expected {want}"));
            }
        }
    }

    /// Checks a pattern against `rel` and returns the scope extended with its binders.
    fn pattern(&mut self, scope: &Scope, rel: &RelRef, slots: &[Slot]) -> Scope {
        let mut inner = scope.clone();
        let Some(cols) = self.columns(&rel.name) else {
            return inner;
        };
        if cols.len() != slots.len() {
            self.err(format!(
                "relation `{}` has {} columns, pattern has {}",
                rel.name,
                cols.len(),
                slots.len()
            ));
            return inner;
        }
        for (slot, sort) in slots.iter().zip(cols) {
            match slot {
                Slot::Wild => {}
                Slot::Match(v) => self.expect_sort(scope, v, sort),
                Slot::Bind(v) => {
                    if inner.contains_key(v) {
                        self.err(format!("binder `{v}` shadows a variable in scope"));
                    }
                    inner.insert(v.clone(), sort);
                }
            }
        }
        inner
    }

    fn formula(&mut self, scope: &Scope, f: &Formula) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Not(g) => self.formula(scope, g),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| self.formula(scope, g)),
            Formula::Implies(a, b) => {
                self.formula(scope, a);
                self.formula(scope, b);
            }
            Formula::Eq(a, b) => {
                let sa = self.var_sort(scope, a);
                let sb = self.var_sort(scope, b);
                if let (Some(sa), Some(sb)) = (sa, sb) {
                    if sa != sb {
                        self.err(format!("cannot compare `{a}` ({sa}) with `{b}` ({sb})"));
                    }
                }
            }
            Formula::Lt(a, b) => {
                self.expect_sort(scope, a, Sort::Id);
                self.expect_sort(scope, b, Sort::Id);
            }
            Formula::In(rel, args) => {
                if let Some(cols) = self.columns(&rel.name) {
                    if cols.len() != args.len() {
                        self.err(format!(
                            "relation `{}` has {} columns, got {} arguments",
                            rel.name,
                            cols.len(),
                            args.len()
                        ));
                    } else {
                        for (a, s) in args.iter().zip(cols) {
                            self.expect_sort(scope, a, s);
                        }
                    }
                }
            }
            Formula::Exists(rel, slots, body) | Formula::Forall(rel, slots, body) => {
                let inner = self.pattern(scope, rel, slots);
                self.formula(&inner, body);
            }
        }
    }

    fn params(&mut self, params: &[Param]) -> Scope {
        let mut scope: Scope = self
            .spec
            .consts
            .iter()
            .map(|c| (c.name.clone(), c.sort))
            .collect();
        for p in params {
            if scope.insert(p.name.clone(), p.sort).is_some() {
                self.err(format!("duplicate or shadowing parameter `{}`", p.name));
            }
            if p.fresh && p.sort != Sort::Id {
                self.err(format!("fresh parameter `{}` must have sort Id", p.name));
            }
        }
        scope
    }

    fn op(&mut self, op: &OpSpec) {
        self.context = format!("op {}", op.name);
        let scope = self.params(&op.params);
        if op.guard.mentions_target() {
            self.err("guard references target state".to_string());
        }
        self.formula(&scope, &op.guard);
        for u in &op.unique {
            if !op.params.iter().any(|p| &p.name == u) {
                self.err(format!("unique key names unknown parameter `{u}`"));
            }
        }
        let mut touched: BTreeMap<&str, BTreeSet<UpdateKind>> = BTreeMap::new();
        for up in &op.updates {
            touched.entry(&up.rel).or_default().insert(up.kind);
            let mut inner = scope.clone();
            let mut binders = Vec::new();
            if let Some(range) = &up.range {
                if range.rel.target {
                    self.err("comprehension ranges over target state".to_string());
                }
                inner = self.pattern(&scope, &range.rel, &range.slots);
                for s in &range.slots {
                    if let Slot::Bind(v) = s {
                        binders.push(v.clone());
                    }
                }
            }
            let Some(cols) = self.columns(&up.rel) else {
                continue;
            };
            if cols.len() != up.tuple.len() {
                self.err(format!(
                    "relation `{}` has {} columns, update tuple has {}",
                    up.rel,
                    cols.len(),
                    up.tuple.len()
                ));
                continue;
            }
            for (t, s) in up.tuple.iter().zip(cols) {
                match t {
                    None if up.kind == UpdateKind::Add => self.err("wildcard in added tuple".to_string()),
                    None => {}
                    Some(v) => self.expect_sort(&inner, v, s),
                }
            }
            for b in binders {
                if !up.tuple.iter().any(|t| t.as_deref() == Some(b.as_str())) {
                    self.err(format!("comprehension variable `{b}` does not occur in the updated tuple"));
                }
            }
            self.formula(&inner, &up.when);
        }
        for (rel, kinds) in touched {
            if kinds.len() > 1 {
                self.err(format!("both adds to and removes from relation `{rel}`"));
            }
        }
    }
}

/// Checks well-formedness: names, arities, sorts, and the source/target
/// discipline for guards, queries and comprehensions.
pub fn validate(spec: &CrdtSpec) -> Result<(), Vec<SpecError>> {
    let mut c = Checker {
        spec,
        errors: Vec::new(),
        context: format!("crdt {}", spec.name),
    };
    let mut names = BTreeSet::new();
    for r in &spec.state {
        if !names.insert(r.name.as_str()) {
            c.err(format!("duplicate relation `{}`", r.name));
        }
        if r.columns.is_empty() {
            c.err(format!("relation `{}` has no columns", r.name));
        }
    }
    for k in &spec.consts {
        if k.sort != Sort::Id {
            c.err(format!("constant `{}` must have sort Id", k.name));
        }
        if !names.insert(k.name.as_str()) {
            c.err(format!("duplicate name `{}`", k.name));
        }
    }
    let mut items = BTreeSet::new();
    for op in &spec.ops {
        if !items.insert(op.name.as_str()) {
            c.context = format!("op {}", op.name);
            c.err(format!("duplicate operation `{}`", op.name));
        }
        c.op(op);
    }
    for q in &spec.queries {
        c.context = format!("query {}", q.name);
        if !items.insert(q.name.as_str()) {
            c.err(format!("duplicate name `{}`", q.name));
        }
        let scope = c.params(&q.params);
        if q.body.mentions_target() {
            c.err("query references target state".to_string());
        }
        c.formula(&scope, &q.body);
    }
    if c.errors.is_empty() {
        Ok(())
    } else {
        Err(c.errors)
    }
}
