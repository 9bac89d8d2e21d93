use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::SpecError;
use crate::sexpr::{self, Pos, Sexp};

type PResult<T> = Result<T, SpecError>;

fn err<T>(pos: Pos, message: impl Into<String>) -> PResult<T> {
    Err(SpecError {
        pos: Some(pos),
        context: None,
        message: message.into(),
    })
}

fn atom(s: &Sexp, what: &str) -> PResult<String> {
    match s.as_atom() {
        Some(a) => Ok(a.to_string()),
        None => err(s.pos(), format!("expected {what}")),
    }
}

fn list<'a>(s: &'a Sexp, what: &str) -> PResult<&'a [Sexp]> {
    match s.as_list() {
        Some(l) => Ok(l),
        None => err(s.pos(), format!("expected {what}")),
    }
}

fn sort(s: &Sexp) -> PResult<Sort> {
    let name = atom(s, "a sort")?;
    Sort::from_name(&name).ok_or(SpecError {
        pos: Some(s.pos()),
        context: None,
        message: format!("unknown sort `{name}`"),
    })
}

fn rel_ref(s: &Sexp) -> PResult<RelRef> {
    let name = atom(s, "a relation name")?;
    Ok(match name.strip_suffix('\'') {
        Some(base) => RelRef {
            name: base.to_string(),
            target: true,
        },
        None => RelRef { name, target: false },
    })
}

fn params(s: &Sexp) -> PResult<Vec<Param>> {
    list(s, "a parameter list")?
        .iter()
        .map(|p| {
            let items = list(p, "a parameter `(name Sort)`")?;
            match items {
                [n, srt] => Ok(Param {
                    name: atom(n, "a parameter name")?,
                    sort: sort(srt)?,
                    fresh: false,
                }),
                [n, srt, flag] if flag.as_atom() == Some("fresh") => Ok(Param {
                    name: atom(n, "a parameter name")?,
                    sort: sort(srt)?,
                    fresh: true,
                }),
                _ => err(p.pos(), "expected `(name Sort)` or `(name Id fresh)`"),
            }
        })
        .collect()
}

struct Parser {
    scope: BTreeSet<String>,
}

impl Parser {
    fn slots(&self, items: &[Sexp]) -> PResult<(Vec<Slot>, Vec<String>)> {
        let mut slots = Vec::new();
        let mut bound = Vec::new();
        for s in items {
            let n = atom(s, "a pattern variable or `_`")?;
            if n == "_" {
                slots.push(Slot::Wild);
            } else if self.scope.contains(&n) {
                slots.push(Slot::Match(n));
            } else if bound.contains(&n) {
                return err(s.pos(), format!("variable `{n}` bound twice in one pattern"));
            } else {
                bound.push(n.clone());
                slots.push(Slot::Bind(n));
            }
        }
        Ok((slots, bound))
    }

    fn formula(&mut self, s: &Sexp) -> PResult<Formula> {
        if let Some(a) = s.as_atom() {
            return match a {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ => err(s.pos(), format!("expected a formula, found `{a}`")),
            };
        }
        let items = list(s, "a formula")?;
        let Some(head) = items.first().and_then(Sexp::as_atom) else {
            return err(s.pos(), "expected a formula keyword");
        };
        let args = &items[1..];
        let binary = |args: &[Sexp]| -> PResult<(String, String)> {
            match args {
                [a, b] => Ok((atom(a, "a variable")?, atom(b, "a variable")?)),
                _ => err(s.pos(), format!("`{head}` takes two variables")),
            }
        };
        match head {
            "not" => match args {
                [f] => Ok(Formula::Not(Box::new(self.formula(f)?))),
                _ => err(s.pos(), "`not` takes one formula"),
            },
            "and" => Ok(Formula::And(args.iter().map(|f| self.formula(f)).collect::<PResult<_>>()?)),
            "or" => Ok(Formula::Or(args.iter().map(|f| self.formula(f)).collect::<PResult<_>>()?)),
            "=>" => match args {
                [a, b] => Ok(Formula::Implies(Box::new(self.formula(a)?), Box::new(self.formula(b)?))),
                _ => err(s.pos(), "`=>` takes two formulas"),
            },
            "=" => binary(args).map(|(a, b)| Formula::Eq(a, b)),
            "<" => binary(args).map(|(a, b)| Formula::Lt(a, b)),
            "in" => {
                let Some((r, rest)) = args.split_first() else {
                    return err(s.pos(), "`in` needs a relation");
                };
                let vars = rest.iter().map(|v| atom(v, "a variable")).collect::<PResult<_>>()?;
                Ok(Formula::In(rel_ref(r)?, vars))
            }
            "exists" | "forall" => {
                let (pat, body) = match args {
                    [p] if head == "exists" => (p, None),
                    [p, b] => (p, Some(b)),
                    _ => return err(s.pos(), format!("`{head}` takes a pattern and a body")),
                };
                let pitems = list(pat, "a pattern `(R x ...)`")?;
                let Some((r, rest)) = pitems.split_first() else {
                    return err(pat.pos(), "empty pattern");
                };
                let rel = rel_ref(r)?;
                let (slots, bound) = self.slots(rest)?;
                let saved = self.scope.clone();
                self.scope.extend(bound);
                let body = match body {
                    Some(b) => self.formula(b),
                    None => Ok(Formula::True),
                };
                self.scope = saved;
                let body = Box::new(body?);
                Ok(if head == "exists" {
                    Formula::Exists(rel, slots, body)
                } else {
                    Formula::Forall(rel, slots, body)
                })
            }
            other => err(s.pos(), format!("unknown formula keyword `{other}`")),
        }
    }

    fn update(&mut self, kind: UpdateKind, s: &Sexp) -> PResult<Update> {
        let items = list(s, "an update")?;
        if items.len() < 3 {
            return err(s.pos(), format!("`{}` needs a relation and a tuple", kind.keyword()));
        }
        let rel = atom(&items[1], "a relation name")?;
        if rel.ends_with('\'') {
            return err(items[1].pos(), "updates name source relations; the target is implicit");
        }
        let tuple = list(&items[2], "a tuple `(x ...)`")?
            .iter()
            .map(|t| atom(t, "a variable or `_`").map(|n| if n == "_" { None } else { Some(n) }))
            .collect::<PResult<Vec<_>>>()?;
        let mut range_src = None;
        let mut when_src = None;
        for opt in &items[3..] {
            match (opt.head(), opt.as_list()) {
                (Some("for"), Some([_, pat])) if range_src.is_none() => range_src = Some(pat),
                (Some("when"), Some([_, f])) if when_src.is_none() => when_src = Some(f),
                _ => return err(opt.pos(), "expected `(for (R x ...))` or `(when F)`"),
            }
        }
        let saved = self.scope.clone();
        let range = match range_src {
            None => None,
            Some(pat) => {
                let pitems = list(pat, "a pattern `(R x ...)`")?;
                let Some((r, rest)) = pitems.split_first() else {
                    return err(pat.pos(), "empty pattern");
                };
                let rel = rel_ref(r)?;
                let (slots, bound) = self.slots(rest)?;
                self.scope.extend(bound);
                Some(Range { rel, slots })
            }
        };
        let when = match when_src {
            Some(f) => self.formula(f),
            None => Ok(Formula::True),
        };
        self.scope = saved;
        Ok(Update {
            kind,
            rel,
            tuple,
            range,
            when: when?,
        })
    }

    fn op(&mut self, s: &Sexp, items: &[Sexp]) -> PResult<OpSpec> {
        if items.len() < 3 {
            return err(s.pos(), "`op` needs a name and a parameter list");
        }
        let name = atom(&items[1], "an operation name")?;
        let params = params(&items[2])?;
        let saved = self.scope.clone();
        self.scope.extend(params.iter().map(|p| p.name.clone()));
        let mut op = OpSpec {
            name,
            params,
            guard: Formula::True,
            unique: Vec::new(),
            updates: Vec::new(),
        };
        let mut seen_guard = false;
        for clause in &items[3..] {
            let cl = list(clause, "an op clause")?;
            match clause.head() {
                Some("guard") if !seen_guard => match cl {
                    [_, f] => {
                        op.guard = self.formula(f)?;
                        seen_guard = true;
                    }
                    _ => return err(clause.pos(), "`guard` takes one formula"),
                },
                Some("unique") => {
                    for u in &cl[1..] {
                        op.unique.push(atom(u, "a parameter name")?);
                    }
                }
                Some("add") => op.updates.push(self.update(UpdateKind::Add, clause)?),
                Some("remove") => op.updates.push(self.update(UpdateKind::Remove, clause)?),
                _ => return err(clause.pos(), "expected `guard`, `unique`, `add` or `remove`"),
            }
        }
        self.scope = saved;
        Ok(op)
    }
}

pub(super) fn parse(text: &str) -> Result<CrdtSpec, Vec<SpecError>> {
    let one = |e: SpecError| alloc::vec![e];
    let forms = sexpr::read_all(text).map_err(|e| {
        one(SpecError {
            pos: Some(e.pos()),
            context: None,
            message: e.to_string(),
        })
    })?;
    let [form] = forms.as_slice() else {
        let pos = forms.get(1).map(Sexp::pos).unwrap_or(Pos { line: 1, col: 1 });
        return Err(one(SpecError {
            pos: Some(pos),
            context: None,
            message: "expected exactly one `(crdt ...)` form".to_string(),
        }));
    };
    if form.head() != Some("crdt") {
        return Err(one(SpecError {
            pos: Some(form.pos()),
            context: None,
            message: "expected `(crdt NAME ...)`".to_string(),
        }));
    }
    let items = form.as_list().unwrap_or_default();
    let name = atom(items.get(1).ok_or_else(|| one(SpecError {
        pos: Some(form.pos()),
        context: None,
        message: "missing CRDT name".to_string(),
    }))?, "a CRDT name")
    .map_err(one)?;

    let mut spec = CrdtSpec {
        name,
        consts: Vec::new(),
        state: Vec::new(),
        ops: Vec::new(),
        queries: Vec::new(),
    };
    // Constants are visible everywhere, so collect them before the bodies.
    for it in &items[2..] {
        if it.head() == Some("const") {
            match it.as_list().unwrap_or_default() {
                [_, n, s] => spec.consts.push(ConstDecl {
                    name: atom(n, "a constant name").map_err(one)?,
                    sort: sort(s).map_err(one)?,
                }),
                _ => return Err(one(SpecError {
                    pos: Some(it.pos()),
                    context: None,
                    message: "expected `(const NAME Sort)`".to_string(),
                })),
            }
        }
    }
    let mut parser = Parser {
        scope: spec.consts.iter().map(|c| c.name.clone()).collect(),
    };
    let mut positions = Vec::new();
    for it in &items[2..] {
        let l = list(it, "a `state`, `const`, `op` or `query` clause").map_err(one)?;
        match it.head() {
            Some("const") => {}
            Some("state") => {
                for r in &l[1..] {
                    let rl = list(r, "a relation `(R Sort ...)`").map_err(one)?;
                    let Some((n, cols)) = rl.split_first() else {
                        return Err(one(SpecError {
                            pos: Some(r.pos()),
                            context: None,
                            message: "empty relation declaration".to_string(),
                        }));
                    };
                    spec.state.push(RelDecl {
                        name: atom(n, "a relation name").map_err(one)?,
                        columns: cols.iter().map(sort).collect::<PResult<_>>().map_err(one)?,
                    });
                }
            }
            Some("op") => {
                let op = parser.op(it, l).map_err(one)?;
                positions.push((format!("op {}", op.name), it.pos()));
                spec.ops.push(op);
            }
            Some("query") => {
                let [_, n, ps, body] = l else {
                    return Err(one(SpecError {
                        pos: Some(it.pos()),
                        context: None,
                        message: "expected `(query NAME (params) F)`".to_string(),
                    }));
                };
                let params = params(ps).map_err(one)?;
                let saved = parser.scope.clone();
                parser.scope.extend(params.iter().map(|p| p.name.clone()));
                let body = parser.formula(body).map_err(one)?;
                parser.scope = saved;
                let name = atom(n, "a query name").map_err(one)?;
                positions.push((format!("query {name}"), it.pos()));
                spec.queries.push(QuerySpec { name, params, body });
            }
            _ => {
                return Err(one(SpecError {
                    pos: Some(it.pos()),
                    context: None,
                    message: "expected `state`, `const`, `op` or `query`".to_string(),
                }))
            }
        }
    }
    super::validate::validate(&spec).map_err(|errs| {
        errs.into_iter()
            .map(|mut e| {
                if let Some(ctx) = &e.context {
                    e.pos = positions.iter().find(|(c, _)| c == ctx).map(|(_, p)| *p);
                }
                e
            })
            .collect::<Vec<_>>()
    })?;
    Ok(spec)
}
