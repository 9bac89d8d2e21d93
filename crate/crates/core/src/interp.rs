//! Concrete interpreter: guards, effector generation and application.
//!
//! An [`Effector`] is ground. Comprehensions and every reference to the
//! source state are evaluated when it is generated; what remains are
//! conditions over the target state ([`Cond`]), evaluated when it is applied.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::spec::{CrdtSpec, Formula, OpSpec, Param, QuerySpec, Slot, Sort, UpdateKind};

/// An element (`e0, e1, ...`) or identifier (`i0 < i1 < ...`). Spec
/// constants such as RGA's `root` denote `i0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub sort: Sort,
    pub index: u32,
}

impl Atom {
    pub const fn elem(index: u32) -> Atom {
        Atom { sort: Sort::Elem, index }
    }

    pub const fn id(index: u32) -> Atom {
        Atom { sort: Sort::Id, index }
    }

    /// Parses `e3` / `i0`.
    pub fn parse(s: &str) -> Option<Atom> {
        let (sort, rest) = match s.as_bytes().first()? {
            b'e' => (Sort::Elem, &s[1..]),
            b'i' => (Sort::Id, &s[1..]),
            _ => return None,
        };
        Some(Atom { sort, index: rest.parse().ok()? })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.sort {
            Sort::Elem => 'e',
            Sort::Id => 'i',
        };
        write!(f, "{p}{}", self.index)
    }
}

pub type Tuple = Vec<Atom>;

/// Relation name and tuple pattern; `None` positions are wildcards.
pub type WritePattern = (String, Vec<Option<Atom>>);

/// One finite set of tuples per state relation, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConcreteState {
    rels: Vec<BTreeSet<Tuple>>,
}

impl ConcreteState {
    /// The initial state: every relation empty.
    pub fn empty(spec: &CrdtSpec) -> ConcreteState {
        ConcreteState {
            rels: spec.state.iter().map(|_| BTreeSet::new()).collect(),
        }
    }

    pub fn relation(&self, rel: usize) -> &BTreeSet<Tuple> {
        &self.rels[rel]
    }

    pub fn relations(&self) -> impl Iterator<Item = &BTreeSet<Tuple>> {
        self.rels.iter()
    }

    pub fn contains(&self, rel: usize, tuple: &[Atom]) -> bool {
        self.rels[rel].contains(tuple)
    }

    pub fn insert(&mut self, rel: usize, tuple: Tuple) -> bool {
        self.rels[rel].insert(tuple)
    }

    pub fn remove(&mut self, rel: usize, tuple: &[Atom]) -> bool {
        self.rels[rel].remove(tuple)
    }

    pub fn is_empty(&self) -> bool {
        self.rels.iter().all(BTreeSet::is_empty)
    }

    /// Every atom occurring in some tuple.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        self.rels.iter().flatten().flatten().copied().collect()
    }

    /// Renders as `{S: (e0 i1), (e1 i2); R: }` using the spec's relation names.
    pub fn display<'a>(&'a self, spec: &'a CrdtSpec) -> impl fmt::Display + 'a {
        StateDisplay { state: self, spec }
    }
}

struct StateDisplay<'a> {
    state: &'a ConcreteState,
    spec: &'a CrdtSpec,
}

impl fmt::Display for StateDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (decl, tuples)) in self.spec.state.iter().zip(&self.state.rels).enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}:", decl.name)?;
            for (j, t) in tuples.iter().enumerate() {
                f.write_str(if j == 0 { " " } else { ", " })?;
                write_tuple(f, t.iter().map(|a| Some(*a)))?;
            }
        }
        f.write_str("}")
    }
}

fn write_tuple(f: &mut fmt::Formatter<'_>, t: impl Iterator<Item = Option<Atom>>) -> fmt::Result {
    f.write_str("(")?;
    for (k, a) in t.enumerate() {
        if k > 0 {
            f.write_str(" ")?;
        }
        match a {
            Some(a) => write!(f, "{a}")?,
            None => f.write_str("_")?,
        }
    }
    f.write_str(")")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(Atom),
    /// Variable bound by a quantifier over the target state.
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CSlot {
    Bind(String),
    Is(Term),
    Wild,
}

/// A condition over the target state only. Relations are indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cond {
    True,
    False,
    Not(Box<Cond>),
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Eq(Term, Term),
    Lt(Term, Term),
    In(usize, Vec<Term>),
    Exists(usize, Vec<CSlot>, Box<Cond>),
    Forall(usize, Vec<CSlot>, Box<Cond>),
}

fn not(c: Cond) -> Cond {
    match c {
        Cond::True => Cond::False,
        Cond::False => Cond::True,
        Cond::Not(inner) => *inner,
        c => Cond::Not(Box::new(c)),
    }
}

fn and(cs: impl IntoIterator<Item = Cond>) -> Cond {
    let mut out = Vec::new();
    for c in cs {
        match c {
            Cond::True => {}
            Cond::False => return Cond::False,
            Cond::And(inner) => out.extend(inner),
            c => out.push(c),
        }
    }
    match out.len() {
        0 => Cond::True,
        1 => out.pop().unwrap_or(Cond::True),
        _ => Cond::And(out),
    }
}

fn or(cs: impl IntoIterator<Item = Cond>) -> Cond {
    let mut out = Vec::new();
    for c in cs {
        match c {
            Cond::False => {}
            Cond::True => return Cond::True,
            Cond::Or(inner) => out.extend(inner),
            c => out.push(c),
        }
    }
    match out.len() {
        0 => Cond::False,
        1 => out.pop().unwrap_or(Cond::False),
        _ => Cond::Or(out),
    }
}

fn eq_terms(a: Term, b: Term) -> Cond {
    match (&a, &b) {
        (Term::Const(x), Term::Const(y)) => bool_cond(x == y),
        _ if a == b => Cond::True,
        _ => Cond::Eq(a, b),
    }
}

fn bool_cond(b: bool) -> Cond {
    if b {
        Cond::True
    } else {
        Cond::False
    }
}

impl Cond {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Cond::True => Some(true),
            Cond::False => Some(false),
            _ => None,
        }
    }

    /// Evaluates against a target state.
    pub fn eval(&self, tgt: &ConcreteState) -> bool {
        self.eval_in(tgt, &mut Vec::new())
    }

    fn eval_in(&self, tgt: &ConcreteState, env: &mut Vec<(String, Atom)>) -> bool {
        let term = |t: &Term, env: &Vec<(String, Atom)>| match t {
            Term::Const(a) => *a,
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, a)| *a)
                .unwrap_or_else(|| panic!("unbound variable `{v}` in residual condition")),
        };
        match self {
            Cond::True => true,
            Cond::False => false,
            Cond::Not(c) => !c.eval_in(tgt, env),
            Cond::And(cs) => cs.iter().all(|c| c.eval_in(tgt, env)),
            Cond::Or(cs) => cs.iter().any(|c| c.eval_in(tgt, env)),
            Cond::Eq(a, b) => term(a, env) == term(b, env),
            Cond::Lt(a, b) => term(a, env).index < term(b, env).index,
            Cond::In(r, ts) => {
                let t: Tuple = ts.iter().map(|x| term(x, env)).collect();
                tgt.contains(*r, &t)
            }
            Cond::Exists(r, slots, body) | Cond::Forall(r, slots, body) => {
                let exists = matches!(self, Cond::Exists(..));
                for tuple in tgt.relation(*r) {
                    let mark = env.len();
                    let mut matched = true;
                    for (slot, a) in slots.iter().zip(tuple) {
                        match slot {
                            CSlot::Wild => {}
                            CSlot::Is(t) => {
                                if term(t, env) != *a {
                                    matched = false;
                                    break;
                                }
                            }
                            CSlot::Bind(v) => env.push((v.clone(), *a)),
                        }
                    }
                    let holds = matched && body.eval_in(tgt, env);
                    env.truncate(mark);
                    if matched {
                        if exists && holds {
                            return true;
                        }
                        if !exists && !holds {
                            return false;
                        }
                    }
                }
                !exists
            }
        }
    }

    fn collect_atoms(&self, out: &mut BTreeSet<Atom>) {
        let term = |t: &Term, out: &mut BTreeSet<Atom>| {
            if let Term::Const(a) = t {
                out.insert(*a);
            }
        };
        match self {
            Cond::True | Cond::False => {}
            Cond::Not(c) => c.collect_atoms(out),
            Cond::And(cs) | Cond::Or(cs) => cs.iter().for_each(|c| c.collect_atoms(out)),
            Cond::Eq(a, b) | Cond::Lt(a, b) => {
                term(a, out);
                term(b, out);
            }
            Cond::In(_, ts) => ts.iter().for_each(|t| term(t, out)),
            Cond::Exists(_, slots, body) | Cond::Forall(_, slots, body) => {
                for s in slots {
                    if let CSlot::Is(t) = s {
                        term(t, out);
                    }
                }
                body.collect_atoms(out);
            }
        }
    }

    /// Relation patterns this condition may read; `None` positions are free.
    fn reads(&self, out: &mut Vec<(usize, Vec<Option<Atom>>)>) {
        let fixed = |t: &Term| match t {
            Term::Const(a) => Some(*a),
            Term::Var(_) => None,
        };
        match self {
            Cond::True | Cond::False | Cond::Eq(..) | Cond::Lt(..) => {}
            Cond::Not(c) => c.reads(out),
            Cond::And(cs) | Cond::Or(cs) => cs.iter().for_each(|c| c.reads(out)),
            Cond::In(r, ts) => out.push((*r, ts.iter().map(fixed).collect())),
            Cond::Exists(r, slots, body) | Cond::Forall(r, slots, body) => {
                out.push((
                    *r,
                    slots
                        .iter()
                        .map(|s| match s {
                            CSlot::Is(t) => fixed(t),
                            _ => None,
                        })
                        .collect(),
                ));
                body.reads(out);
            }
        }
    }
}

/// A ground update. `pattern` positions that are `None` match any atom
/// (removals only).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundUpdate {
    pub kind: UpdateKind,
    pub rel: usize,
    pub pattern: Vec<Option<Atom>>,
    pub when: Cond,
}

impl GroundUpdate {
    pub fn matches(&self, tuple: &[Atom]) -> bool {
        self.pattern
            .iter()
            .zip(tuple)
            .all(|(p, a)| p.is_none_or(|p| p == *a))
    }
}

/// A closed update function. Structural equality implies functional equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Effector {
    pub op: String,
    pub updates: Vec<GroundUpdate>,
}

impl Effector {
    pub fn identity(op: &str) -> Effector {
        Effector {
            op: op.to_string(),
            updates: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.updates.is_empty()
    }

    /// Atoms fixed in written patterns.
    pub fn written_atoms(&self) -> BTreeSet<Atom> {
        self.updates.iter().flat_map(|u| u.pattern.iter().flatten().copied()).collect()
    }

    /// Every atom the effector mentions.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = self.written_atoms();
        for u in &self.updates {
            u.when.collect_atoms(&mut out);
        }
        out
    }

    /// Two effectors conflict when their written patterns share an atom.
    pub fn conflicts_with(&self, other: &Effector) -> bool {
        let mine = self.written_atoms();
        !mine.is_empty() && other.written_atoms().iter().any(|a| mine.contains(a))
    }

    pub fn display<'a>(&'a self, spec: &'a CrdtSpec) -> impl fmt::Display + 'a {
        EffectorDisplay { eff: self, spec }
    }
}

struct EffectorDisplay<'a> {
    eff: &'a Effector,
    spec: &'a CrdtSpec,
}

impl fmt::Display for EffectorDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.eff.op)?;
        for (i, u) in self.eff.updates.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let sign = match u.kind {
                UpdateKind::Add => '+',
                UpdateKind::Remove => '-',
            };
            write!(f, "{sign}{}", self.spec.state[u.rel].name)?;
            write_tuple(f, u.pattern.iter().copied())?;
            if u.when != Cond::True {
                f.write_str(" if ..")?;
            }
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("unknown operation `{0}`")]
    UnknownOp(String),
    #[error("unknown query `{0}`")]
    UnknownQuery(String),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("argument `{param}` of `{name}` must be {expected}, got {got}")]
    IllSorted { name: String, param: String, expected: Sort, got: Atom },
}

type Env = Vec<(String, Term)>;

struct Residualizer<'a> {
    spec: &'a CrdtSpec,
    src: &'a ConcreteState,
}

impl Residualizer<'_> {
    fn lookup(env: &Env, v: &str) -> Term {
        env.iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, t)| t.clone())
            .unwrap_or_else(|| panic!("unbound variable `{v}` in validated spec"))
    }

    fn rel(&self, name: &str) -> usize {
        self.spec
            .relation(name)
            .unwrap_or_else(|| panic!("unknown relation `{name}` in validated spec"))
            .0
    }

    /// Source tuples of `rel` compatible with the constant slots, each with
    /// its bindings and the equalities needed for non-constant matches.
    fn source_matches(&self, rel: usize, slots: &[Slot], env: &Env) -> Vec<(Env, Cond)> {
        let mut out = Vec::new();
        'tuples: for tuple in self.src.relation(rel) {
            let mut binds = Vec::new();
            let mut eqs = Vec::new();
            for (slot, a) in slots.iter().zip(tuple) {
                match slot {
                    Slot::Wild => {}
                    Slot::Bind(v) => binds.push((v.clone(), Term::Const(*a))),
                    Slot::Match(v) => match Self::lookup(env, v) {
                        Term::Const(c) if c != *a => continue 'tuples,
                        Term::Const(_) => {}
                        t => eqs.push(eq_terms(t, Term::Const(*a))),
                    },
                }
            }
            out.push((binds, and(eqs)));
        }
        out
    }

    fn formula(&self, f: &Formula, env: &mut Env) -> Cond {
        match f {
            Formula::True => Cond::True,
            Formula::False => Cond::False,
            Formula::Not(g) => not(self.formula(g, env)),
            Formula::And(gs) => and(gs.iter().map(|g| self.formula(g, env)).collect::<Vec<_>>()),
            Formula::Or(gs) => or(gs.iter().map(|g| self.formula(g, env)).collect::<Vec<_>>()),
            Formula::Implies(a, b) => {
                let a = self.formula(a, env);
                or([not(a), self.formula(b, env)])
            }
            Formula::Eq(a, b) => eq_terms(Self::lookup(env, a), Self::lookup(env, b)),
            Formula::Lt(a, b) => match (Self::lookup(env, a), Self::lookup(env, b)) {
                (Term::Const(x), Term::Const(y)) => bool_cond(x.index < y.index),
                (x, y) => Cond::Lt(x, y),
            },
            Formula::In(r, args) => {
                let rel = self.rel(&r.name);
                let terms: Vec<Term> = args.iter().map(|a| Self::lookup(env, a)).collect();
                if r.target {
                    return Cond::In(rel, terms);
                }
                let slots: Vec<Slot> = args.iter().map(|a| Slot::Match(a.clone())).collect();
                or(self.source_matches(rel, &slots, env).into_iter().map(|(_, c)| c).collect::<Vec<_>>())
            }
            Formula::Exists(r, slots, body) | Formula::Forall(r, slots, body) => {
                let exists = matches!(f, Formula::Exists(..));
                let rel = self.rel(&r.name);
                if r.target {
                    let mark = env.len();
                    let cslots = slots
                        .iter()
                        .map(|s| match s {
                            Slot::Wild => CSlot::Wild,
                            Slot::Match(v) => CSlot::Is(Self::lookup(env, v)),
                            Slot::Bind(v) => {
                                env.push((v.clone(), Term::Var(v.clone())));
                                CSlot::Bind(v.clone())
                            }
                        })
                        .collect();
                    let body = self.formula(body, env);
                    env.truncate(mark);
                    return match (exists, &body) {
                        (false, Cond::True) => Cond::True,
                        (true, Cond::False) => Cond::False,
                        _ if exists => Cond::Exists(rel, cslots, Box::new(body)),
                        _ => Cond::Forall(rel, cslots, Box::new(body)),
                    };
                }
                let mut parts = Vec::new();
                for (binds, eqs) in self.source_matches(rel, slots, env) {
                    let mark = env.len();
                    env.extend(binds);
                    let b = self.formula(body, env);
                    env.truncate(mark);
                    parts.push(if exists { and([eqs, b]) } else { or([not(eqs), b]) });
                }
                if exists {
                    or(parts)
                } else {
                    and(parts)
                }
            }
        }
    }
}

fn bind_params(spec: &CrdtSpec, name: &str, params: &[Param], args: &[Atom]) -> Result<Env, InterpError> {
    if params.len() != args.len() {
        return Err(InterpError::Arity {
            name: name.to_string(),
            expected: params.len(),
            got: args.len(),
        });
    }
    let mut env: Env = spec
        .consts
        .iter()
        .map(|c| (c.name.clone(), Term::Const(Atom::id(0))))
        .collect();
    for (p, a) in params.iter().zip(args) {
        if p.sort != a.sort {
            return Err(InterpError::IllSorted {
                name: name.to_string(),
                param: p.name.clone(),
                expected: p.sort,
                got: *a,
            });
        }
        env.push((p.name.clone(), Term::Const(*a)));
    }
    Ok(env)
}

fn source_bool(c: Cond) -> bool {
    c.as_bool()
        .unwrap_or_else(|| panic!("source-only formula did not reduce to a constant: {c:?}"))
}

/// Generates the effector of `op(args)` at source state `src`.
pub fn gen_effector(spec: &CrdtSpec, op: &OpSpec, args: &[Atom], src: &ConcreteState) -> Result<Effector, InterpError> {
    let mut env = bind_params(spec, &op.name, &op.params, args)?;
    let r = Residualizer { spec, src };
    if !source_bool(r.formula(&op.guard, &mut env)) {
        return Ok(Effector::identity(&op.name));
    }
    let mut updates = Vec::new();
    for u in &op.updates {
        let rel = r.rel(&u.rel);
        let bindings = match &u.range {
            None => alloc::vec![(Vec::new(), Cond::True)],
            Some(range) => r.source_matches(r.rel(&range.rel.name), &range.slots, &env),
        };
        for (binds, _) in bindings {
            let mark = env.len();
            env.extend(binds);
            let when = r.formula(&u.when, &mut env);
            if when != Cond::False {
                let pattern = u
                    .tuple
                    .iter()
                    .map(|t| {
                        t.as_ref().map(|v| match Residualizer::lookup(&env, v) {
                            Term::Const(a) => a,
                            Term::Var(_) => unreachable!("update tuples use source bindings only"),
                        })
                    })
                    .collect();
                updates.push(GroundUpdate {
                    kind: u.kind,
                    rel,
                    pattern,
                    when,
                });
            }
            env.truncate(mark);
        }
    }
    Ok(Effector {
        op: op.name.clone(),
        updates,
    })
}

/// Looks up `op` by name, then [`gen_effector`].
pub fn gen_effector_named(spec: &CrdtSpec, op: &str, args: &[Atom], src: &ConcreteState) -> Result<Effector, InterpError> {
    let o = spec.op(op).ok_or_else(|| InterpError::UnknownOp(op.to_string()))?;
    gen_effector(spec, o, args, src)
}

/// Applies an effector. Conditions are all decided on `tgt`, then removals
/// happen before additions.
pub fn apply_effector(e: &Effector, tgt: &ConcreteState) -> ConcreteState {
    let live: Vec<&GroundUpdate> = e.updates.iter().filter(|u| u.when.eval(tgt)).collect();
    let mut out = tgt.clone();
    for u in live.iter().filter(|u| u.kind == UpdateKind::Remove) {
        out.rels[u.rel].retain(|t| !u.matches(t));
    }
    for u in live.iter().filter(|u| u.kind == UpdateKind::Add) {
        out.rels[u.rel].insert(u.pattern.iter().map(|a| a.expect("added tuples are ground")).collect());
    }
    out
}

/// Applies `effs` left to right.
pub fn fold_effectors<'a>(start: &ConcreteState, effs: impl IntoIterator<Item = &'a Effector>) -> ConcreteState {
    effs.into_iter().fold(start.clone(), |s, e| apply_effector(e, &s))
}

/// Generates `op(args)` after the history `effs` has been applied to `start`.
pub fn run_op_with_history(
    spec: &CrdtSpec,
    op: &OpSpec,
    args: &[Atom],
    start: &ConcreteState,
    effs: &[Effector],
) -> Result<Effector, InterpError> {
    gen_effector(spec, op, args, &fold_effectors(start, effs))
}

pub fn eval_query(spec: &CrdtSpec, query: &QuerySpec, args: &[Atom], src: &ConcreteState) -> Result<bool, InterpError> {
    let mut env = bind_params(spec, &query.name, &query.params, args)?;
    Ok(source_bool(Residualizer { spec, src }.formula(&query.body, &mut env)))
}

pub fn eval_query_named(spec: &CrdtSpec, query: &str, args: &[Atom], src: &ConcreteState) -> Result<bool, InterpError> {
    let q = spec.query(query).ok_or_else(|| InterpError::UnknownQuery(query.to_string()))?;
    eval_query(spec, q, args, src)
}

/// Relation name and tuple pattern written by the effector of `op(args)` at
/// `src`. `None` positions are wildcards.
pub fn wr_set(
    spec: &CrdtSpec,
    op: &OpSpec,
    args: &[Atom],
    src: &ConcreteState,
) -> Result<BTreeSet<WritePattern>, InterpError> {
    let e = gen_effector(spec, op, args, src)?;
    Ok(e.updates
        .iter()
        .map(|u| (spec.state[u.rel].name.clone(), u.pattern.clone()))
        .collect())
}

/// Whether `e1` and `e2` commute when applied at `s`.
pub fn commute_at(e1: &Effector, e2: &Effector, s: &ConcreteState) -> bool {
    apply_effector(e1, &apply_effector(e2, s)) == apply_effector(e2, &apply_effector(e1, s))
}

/// Largest tuple pool enumerated exhaustively by [`commutes_within`].
const EXHAUSTIVE_POOL: usize = 14;
/// Subset size bound when the pool is larger.
const SPARSE_SUBSETS: usize = 3;

/// Checks `e1 ∘ e2 = e2 ∘ e1` over target states built from the tuples the
/// two effectors can read or write, using their atoms plus one spare atom
/// per sort. Small pools are enumerated exhaustively, larger ones up to
/// subsets of three tuples.
pub fn commutes_within(spec: &CrdtSpec, e1: &Effector, e2: &Effector) -> bool {
    let pool = relevant_tuples(spec, &[e1, e2]);
    let states = subsets(spec, &pool);
    states.iter().all(|s| commute_at(e1, e2, s))
}

fn relevant_tuples(spec: &CrdtSpec, effs: &[&Effector]) -> Vec<(usize, Tuple)> {
    let mut atoms: BTreeSet<Atom> = effs.iter().flat_map(|e| e.atoms()).collect();
    atoms.insert(Atom::id(0));
    let spare = |sort| atoms.iter().filter(|a| a.sort == sort).map(|a| a.index + 1).max().unwrap_or(0);
    let (se, si) = (spare(Sort::Elem), spare(Sort::Id));
    atoms.insert(Atom::elem(se));
    atoms.insert(Atom::id(si));
    let mut patterns = Vec::new();
    for e in effs {
        for u in &e.updates {
            patterns.push((u.rel, u.pattern.clone()));
            u.when.reads(&mut patterns);
        }
    }
    let mut pool = BTreeSet::new();
    for (rel, pat) in patterns {
        let mut partial: Vec<Tuple> = alloc::vec![Vec::new()];
        for (col, fixed) in spec.state[rel].columns.iter().zip(&pat) {
            let choices: Vec<Atom> = match fixed {
                Some(a) => alloc::vec![*a],
                None => atoms.iter().filter(|a| a.sort == *col).copied().collect(),
            };
            partial = partial
                .into_iter()
                .flat_map(|t| {
                    choices.iter().map(move |a| {
                        let mut t = t.clone();
                        t.push(*a);
                        t
                    })
                })
                .collect();
        }
        pool.extend(partial.into_iter().map(|t| (rel, t)));
    }
    pool.into_iter().collect()
}

fn subsets(spec: &CrdtSpec, pool: &[(usize, Tuple)]) -> Vec<ConcreteState> {
    let build = |picked: &mut dyn Iterator<Item = usize>| {
        let mut s = ConcreteState::empty(spec);
        for i in picked {
            s.insert(pool[i].0, pool[i].1.clone());
        }
        s
    };
    if pool.len() <= EXHAUSTIVE_POOL {
        return (0u32..1 << pool.len())
            .map(|mask| build(&mut (0..pool.len()).filter(|i| mask & (1 << i) != 0)))
            .collect();
    }
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = alloc::vec![Vec::new()];
    while let Some(chosen) = stack.pop() {
        out.push(build(&mut chosen.iter().copied()));
        if chosen.len() < SPARSE_SUBSETS {
            let from = chosen.last().map_or(0, |l| l + 1);
            for i in from..pool.len() {
                let mut next = chosen.clone();
                next.push(i);
                stack.push(next);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::builtin;

    const A: Atom = Atom::elem(0);
    const B: Atom = Atom::elem(1);

    fn state(spec: &CrdtSpec, tuples: &[(&str, &[Atom])]) -> ConcreteState {
        let mut s = ConcreteState::empty(spec);
        for (r, t) in tuples {
            s.insert(spec.relation(r).unwrap().0, t.to_vec());
        }
        s
    }

    fn eff(spec: &CrdtSpec, op: &str, args: &[Atom], src: &ConcreteState) -> Effector {
        gen_effector_named(spec, op, args, src).unwrap()
    }

    #[test]
    fn simple_set_add_to_empty() {
        let s = builtin("simple-set").unwrap();
        let e = eff(&s, "Add", &[A], &ConcreteState::empty(&s));
        assert_eq!(apply_effector(&e, &ConcreteState::empty(&s)), state(&s, &[("S", &[A])]));
    }

    #[test]
    fn orset_remove_captures_observed_tags() {
        let s = builtin("orset").unwrap();
        let src = state(&s, &[("S", &[A, Atom::id(0)])]);
        let e = eff(&s, "Remove", &[A], &src);
        assert_eq!(e.updates.len(), 1);
        assert_eq!(e.updates[0].pattern, [Some(A), Some(Atom::id(0))]);
        assert!(eff(&s, "Remove", &[A], &ConcreteState::empty(&s)).is_identity());
    }

    #[test]
    fn orset_wr_set_lists_removed_pairs() {
        let s = builtin("orset").unwrap();
        let (i1, i2, i3) = (Atom::id(1), Atom::id(2), Atom::id(3));
        let src = state(&s, &[("S", &[A, i1]), ("S", &[A, i2]), ("S", &[B, i3])]);
        let w = wr_set(&s, s.op("Remove").unwrap(), &[A], &src).unwrap();
        let want: BTreeSet<_> = [
            ("S".to_string(), alloc::vec![Some(A), Some(i1)]),
            ("S".to_string(), alloc::vec![Some(A), Some(i2)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(w, want);
    }

    #[test]
    fn uset_remove_requires_target_membership() {
        let s = builtin("uset").unwrap();
        let src = state(&s, &[("S", &[A])]);
        let e = eff(&s, "Remove", &[A], &src);
        assert!(!e.is_identity());
        let empty = ConcreteState::empty(&s);
        assert_eq!(apply_effector(&e, &empty), empty);
        assert!(wr_set(&s, s.op("Remove").unwrap(), &[A], &empty).unwrap().is_empty());
    }

    #[test]
    fn rga_add_right_without_parent_is_identity() {
        let s = builtin("rga").unwrap();
        let e = eff(&s, "AddRight", &[Atom::id(1), A, Atom::id(2)], &ConcreteState::empty(&s));
        assert!(e.is_identity());
        let at_root = eff(&s, "AddRight", &[Atom::id(0), A, Atom::id(1)], &ConcreteState::empty(&s));
        let after = apply_effector(&at_root, &ConcreteState::empty(&s));
        assert_eq!(after, state(&s, &[("A", &[A, Atom::id(1), Atom::id(0)])]));
    }

    #[test]
    fn rga_add_right_residual_checks_target_parent() {
        let s = builtin("rga").unwrap();
        let (i1, i2) = (Atom::id(1), Atom::id(2));
        let src = state(&s, &[("A", &[A, i1, Atom::id(0)])]);
        let e = eff(&s, "AddRight", &[i1, B, i2], &src);
        assert_eq!(apply_effector(&e, &ConcreteState::empty(&s)), ConcreteState::empty(&s));
        assert!(apply_effector(&e, &src).contains(0, &[B, i2, i1]));
    }

    #[test]
    fn rga_no_tomb_remove_uses_wildcards() {
        let s = builtin("rga-no-tomb").unwrap();
        let i1 = Atom::id(1);
        let src = state(&s, &[("S", &[A, i1, Atom::id(0)])]);
        let e = eff(&s, "Remove", &[i1], &src);
        let tgt = state(&s, &[("S", &[A, i1, Atom::id(0)]), ("S", &[B, Atom::id(2), i1])]);
        assert_eq!(apply_effector(&e, &tgt), state(&s, &[("S", &[B, Atom::id(2), i1])]));
    }

    #[test]
    fn orset_tomb_lookup() {
        let s = builtin("orset-tomb").unwrap();
        let src = state(&s, &[("A", &[A, Atom::id(0)])]);
        assert!(eval_query_named(&s, "Lookup", &[A], &src).unwrap());
        assert!(!eval_query_named(&s, "Lookup", &[A], &ConcreteState::empty(&s)).unwrap());
        let dead = state(&s, &[("A", &[A, Atom::id(0)]), ("R", &[A, Atom::id(0)])]);
        assert!(!eval_query_named(&s, "Lookup", &[A], &dead).unwrap());
    }

    #[test]
    fn graph_remove_vertex_blocked_by_target_edge() {
        let s = builtin("graph-with-orset").unwrap();
        let (i1, i2) = (Atom::id(1), Atom::id(2));
        let src = state(&s, &[("V", &[A, i1])]);
        let e = eff(&s, "RemoveVertex", &[A], &src);
        assert_eq!(apply_effector(&e, &src), ConcreteState::empty(&s));
        let tgt = state(&s, &[("V", &[A, i1]), ("E", &[A, A, i2])]);
        assert_eq!(apply_effector(&e, &tgt), tgt);
    }

    #[test]
    fn ill_sorted_arguments_are_rejected() {
        let s = builtin("orset").unwrap();
        let err = gen_effector_named(&s, "Add", &[A, B], &ConcreteState::empty(&s)).unwrap_err();
        assert!(matches!(err, InterpError::IllSorted { .. }));
        assert!(matches!(
            gen_effector_named(&s, "Add", &[A], &ConcreteState::empty(&s)),
            Err(InterpError::Arity { .. })
        ));
    }

    #[test]
    fn commutation_examples() {
        let s = builtin("simple-set").unwrap();
        let e0 = ConcreteState::empty(&s);
        let add_a = eff(&s, "Add", &[A], &e0);
        let add_b = eff(&s, "Add", &[B], &e0);
        let rem_a = eff(&s, "Remove", &[A], &e0);
        assert!(commutes_within(&s, &add_a, &add_b));
        assert!(commutes_within(&s, &add_a, &add_a));
        assert!(!commutes_within(&s, &add_a, &rem_a));
    }

    #[test]
    fn atoms_round_trip_through_text() {
        for a in [A, Atom::id(7)] {
            assert_eq!(Atom::parse(&a.to_string()), Some(a));
        }
        assert_eq!(Atom::parse("x1"), None);
    }
}
