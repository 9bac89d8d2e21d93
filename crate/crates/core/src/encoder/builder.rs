//! Text generation for states, effectors and policy axioms.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::consistency::{ground_axioms, PFormula, Policy};
use crate::spec::{CrdtSpec, Formula, OpSpec, Slot, Sort, Update, UpdateKind};

pub(crate) fn and_all(parts: Vec<String>) -> String {
    let parts: Vec<String> = parts.into_iter().filter(|p| p != "true").collect();
    if parts.iter().any(|p| p == "false") {
        return "false".into();
    }
    match parts.len() {
        0 => "true".into(),
        1 => parts.into_iter().next().unwrap_or_default(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

pub(crate) fn or_all(parts: Vec<String>) -> String {
    let parts: Vec<String> = parts.into_iter().filter(|p| p != "false").collect();
    if parts.iter().any(|p| p == "true") {
        return "true".into();
    }
    match parts.len() {
        0 => "false".into(),
        1 => parts.into_iter().next().unwrap_or_default(),
        _ => format!("(or {})", parts.join(" ")),
    }
}

fn not(p: String) -> String {
    match p.as_str() {
        "true" => "false".into(),
        "false" => "true".into(),
        _ => format!("(not {p})"),
    }
}

fn binders(vars: &[(String, Sort)]) -> String {
    let items: Vec<String> = vars.iter().map(|(v, s)| format!("({v} {s})")).collect();
    format!("({})", items.join(" "))
}

fn quantify(kind: &str, vars: &[(String, Sort)], body: String) -> String {
    if vars.is_empty() || body == "true" && kind == "forall" || body == "false" && kind == "exists" {
        return body;
    }
    format!("({kind} {} {body})", binders(vars))
}

/// An operation instance chosen by the solver: one selector per operation
/// and one argument constant per parameter.
#[derive(Debug, Clone)]
pub(crate) struct Inst {
    pub label: String,
}

impl Inst {
    pub fn sel(&self, op: &str) -> String {
        format!("sel{}_{op}", self.label)
    }

    pub fn arg(&self, op: &str, param: &str) -> String {
        format!("arg{}_{op}_{param}", self.label)
    }
}

/// An effector: an instance generated at a named source state.
#[derive(Debug, Clone)]
pub(crate) struct Eff {
    pub tag: String,
    pub inst: Inst,
    pub src: String,
}

/// Application arguments, new bound variables and scope additions.
type PatternParts = (Vec<String>, Vec<(String, Sort)>, Vec<(String, String)>);

pub(crate) struct Builder<'a> {
    pub spec: &'a CrdtSpec,
    pub out: String,
    fresh: usize,
    applied: BTreeMap<(String, String), String>,
}

impl<'a> Builder<'a> {
    pub fn new(spec: &'a CrdtSpec) -> Self {
        Builder {
            spec,
            out: String::new(),
            fresh: 0,
            applied: BTreeMap::new(),
        }
    }

    pub fn line(&mut self, s: &str) {
        self.out.push_str(s);
        self.out.push('\n');
    }

    pub fn comment(&mut self, s: &str) {
        let _ = writeln!(self.out, "; {s}");
    }

    fn var(&mut self) -> String {
        self.fresh += 1;
        format!("q{}", self.fresh)
    }

    pub fn prelude(&mut self) {
        self.line("(set-logic UF)");
        self.line("(declare-sort Elem 0)");
        self.line("(declare-sort Id 0)");
        self.line("(declare-fun lt (Id Id) Bool)");
        self.line("(assert (forall ((x Id)) (not (lt x x))))");
        self.line("(assert (forall ((x Id) (y Id) (z Id)) (=> (and (lt x y) (lt y z)) (lt x z))))");
        self.line("(assert (forall ((x Id) (y Id)) (or (= x y) (lt x y) (lt y x))))");
        self.line("(declare-const root Id)");
        self.line("(assert (forall ((x Id)) (or (= x root) (lt root x))))");
        let mut init = String::new();
        for r in &self.spec.state {
            let _ = writeln!(init, "(define-fun init_{} {} Bool false)", r.name, self.columns(&r.columns).1);
        }
        self.out.push_str(&init);
    }

    /// Column variable names and the binder list for a relation.
    fn columns(&self, cols: &[Sort]) -> (Vec<String>, String) {
        let names: Vec<String> = (0..cols.len()).map(|i| format!("x{i}")).collect();
        let vars: Vec<(String, Sort)> = names.iter().cloned().zip(cols.iter().copied()).collect();
        (names, binders(&vars))
    }

    pub fn declare_state(&mut self, name: &str) {
        for r in &self.spec.state {
            let sorts: Vec<&str> = r.columns.iter().map(|s| s.name()).collect();
            let _ = writeln!(self.out, "(declare-fun {name}_{} ({}) Bool)", r.name, sorts.join(" "));
        }
    }

    /// `name := if cond then a else b`, relation by relation.
    pub fn ite_state(&mut self, name: &str, cond: &str, a: &str, b: &str) {
        for r in &self.spec.state {
            let (cols, bs) = self.columns(&r.columns);
            let args = cols.join(" ");
            let _ = writeln!(
                self.out,
                "(define-fun {name}_{rel} {bs} Bool (ite {cond} ({a}_{rel} {args}) ({b}_{rel} {args})))",
                rel = r.name
            );
        }
    }

    pub fn declare_inst(&mut self, inst: &Inst) {
        let spec = self.spec;
        let sels: Vec<String> = spec.ops.iter().map(|o| inst.sel(&o.name)).collect();
        for (o, s) in spec.ops.iter().zip(&sels) {
            let _ = writeln!(self.out, "(declare-const {s} Bool)");
            for p in &o.params {
                let _ = writeln!(self.out, "(declare-const {} {})", inst.arg(&o.name, &p.name), p.sort);
            }
        }
        match sels.len() {
            0 => self.line("(assert false)"),
            1 => {
                let _ = writeln!(self.out, "(assert {})", sels[0]);
            }
            _ => {
                let _ = writeln!(self.out, "(assert (or {}))", sels.join(" "));
                for i in 0..sels.len() {
                    for j in i + 1..sels.len() {
                        let _ = writeln!(self.out, "(assert (not (and {} {})))", sels[i], sels[j]);
                    }
                }
            }
        }
    }

    fn env(&self, inst: &Inst, op: &OpSpec) -> Vec<(String, String)> {
        let mut env: Vec<(String, String)> = self.spec.consts.iter().map(|c| (c.name.clone(), "root".into())).collect();
        env.extend(op.params.iter().map(|p| (p.name.clone(), inst.arg(&op.name, &p.name))));
        env
    }

    fn lookup(env: &[(String, String)], v: &str) -> String {
        env.iter()
            .rev()
            .find(|(n, _)| n == v)
            .map(|(_, t)| t.clone())
            .unwrap_or_else(|| panic!("unbound variable `{v}` in validated spec"))
    }

    fn sorts(&self, rel: &str) -> Vec<Sort> {
        self.spec
            .relation(rel)
            .map(|(_, r)| r.columns.clone())
            .unwrap_or_else(|| panic!("unknown relation `{rel}` in validated spec"))
    }

    /// Pattern → (application arguments, new bound variables, scope additions).
    fn pattern(&mut self, rel: &str, slots: &[Slot], env: &[(String, String)]) -> PatternParts {
        let mut args = Vec::new();
        let mut bound = Vec::new();
        let mut scope = Vec::new();
        for (slot, sort) in slots.iter().zip(self.sorts(rel)) {
            match slot {
                Slot::Match(v) => args.push(Self::lookup(env, v)),
                Slot::Wild => {
                    let q = self.var();
                    args.push(q.clone());
                    bound.push((q, sort));
                }
                Slot::Bind(v) => {
                    let q = self.var();
                    args.push(q.clone());
                    bound.push((q.clone(), sort));
                    scope.push((v.clone(), q));
                }
            }
        }
        (args, bound, scope)
    }

    fn app(state: &str, rel: &str, args: &[String]) -> String {
        if args.is_empty() {
            format!("{state}_{rel}")
        } else {
            format!("({state}_{rel} {})", args.join(" "))
        }
    }

    /// Compiles a spec formula; `src`/`tgt` name the source and target states.
    pub fn formula(&mut self, f: &Formula, env: &mut Vec<(String, String)>, src: &str, tgt: &str) -> String {
        match f {
            Formula::True => "true".into(),
            Formula::False => "false".into(),
            Formula::Not(g) => not(self.formula(g, env, src, tgt)),
            Formula::And(gs) => {
                let parts = gs.iter().map(|g| self.formula(g, env, src, tgt)).collect();
                and_all(parts)
            }
            Formula::Or(gs) => {
                let parts = gs.iter().map(|g| self.formula(g, env, src, tgt)).collect();
                or_all(parts)
            }
            Formula::Implies(a, b) => {
                let a = self.formula(a, env, src, tgt);
                let b = self.formula(b, env, src, tgt);
                or_all(alloc::vec![not(a), b])
            }
            Formula::Eq(a, b) => format!("(= {} {})", Self::lookup(env, a), Self::lookup(env, b)),
            Formula::Lt(a, b) => format!("(lt {} {})", Self::lookup(env, a), Self::lookup(env, b)),
            Formula::In(r, args) => {
                let state = if r.target { tgt } else { src };
                let args: Vec<String> = args.iter().map(|a| Self::lookup(env, a)).collect();
                Self::app(state, &r.name, &args)
            }
            Formula::Exists(r, slots, body) | Formula::Forall(r, slots, body) => {
                let state = if r.target { tgt } else { src };
                let (args, bound, scope) = self.pattern(&r.name, slots, env);
                let mark = env.len();
                env.extend(scope);
                let b = self.formula(body, env, src, tgt);
                env.truncate(mark);
                let member = Self::app(state, &r.name, &args);
                if matches!(f, Formula::Exists(..)) {
                    quantify("exists", &bound, and_all(alloc::vec![member, b]))
                } else {
                    quantify("forall", &bound, or_all(alloc::vec![not(member), b]))
                }
            }
        }
    }

    /// Defines `g_<tag>_<op>` for every operation.
    pub fn guards(&mut self, eff: &Eff) {
        for op in &self.spec.ops {
            let mut env = self.env(&eff.inst, op);
            let body = self.formula(&op.guard, &mut env, &eff.src, "none");
            let _ = writeln!(self.out, "(define-fun g_{}_{} () Bool {body})", eff.tag, op.name);
        }
    }

    /// Membership condition of tuple `cols` in update `u` of `op` applied to `tgt`.
    fn update_cond(&mut self, eff: &Eff, op: &OpSpec, u: &Update, cols: &[String], tgt: &str, with_when: bool) -> String {
        let mut env = self.env(&eff.inst, op);
        let mut parts = alloc::vec![format!("g_{}_{}", eff.tag, op.name)];
        let mut exist = Vec::new();
        let mut range_bound: Vec<(String, String)> = Vec::new();
        if let Some(range) = &u.range {
            let mut args = Vec::new();
            for (slot, sort) in range.slots.iter().zip(self.sorts(&range.rel.name)) {
                match slot {
                    Slot::Match(v) => args.push(Self::lookup(&env, v)),
                    Slot::Wild => {
                        let q = self.var();
                        args.push(q.clone());
                        exist.push((q, sort));
                    }
                    Slot::Bind(v) => {
                        let pos = u.tuple.iter().position(|t| t.as_deref() == Some(v.as_str()));
                        let term = match pos {
                            Some(p) => cols[p].clone(),
                            None => {
                                let q = self.var();
                                exist.push((q.clone(), sort));
                                q
                            }
                        };
                        args.push(term.clone());
                        range_bound.push((v.clone(), term));
                    }
                }
            }
            parts.push(Self::app(&eff.src, &range.rel.name, &args));
        }
        env.extend(range_bound.iter().cloned());
        for (p, t) in u.tuple.iter().enumerate() {
            if let Some(v) = t {
                let term = Self::lookup(&env, v);
                if term != cols[p] {
                    parts.push(format!("(= {} {})", cols[p], term));
                }
            }
        }
        if with_when {
            let w = self.formula(&u.when, &mut env, &eff.src, tgt);
            parts.push(w);
        }
        quantify("exists", &exist, and_all(parts))
    }

    /// State obtained by applying `eff` to `tgt`; defined once per pair.
    pub fn apply(&mut self, eff: &Eff, tgt: &str) -> String {
        if let Some(n) = self.applied.get(&(eff.tag.clone(), tgt.to_string())) {
            return n.clone();
        }
        let name = format!("{tgt}_{}", eff.tag);
        let spec = self.spec;
        for r in &spec.state {
            let (cols, bs) = self.columns(&r.columns);
            let keep = Self::app(tgt, &r.name, &cols);
            let mut per_op = Vec::new();
            for op in &spec.ops {
                let mut adds = Vec::new();
                let mut rems = Vec::new();
                for u in op.updates.iter().filter(|u| u.rel == r.name) {
                    let c = self.update_cond(eff, op, u, &cols, tgt, true);
                    match u.kind {
                        UpdateKind::Add => adds.push(c),
                        UpdateKind::Remove => rems.push(c),
                    }
                }
                let kept = if rems.is_empty() {
                    keep.clone()
                } else {
                    and_all(alloc::vec![keep.clone(), not(or_all(rems))])
                };
                per_op.push((eff.inst.sel(&op.name), or_all([alloc::vec![kept], adds].concat())));
            }
            let mut body = match per_op.pop() {
                Some((_, e)) => e,
                None => keep.clone(),
            };
            while let Some((sel, e)) = per_op.pop() {
                body = if e == body { body } else { format!("(ite {sel} {e} {body})") };
            }
            let _ = writeln!(self.out, "(define-fun {name}_{} {bs} Bool {body})", r.name);
        }
        self.applied.insert((eff.tag.clone(), tgt.to_string()), name.clone());
        name
    }

    /// Defines `w_<tag>_<Sort>`: atoms fixed in the effector's written tuples.
    pub fn write_sets(&mut self, eff: &Eff) {
        let spec = self.spec;
        for sort in [Sort::Elem, Sort::Id] {
            let mut per_op = Vec::new();
            for op in &spec.ops {
                let mut alts = Vec::new();
                for u in &op.updates {
                    let cols_sorts = self.sorts(&u.rel);
                    for (p, t) in u.tuple.iter().enumerate() {
                        if t.is_none() || cols_sorts[p] != sort {
                            continue;
                        }
                        // Tuple with `w` in column p and fresh variables elsewhere.
                        let mut cols = Vec::new();
                        let mut others = Vec::new();
                        for (k, s) in cols_sorts.iter().enumerate() {
                            if k == p {
                                cols.push("w".to_string());
                            } else {
                                let q = self.var();
                                cols.push(q.clone());
                                others.push((q, *s));
                            }
                        }
                        let c = self.update_cond(eff, op, u, &cols, "none", false);
                        alts.push(quantify("exists", &others, c));
                    }
                }
                per_op.push(and_all(alloc::vec![eff.inst.sel(&op.name), or_all(alts)]));
            }
            let _ = writeln!(self.out, "(define-fun w_{}_{sort} ((w {sort})) Bool {})", eff.tag, or_all(per_op));
        }
    }

    /// Defines and returns `c_<a>_<b>`: the write sets of `a` and `b` intersect.
    pub fn conflict(&mut self, a: &Eff, b: &Eff) -> String {
        let name = format!("c_{}_{}", a.tag, b.tag);
        let parts: Vec<String> = [Sort::Elem, Sort::Id]
            .iter()
            .map(|s| format!("(exists ((w {s})) (and (w_{}_{s} w) (w_{}_{s} w)))", a.tag, b.tag))
            .collect();
        let _ = writeln!(self.out, "(define-fun {name} () Bool {})", or_all(parts));
        name
    }

    /// Fresh identifiers of `inst` occur nowhere in the given states.
    pub fn fresh_absent(&mut self, inst: &Inst, states: &[&str]) {
        let spec = self.spec;
        for op in &spec.ops {
            for p in op.params.iter().filter(|p| p.fresh) {
                let a = inst.arg(&op.name, &p.name);
                let mut facts = Vec::new();
                for s in states {
                    for r in &spec.state {
                        let (cols, bs) = self.columns(&r.columns);
                        let other: Vec<String> = r
                            .columns
                            .iter()
                            .zip(&cols)
                            .filter(|(s, _)| **s == Sort::Id)
                            .map(|(_, c)| format!("(not (= {c} {a}))"))
                            .collect();
                        if !other.is_empty() {
                            facts.push(format!("(forall {bs} (=> {} {}))", Self::app(s, &r.name, &cols), and_all(other)));
                        }
                    }
                }
                if !facts.is_empty() {
                    let _ = writeln!(self.out, "(assert (=> {} {}))", inst.sel(&op.name), and_all(facts));
                }
            }
        }
    }

    /// For each fresh parameter: above `root` and every identifier of the
    /// generating source state.
    pub fn freshness(&mut self, eff: &Eff) {
        let spec = self.spec;
        for op in &spec.ops {
            for p in op.params.iter().filter(|p| p.fresh) {
                let a = eff.inst.arg(&op.name, &p.name);
                let sel = eff.inst.sel(&op.name);
                let mut facts = alloc::vec![format!("(lt root {a})")];
                for r in &spec.state {
                    let (cols, bs) = self.columns(&r.columns);
                    let below: Vec<String> = r
                        .columns
                        .iter()
                        .zip(&cols)
                        .filter(|(s, _)| **s == Sort::Id)
                        .map(|(_, c)| format!("(lt {c} {a})"))
                        .collect();
                    if !below.is_empty() {
                        facts.push(format!(
                            "(forall {bs} (=> {} {}))",
                            Self::app(&eff.src, &r.name, &cols),
                            and_all(below)
                        ));
                    }
                }
                let _ = writeln!(self.out, "(assert (=> {sel} {}))", and_all(facts));
            }
        }
    }

    /// Fresh identifiers of distinct instances differ; `unique` keys of the
    /// same operation differ.
    pub fn distinctness(&mut self, insts: &[&Inst]) {
        let spec = self.spec;
        for (x, i) in insts.iter().enumerate() {
            for j in &insts[x + 1..] {
                for o1 in &spec.ops {
                    for o2 in &spec.ops {
                        for p in o1.params.iter().filter(|p| p.fresh) {
                            for q in o2.params.iter().filter(|q| q.fresh) {
                                let _ = writeln!(
                                    self.out,
                                    "(assert (=> (and {} {}) (not (= {} {}))))",
                                    i.sel(&o1.name),
                                    j.sel(&o2.name),
                                    i.arg(&o1.name, &p.name),
                                    j.arg(&o2.name, &q.name)
                                );
                            }
                        }
                    }
                    if !o1.unique.is_empty() {
                        let same: Vec<String> = o1
                            .unique
                            .iter()
                            .map(|u| format!("(= {} {})", i.arg(&o1.name, u), j.arg(&o1.name, u)))
                            .collect();
                        let _ = writeln!(
                            self.out,
                            "(assert (=> (and {} {}) (not {})))",
                            i.sel(&o1.name),
                            j.sel(&o1.name),
                            and_all(same)
                        );
                    }
                }
            }
        }
    }

    /// Declares `d_<R>_<k>` constants and returns "the two states differ on
    /// the tuple d_R" for some relation R.
    pub fn differ(&mut self, a: &str, b: &str) -> String {
        let spec = self.spec;
        let mut alts = Vec::new();
        for r in &spec.state {
            let ds: Vec<String> = (0..r.columns.len()).map(|k| format!("d_{}_{k}", r.name)).collect();
            for (d, s) in ds.iter().zip(&r.columns) {
                let _ = writeln!(self.out, "(declare-const {d} {s})");
            }
            alts.push(format!("(distinct {} {})", Self::app(a, &r.name, &ds), Self::app(b, &r.name, &ds)));
        }
        or_all(alts)
    }

    /// Asserts `a ⊆ b` on the named relations.
    pub fn contained(&mut self, a: &str, b: &str, rels: &[&str]) {
        let spec = self.spec;
        for r in spec.state.iter().filter(|r| rels.contains(&r.name.as_str())) {
            let (cols, bs) = self.columns(&r.columns);
            let _ = writeln!(
                self.out,
                "(assert (forall {bs} (=> {} {})))",
                Self::app(a, &r.name, &cols),
                Self::app(b, &r.name, &cols)
            );
        }
    }

    /// "The two states are equal", quantified per relation.
    pub fn equal(&mut self, a: &str, b: &str) -> String {
        let spec = self.spec;
        let mut parts = Vec::new();
        for r in &spec.state {
            let (cols, bs) = self.columns(&r.columns);
            parts.push(format!("(forall {bs} (= {} {}))", Self::app(a, &r.name, &cols), Self::app(b, &r.name, &cols)));
        }
        and_all(parts)
    }
}

/// Names used when grounding policy axioms over a fixed list of events.
pub(crate) struct PolicyNames<'x> {
    pub effs: &'x [&'x Eff],
    /// `vis[i][j]`: a Boolean term.
    pub vis: Vec<Vec<String>>,
    /// `eo[i][j]`: declared constant names.
    pub eo: Vec<Vec<String>>,
    /// `conflict[i][j]` for i < j.
    pub conflict: BTreeMap<(usize, usize), String>,
}

pub(crate) fn ground_policy(policy: &Policy, names: &PolicyNames, spec: &CrdtSpec) -> Vec<String> {
    fn go(f: &PFormula, policy: &Policy, n: &PolicyNames, spec: &CrdtSpec) -> String {
        use PFormula::*;
        let rec = |g: &PFormula| go(g, policy, n, spec);
        match f {
            True => "true".into(),
            Not(a) => not(rec(a)),
            And(fs) => and_all(fs.iter().map(rec).collect()),
            Or(fs) => or_all(fs.iter().map(rec).collect()),
            Implies(a, b) => or_all(alloc::vec![not(rec(a)), rec(b)]),
            Iff(a, b) => {
                let (a, b) = (rec(a), rec(b));
                match (a.as_str(), b.as_str()) {
                    ("true", _) => b,
                    (_, "true") => a,
                    ("false", _) => not(b),
                    (_, "false") => not(a),
                    _ => format!("(= {a} {b})"),
                }
            }
            Vis(i, j) => n.vis[*i][*j].clone(),
            Eo(i, j) => n.eo[*i][*j].clone(),
            Conflict(i, j) => n.conflict[&(*i.min(j), *i.max(j))].clone(),
            Red(i) => match policy {
                Policy::Rb(red) => or_all(red.iter().filter(|o| spec.op(o).is_some()).map(|o| n.effs[*i].inst.sel(o)).collect()),
                _ => "false".into(),
            },
            Synced(i, j) => match policy {
                Policy::PsiRb(pairs) => {
                    let mut alts = Vec::new();
                    for (a, b) in pairs {
                        if spec.op(a).is_none() || spec.op(b).is_none() {
                            continue;
                        }
                        let (si, sj) = (&n.effs[*i].inst, &n.effs[*j].inst);
                        alts.push(and_all(alloc::vec![si.sel(a), sj.sel(b)]));
                        if a != b {
                            alts.push(and_all(alloc::vec![si.sel(b), sj.sel(a)]));
                        }
                    }
                    or_all(alts)
                }
                _ => "false".into(),
            },
            MoreThan(k) => if n.effs.len() > *k { "true" } else { "false" }.into(),
        }
    }
    ground_axioms(policy, names.effs.len())
        .iter()
        .map(|g| go(g, policy, names, spec))
        .filter(|s| s != "true")
        .collect()
}
