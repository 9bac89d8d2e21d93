//! SMT-LIB encoding of the non-interference conditions.
//!
//! Every query is satisfiable exactly when the checked property fails, so an
//! `unsat` answer proves it. Operation choice is a case split over Boolean
//! selectors, so one script covers all operation pairs of a specification.

mod builder;
pub mod model;
pub mod replay;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use builder::{ground_policy, Builder, Eff, Inst, PolicyNames};

use crate::consistency::Policy;
use crate::spec::CrdtSpec;

/// Which query a script encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Ni1,
    Ni2,
}

impl Condition {
    pub fn slug(self) -> &'static str {
        match self {
            Condition::Ni1 => "ni1",
            Condition::Ni2 => "ni2",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Ni1 => "NI-1",
            Condition::Ni2 => "NI-2",
        })
    }
}

/// Solver-side names of one operation instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstNames {
    pub label: String,
    /// `(operation, selector constant, argument constants in parameter order)`.
    pub ops: Vec<(String, String, Vec<String>)>,
}

/// Symbols needed to read a model back into concrete terms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptMeta {
    pub insts: Vec<InstNames>,
    /// Named Boolean unknowns, e.g. `("vis12", "v12")`.
    pub bits: Vec<(String, String)>,
    /// Declared (uninterpreted) states by label; relation `R` of state `s`
    /// is the predicate `s_R`.
    pub states: Vec<String>,
}

/// A complete solver input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub crdt: String,
    pub policy: String,
    pub condition: Option<Condition>,
    pub text: String,
    pub meta: ScriptMeta,
}

impl SmtScript {
    /// `<crdt>-<policy>-<ni1|ni2>.smt2`.
    pub fn file_name(&self) -> String {
        let cond = self.condition.map(Condition::slug).unwrap_or("query");
        format!("{}-{}-{cond}.smt2", self.crdt, self.policy)
    }
}

fn inst(label: &str) -> Inst {
    Inst { label: label.into() }
}

fn eff(tag: &str, i: &Inst, src: &str) -> Eff {
    Eff {
        tag: tag.into(),
        inst: i.clone(),
        src: src.into(),
    }
}

fn inst_names(spec: &CrdtSpec, i: &Inst) -> InstNames {
    InstNames {
        label: i.label.clone(),
        ops: spec
            .ops
            .iter()
            .map(|o| {
                let args = o.params.iter().map(|p| i.arg(&o.name, &p.name)).collect();
                (o.name.clone(), i.sel(&o.name), args)
            })
            .collect(),
    }
}

fn effector(b: &mut Builder, e: &Eff) {
    b.guards(e);
    b.write_sets(e);
    b.freshness(e);
}

/// Declares `eo` constants over the events, asserts the policy axioms, and
/// returns the `eo` names.
fn policy_axioms(b: &mut Builder, policy: &Policy, prefix: &str, effs: &[&Eff], vis: Vec<Vec<String>>) -> Vec<Vec<String>> {
    let n = effs.len();
    let mut eo = alloc::vec![alloc::vec![String::new(); n]; n];
    for (i, row) in eo.iter_mut().enumerate() {
        for (j, name) in row.iter_mut().enumerate() {
            if i != j {
                *name = format!("{prefix}{}{}", i, j);
                b.line(&format!("(declare-const {name} Bool)"));
            }
        }
    }
    let mut conflict = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            conflict.insert((i, j), b.conflict(effs[i], effs[j]));
        }
    }
    let names = PolicyNames {
        effs,
        vis,
        eo: eo.clone(),
        conflict,
    };
    for a in ground_policy(policy, &names, b.spec) {
        b.line(&format!("(assert {a})"));
    }
    eo
}

fn finish(b: &mut Builder) {
    b.line("(check-sat)");
    b.line("(get-model)");
}

fn header(b: &mut Builder, spec: &CrdtSpec, policy: Option<&Policy>, what: &str) {
    b.comment(&format!("crdt: {}", spec.name));
    if let Some(p) = policy {
        b.comment(&format!("policy: {p}"));
    }
    b.comment(&format!("query: {what}"));
    b.comment("unsat means the property holds");
    b.prelude();
}

/// NI-1: two events from the initial state, the second possibly seeing the
/// first, allowed by `policy` to be unordered, whose effectors fail to
/// commute on some state.
pub fn encode_ni1(spec: &CrdtSpec, policy: &Policy) -> SmtScript {
    let mut b = Builder::new(spec);
    header(&mut b, spec, Some(policy), "NI-1");
    let (i1, i2) = (inst("1"), inst("2"));
    b.declare_inst(&i1);
    b.declare_inst(&i2);
    b.distinctness(&[&i1, &i2]);
    b.line("(declare-const v12 Bool)");
    let e1 = eff("e1", &i1, "init");
    effector(&mut b, &e1);
    let after1 = b.apply(&e1, "init");
    b.ite_state("src2", "v12", &after1, "init");
    let e2 = eff("e2", &i2, "src2");
    effector(&mut b, &e2);
    let vis = alloc::vec![
        alloc::vec![String::new(), "v12".into()],
        alloc::vec!["false".into(), String::new()],
    ];
    let eo = policy_axioms(&mut b, policy, "eo", &[&e1, &e2], vis);
    b.line(&format!("(assert (not {}))", eo[0][1]));
    b.line(&format!("(assert (not {}))", eo[1][0]));
    b.declare_state("X");
    let x12 = b.apply(&e2, "X");
    let x12 = b.apply(&e1, &x12);
    let x21 = b.apply(&e1, "X");
    let x21 = b.apply(&e2, &x21);
    let d = b.differ(&x12, &x21);
    b.line(&format!("(assert {d})"));
    finish(&mut b);
    SmtScript {
        crdt: spec.name.clone(),
        policy: policy.slug(),
        condition: Some(Condition::Ni1),
        text: b.out,
        meta: ScriptMeta {
            insts: alloc::vec![inst_names(spec, &i1), inst_names(spec, &i2)],
            bits: alloc::vec![("vis12".into(), "v12".into())],
            states: alloc::vec!["X".into()],
        },
    }
}

/// NI-2: if two events generated at arbitrary states commute modulo the
/// policy, then they still do when an arbitrary third event is inserted
/// before them and made visible to either, with their mutual visibility
/// unchanged.
pub fn encode_ni2(spec: &CrdtSpec, policy: &Policy) -> SmtScript {
    let mut b = Builder::new(spec);
    header(&mut b, spec, Some(policy), "NI-2");
    let (i1, i2, i3) = (inst("1"), inst("2"), inst("3"));
    for i in [&i1, &i2, &i3] {
        b.declare_inst(i);
    }
    b.distinctness(&[&i1, &i2, &i3]);
    for s in ["s1", "s2", "s3", "X"] {
        b.declare_state(s);
    }
    for i in [&i1, &i2, &i3] {
        b.fresh_absent(i, &["s1", "s2", "s3"]);
    }
    for v in ["v12", "v31", "v32", "ord"] {
        b.line(&format!("(declare-const {v} Bool)"));
    }

    b.comment("hypothesis: the two-event execution");
    let t1 = eff("t1", &i1, "s1");
    effector(&mut b, &t1);
    let s2t1 = b.apply(&t1, "s2");
    b.ite_state("srct2", "v12", &s2t1, "s2");
    let t2 = eff("t2", &i2, "srct2");
    effector(&mut b, &t2);
    let vis = alloc::vec![
        alloc::vec![String::new(), "v12".into()],
        alloc::vec!["false".into(), String::new()],
    ];
    let eo_t = policy_axioms(&mut b, policy, "eot", &[&t1, &t2], vis);
    let a = b.apply(&t2, "X");
    let a = b.apply(&t1, &a);
    let c = b.apply(&t1, "X");
    let c = b.apply(&t2, &c);
    let same = b.equal(&a, &c);
    b.line(&format!("(assert (or {} {} {same}))", eo_t[0][1], eo_t[1][0]));

    b.comment("conclusion: the three-event execution");
    let u3 = eff("u3", &i3, "s3");
    effector(&mut b, &u3);
    let s1u3 = b.apply(&u3, "s1");
    b.ite_state("srcu1", "v31", &s1u3, "s1");
    let u1 = eff("u1", &i1, "srcu1");
    effector(&mut b, &u1);
    let s2_3 = b.apply(&u3, "s2");
    let s2_1 = b.apply(&u1, "s2");
    let s2_31 = b.apply(&u1, &s2_3);
    let s2_13 = b.apply(&u3, &s2_1);
    b.ite_state("both2", "ord", &s2_31, &s2_13);
    b.ite_state("one2", "v32", &s2_3, &s2_1);
    b.ite_state("any2", "(or v32 v12)", "one2", "s2");
    b.ite_state("srcu2", "(and v32 v12)", "both2", "any2");
    let u2 = eff("u2", &i2, "srcu2");
    effector(&mut b, &u2);
    let f = "false".to_string();
    let vis = alloc::vec![
        alloc::vec![String::new(), "v31".into(), "v32".into()],
        alloc::vec![f.clone(), String::new(), "v12".into()],
        alloc::vec![f.clone(), f, String::new()],
    ];
    let eo_u = policy_axioms(&mut b, policy, "eou", &[&u3, &u1, &u2], vis);
    b.line(&format!("(assert (=> {} ord))", eo_u[0][1]));
    if policy.delivers_causally() {
        // The pair is applied at a replica that already holds both histories.
        let stable = spec.stable_relations();
        b.contained("srcu1", "X", &stable);
        b.contained("srcu2", "X", &stable);
    }
    b.line(&format!("(assert (not {}))", eo_u[1][2]));
    b.line(&format!("(assert (not {}))", eo_u[2][1]));
    let p = b.apply(&u2, "X");
    let p = b.apply(&u1, &p);
    let q = b.apply(&u1, "X");
    let q = b.apply(&u2, &q);
    let d = b.differ(&p, &q);
    b.line(&format!("(assert {d})"));
    finish(&mut b);
    SmtScript {
        crdt: spec.name.clone(),
        policy: policy.slug(),
        condition: Some(Condition::Ni2),
        text: b.out,
        meta: ScriptMeta {
            insts: [&i1, &i2, &i3].iter().map(|i| inst_names(spec, i)).collect(),
            bits: ["v12", "v31", "v32", "ord"].iter().map(|v| (v.to_string(), v.to_string())).collect(),
            states: ["s1", "s2", "s3", "X"].iter().map(|s| s.to_string()).collect(),
        },
    }
}

/// Non-commutation of `op1` and `op2` generated at arbitrary states with
/// arbitrary arguments: `unsat` means they always commute.
pub fn encode_commutativity(spec: &CrdtSpec, op1: &str, op2: &str) -> SmtScript {
    let mut b = Builder::new(spec);
    header(&mut b, spec, None, &format!("commutativity of {op1} and {op2}"));
    let (i1, i2) = (inst("1"), inst("2"));
    b.declare_inst(&i1);
    b.declare_inst(&i2);
    b.line(&format!("(assert {})", i1.sel(op1)));
    b.line(&format!("(assert {})", i2.sel(op2)));
    b.distinctness(&[&i1, &i2]);
    for s in ["s1", "s2", "X"] {
        b.declare_state(s);
    }
    let e1 = eff("e1", &i1, "s1");
    let e2 = eff("e2", &i2, "s2");
    effector(&mut b, &e1);
    effector(&mut b, &e2);
    let p = b.apply(&e2, "X");
    let p = b.apply(&e1, &p);
    let q = b.apply(&e1, "X");
    let q = b.apply(&e2, &q);
    let d = b.differ(&p, &q);
    b.line(&format!("(assert {d})"));
    finish(&mut b);
    SmtScript {
        crdt: spec.name.clone(),
        policy: "none".into(),
        condition: None,
        text: b.out,
        meta: ScriptMeta {
            insts: alloc::vec![inst_names(spec, &i1), inst_names(spec, &i2)],
            bits: Vec::new(),
            states: alloc::vec!["s1".into(), "s2".into(), "X".into()],
        },
    }
}

/// Functionality of `op`'s effector: two results of applying the same
/// effector to the same target cannot differ. `unsat` expected.
pub fn encode_functionality(spec: &CrdtSpec, op: &str) -> SmtScript {
    let mut b = Builder::new(spec);
    header(&mut b, spec, None, &format!("functionality of {op}"));
    let i1 = inst("1");
    b.declare_inst(&i1);
    b.line(&format!("(assert {})", i1.sel(op)));
    for s in ["s1", "X", "Y", "Z"] {
        b.declare_state(s);
    }
    let e1 = eff("e1", &i1, "s1");
    effector(&mut b, &e1);
    let out = b.apply(&e1, "X");
    let y = b.equal("Y", &out);
    let z = b.equal("Z", &out);
    b.line(&format!("(assert {y})"));
    b.line(&format!("(assert {z})"));
    let d = b.differ("Y", "Z");
    b.line(&format!("(assert {d})"));
    finish(&mut b);
    SmtScript {
        crdt: spec.name.clone(),
        policy: "none".into(),
        condition: None,
        text: b.out,
        meta: ScriptMeta {
            insts: alloc::vec![inst_names(spec, &i1)],
            bits: Vec::new(),
            states: alloc::vec!["s1".into(), "X".into()],
        },
    }
}

/// The policy axioms alone over `n` events with free `vis`, `eo` and
/// operation choices, as assertions. Used to check axioms against the
/// executable policy.
pub fn encode_policy_axioms(spec: &CrdtSpec, policy: &Policy, n: usize) -> SmtScript {
    let mut b = Builder::new(spec);
    header(&mut b, spec, Some(policy), &format!("policy axioms over {n} events"));
    let insts: Vec<Inst> = (0..n).map(|k| inst(&k.to_string())).collect();
    let mut effs = Vec::new();
    b.declare_state("s");
    for i in &insts {
        b.declare_inst(i);
        effs.push(eff(&format!("e{}", i.label), i, "s"));
    }
    for e in &effs {
        b.guards(e);
        b.write_sets(e);
    }
    let mut vis = alloc::vec![alloc::vec![String::new(); n]; n];
    let mut bits = Vec::new();
    for (i, row) in vis.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = format!("v{i}{j}");
                b.line(&format!("(declare-const {v} Bool)"));
                bits.push((v.clone(), v.clone()));
            }
        }
    }
    let refs: Vec<&Eff> = effs.iter().collect();
    let eo = policy_axioms(&mut b, policy, "eo", &refs, vis);
    for row in eo {
        for e in row.into_iter().filter(|e| !e.is_empty()) {
            bits.push((e.clone(), e));
        }
    }
    finish(&mut b);
    SmtScript {
        crdt: spec.name.clone(),
        policy: policy.slug(),
        condition: None,
        text: b.out,
        meta: ScriptMeta {
            insts: insts.iter().map(|i| inst_names(spec, i)).collect(),
            bits,
            states: alloc::vec!["s".into()],
        },
    }
}
