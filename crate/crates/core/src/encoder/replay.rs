//! Concrete replay of decoded solver models.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::model::Decoded;
use crate::consistency::{Frame, Policy, Rel};
use crate::interp::{apply_effector, gen_effector_named, ConcreteState, Effector, InterpError};
use crate::opsem::{step, Configuration, OpInstance, OpsemError};
use crate::spec::CrdtSpec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("model does not name the expected events and states")]
    Shape,
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("replayed execution is rejected: {0}")]
    Opsem(#[from] OpsemError),
    #[error("replayed events are ordered by the policy")]
    Ordered,
    #[error("replayed effectors commute on the decoded state")]
    Commutes,
    #[error("replayed events violate the hypothesis")]
    Hypothesis,
}

fn instances(d: &Decoded) -> Vec<OpInstance> {
    d.insts
        .iter()
        .map(|i| OpInstance {
            op: i.op.clone(),
            args: i.args.clone(),
        })
        .collect()
}

fn bit(d: &Decoded, name: &str) -> bool {
    d.bits.get(name).copied().unwrap_or(false)
}

fn both_orders(a: &Effector, b: &Effector, x: &ConcreteState) -> [ConcreteState; 2] {
    [apply_effector(a, &apply_effector(b, x)), apply_effector(b, &apply_effector(a, x))]
}

/// A two-event execution from the initial state whose events the policy
/// leaves unordered and whose effectors disagree on `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ni1Replay {
    pub events: [OpInstance; 2],
    pub vis: bool,
    pub effectors: [Effector; 2],
    /// The state on which the two application orders diverge.
    pub target: ConcreteState,
    /// `target` is the initial state, so a replica of the execution itself
    /// can reach both results.
    pub from_init: bool,
    /// Second-then-first, first-then-second.
    pub states: [ConcreteState; 2],
}

impl Ni1Replay {
    pub fn describe(&self, spec: &CrdtSpec) -> String {
        let mut s = format!("#0 {} sees []\n", self.events[0]);
        s += &format!("#1 {} sees [{}]\n", self.events[1], if self.vis { "#0" } else { "" });
        s += &format!("applied to {}:\n", self.target.display(spec));
        s += &format!("  [#1, #0] -> {}\n", self.states[0].display(spec));
        s += &format!("  [#0, #1] -> {}\n", self.states[1].display(spec));
        s
    }
}

/// Rebuilds an NI-1 model as a well-formed execution and checks that the
/// two effectors really fail to commute.
pub fn replay_ni1(spec: &CrdtSpec, policy: &Policy, d: &Decoded) -> Result<Ni1Replay, ReplayError> {
    let insts = instances(d);
    if insts.len() != 2 {
        return Err(ReplayError::Shape);
    }
    let vis = bit(d, "vis12");
    let init = ConcreteState::empty(spec);
    let c0 = Configuration::init();
    let (c1, ev1) = step(spec, &c0, &insts[0], &init, &[], policy)?;
    let seen: &[usize] = if vis { &[0] } else { &[] };
    let (c2, ev2) = step(spec, &c1, &insts[1], &init, seen, policy)?;
    if !c2.eo.is_empty() {
        return Err(ReplayError::Ordered);
    }
    let (e1, e2) = (ev1.effector, ev2.effector);
    let at_init = both_orders(&e1, &e2, &init);
    let (target, states, from_init) = if at_init[0] != at_init[1] {
        (init, at_init, true)
    } else {
        let x = d.states.get("X").ok_or(ReplayError::Shape)?.clone();
        let st = both_orders(&e1, &e2, &x);
        (x, st, false)
    };
    if states[0] == states[1] {
        return Err(ReplayError::Commutes);
    }
    let [a, b]: [OpInstance; 2] = insts.try_into().map_err(|_| ReplayError::Shape)?;
    Ok(Ni1Replay {
        events: [a, b],
        vis,
        effectors: [e1, e2],
        target,
        from_init,
        states,
    })
}

/// A concrete NI-2 counterexample: start states, interferer and visibility.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ni2Replay {
    /// η1, η2, η3.
    pub events: [OpInstance; 3],
    /// σ1, σ2, σ3.
    pub starts: [ConcreteState; 3],
    pub vis12: bool,
    pub vis31: bool,
    pub vis32: bool,
    pub target: ConcreteState,
    /// Effectors of η1' and η2'.
    pub effectors: [Effector; 2],
    pub states: [ConcreteState; 2],
}

impl Ni2Replay {
    pub fn describe(&self, spec: &CrdtSpec) -> String {
        let mut s = String::new();
        for (k, (e, st)) in self.events.iter().zip(&self.starts).enumerate() {
            s += &format!("eta{} = {} from {}\n", k + 1, e, st.display(spec));
        }
        s += &format!(
            "vis(eta1, eta2) = {}, vis(eta3, eta1') = {}, vis(eta3, eta2') = {}\n",
            self.vis12, self.vis31, self.vis32
        );
        s += &format!("eta1' and eta2' disagree on {}:\n", self.target.display(spec));
        s += &format!("  [eta2', eta1'] -> {}\n", self.states[0].display(spec));
        s += &format!("  [eta1', eta2'] -> {}\n", self.states[1].display(spec));
        s
    }
}

fn unordered(policy: &Policy, ops: &[&str], effs: &[&Effector], vis: &Rel, i: usize, j: usize) -> bool {
    let eo0 = Rel::new();
    let f = Frame { ops, effs, vis, eo: &eo0 };
    let eo = policy.forced_eo(&f);
    !eo.contains(&(i, j)) && !eo.contains(&(j, i))
}

/// Recomputes every effector of an NI-2 model and checks that the
/// hypothesis holds while the conclusion fails.
pub fn replay_ni2(spec: &CrdtSpec, policy: &Policy, d: &Decoded) -> Result<Ni2Replay, ReplayError> {
    let insts = instances(d);
    if insts.len() != 3 {
        return Err(ReplayError::Shape);
    }
    let st = |n: &str| d.states.get(n).cloned().ok_or(ReplayError::Shape);
    let (s1, s2, s3, x) = (st("s1")?, st("s2")?, st("s3")?, st("X")?);
    let (v12, v31, v32, ord) = (bit(d, "v12"), bit(d, "v31"), bit(d, "v32"), bit(d, "ord"));
    let gen = |k: usize, src: &ConcreteState| gen_effector_named(spec, &insts[k].op, &insts[k].args, src);

    let t1 = gen(0, &s1)?;
    let t2 = gen(1, &if v12 { apply_effector(&t1, &s2) } else { s2.clone() })?;
    let ops2 = [insts[0].op.as_str(), insts[1].op.as_str()];
    let vis2: Rel = if v12 { [(0, 1)].into_iter().collect() } else { Rel::new() };
    let hyp_unordered = unordered(policy, &ops2, &[&t1, &t2], &vis2, 0, 1);
    let hyp = both_orders(&t1, &t2, &x);
    if hyp_unordered && hyp[0] != hyp[1] {
        return Err(ReplayError::Hypothesis);
    }

    let u3 = gen(2, &s3)?;
    let u1 = gen(0, &if v31 { apply_effector(&u3, &s1) } else { s1.clone() })?;
    let mut src2 = s2.clone();
    let mut history: Vec<&Effector> = Vec::new();
    match (v32, v12) {
        (true, true) if ord => history.extend([&u3, &u1]),
        (true, true) => history.extend([&u1, &u3]),
        (true, false) => history.push(&u3),
        (false, true) => history.push(&u1),
        (false, false) => {}
    }
    for e in history {
        src2 = apply_effector(e, &src2);
    }
    let u2 = gen(1, &src2)?;
    let ops3 = [insts[2].op.as_str(), insts[0].op.as_str(), insts[1].op.as_str()];
    let mut vis3 = BTreeSet::new();
    for (b, p) in [(v31, (0, 1)), (v32, (0, 2)), (v12, (1, 2))] {
        if b {
            vis3.insert(p);
        }
    }
    if !unordered(policy, &ops3, &[&u3, &u1, &u2], &vis3, 1, 2) {
        return Err(ReplayError::Ordered);
    }
    let states = both_orders(&u1, &u2, &x);
    if states[0] == states[1] {
        return Err(ReplayError::Commutes);
    }
    let [a, b, c]: [OpInstance; 3] = insts.try_into().map_err(|_| ReplayError::Shape)?;
    Ok(Ni2Replay {
        events: [a, b, c],
        starts: [s1, s2, s3],
        vis12: v12,
        vis31: v31,
        vis32: v32,
        target: x,
        effectors: [u1, u2],
        states,
    })
}
