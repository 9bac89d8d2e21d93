//! The labeled transition system over events and configurations, and a
//! bounded enumerator of well-formed executions.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::consistency::{Frame, Policy, Rel};
use crate::interp::{apply_effector, gen_effector, Atom, ConcreteState, Effector, InterpError};
use crate::spec::{CrdtSpec, OpSpec, Sort};

/// An operation name applied to ground arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpInstance {
    pub op: String,
    pub args: Vec<Atom>,
}

impl fmt::Display for OpInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.op)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub eid: usize,
    pub op: OpInstance,
    pub sigma_s: ConcreteState,
    /// Visible events.
    pub delta_r: BTreeSet<usize>,
    /// Order in which `delta_r` was applied before generation, earliest first.
    pub eo_r: Vec<usize>,
    pub effector: Effector,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Configuration {
    pub events: Vec<Event>,
    pub vis: Rel,
    pub eo: Rel,
}

impl Configuration {
    pub fn init() -> Configuration {
        Configuration::default()
    }

    /// Calls `k` with the policy's view of this configuration.
    pub fn with_frame<R>(&self, k: impl FnOnce(&Frame) -> R) -> R {
        let ops: Vec<&str> = self.events.iter().map(|e| e.op.op.as_str()).collect();
        let effs: Vec<&Effector> = self.events.iter().map(|e| &e.effector).collect();
        k(&Frame {
            ops: &ops,
            effs: &effs,
            vis: &self.vis,
            eo: &self.eo,
        })
    }
}

/// A well-formed execution: the final configuration plus the effector order
/// each event started from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub config: Configuration,
    /// `eo_before[k]` is the global effector order when event `k` was issued.
    pub eo_before: Vec<Rel>,
    next_elem: u32,
    next_id: u32,
}

impl Execution {
    pub fn empty() -> Execution {
        Execution {
            config: Configuration::init(),
            eo_before: Vec::new(),
            next_elem: 0,
            next_id: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.config.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.config.events
    }

    /// Configuration after the first `k` events.
    pub fn prefix(&self, k: usize) -> Configuration {
        let keep = |r: &Rel| r.iter().copied().filter(|&(a, b)| a < k && b < k).collect();
        Configuration {
            events: self.config.events[..k].to_vec(),
            vis: keep(&self.config.vis),
            eo: if k < self.len() { self.eo_before[k].clone() } else { self.config.eo.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OpsemError {
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error("history event {0} is not in the configuration")]
    UnknownEvent(usize),
    #[error("local order does not enumerate the history exactly once")]
    NotTotal,
    #[error("local order contradicts the global effector order on ({0}, {1})")]
    ContradictsEo(usize, usize),
    #[error("the consistency policy rejects the new configuration")]
    PolicyRejects,
}

/// The effector of `ev`: its history applied to `sigma_s` in `eo_r` order,
/// then the operation generated at the resulting state.
pub fn effector_of_event<'a>(
    spec: &CrdtSpec,
    op: &OpSpec,
    ev_args: &[Atom],
    sigma_s: &ConcreteState,
    eo_r: &[usize],
    resolve: impl Fn(usize) -> Option<&'a Effector>,
) -> Result<Effector, OpsemError> {
    let mut s = sigma_s.clone();
    for &id in eo_r {
        s = apply_effector(resolve(id).ok_or(OpsemError::UnknownEvent(id))?, &s);
    }
    Ok(gen_effector(spec, op, ev_args, &s)?)
}

/// One transition from `c` issuing `op` at a replica that applied `eo_r`
/// (a total order of the visible events) to `sigma_s`.
pub fn step(
    spec: &CrdtSpec,
    c: &Configuration,
    op: &OpInstance,
    sigma_s: &ConcreteState,
    eo_r: &[usize],
    policy: &Policy,
) -> Result<(Configuration, Event), OpsemError> {
    let delta_r: BTreeSet<usize> = eo_r.iter().copied().collect();
    if delta_r.len() != eo_r.len() {
        return Err(OpsemError::NotTotal);
    }
    if let Some(&bad) = delta_r.iter().find(|&&d| d >= c.events.len()) {
        return Err(OpsemError::UnknownEvent(bad));
    }
    for (i, &a) in eo_r.iter().enumerate() {
        for &b in &eo_r[..i] {
            if c.eo.contains(&(a, b)) {
                return Err(OpsemError::ContradictsEo(a, b));
            }
        }
    }
    let o = spec
        .op(&op.op)
        .ok_or_else(|| InterpError::UnknownOp(op.op.clone()))?;
    let effector = effector_of_event(spec, o, &op.args, sigma_s, eo_r, |i| c.events.get(i).map(|e| &e.effector))?;
    let eid = c.events.len();
    let ev = Event {
        eid,
        op: op.clone(),
        sigma_s: sigma_s.clone(),
        delta_r: delta_r.clone(),
        eo_r: eo_r.to_vec(),
        effector,
    };
    let mut next = c.clone();
    next.events.push(ev.clone());
    next.vis.extend(delta_r.iter().map(|&d| (d, eid)));
    next.eo = next.with_frame(|f| policy.forced_eo(f));
    if !c.eo.is_subset(&next.eo) || !next.with_frame(|f| policy.holds(f)) {
        return Err(OpsemError::PolicyRejects);
    }
    Ok((next, ev))
}

/// Every permutation of `items` compatible with `order` (pairs must appear
/// in order), in lexicographic order.
pub fn linear_extensions(items: &[usize], order: &Rel) -> Vec<Vec<usize>> {
    fn go(left: &mut Vec<usize>, acc: &mut Vec<usize>, order: &Rel, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(acc.clone());
            return;
        }
        for k in 0..left.len() {
            let x = left[k];
            if left.iter().any(|&y| y != x && order.contains(&(y, x))) {
                continue;
            }
            left.remove(k);
            acc.push(x);
            go(left, acc, order, out);
            acc.pop();
            left.insert(k, x);
        }
    }
    let mut out = Vec::new();
    let mut left = items.to_vec();
    left.sort_unstable();
    go(&mut left, &mut Vec::new(), order, &mut out);
    out
}

/// Σ for a history: each distinct state obtained by folding `history`'s
/// effectors over `sigma_s` in an order compatible with `eo`, mapped to the
/// first such order.
pub fn reachable_states(
    sigma_s: &ConcreteState,
    history: &BTreeSet<usize>,
    eo: &Rel,
    effs: &[&Effector],
) -> BTreeMap<ConcreteState, Vec<usize>> {
    let items: Vec<usize> = history.iter().copied().collect();
    let mut out = BTreeMap::new();
    for perm in linear_extensions(&items, eo) {
        let s = perm.iter().fold(sigma_s.clone(), |s, &i| apply_effector(effs[i], &s));
        out.entry(s).or_insert(perm);
    }
    out
}

/// Whether the event's history yields a single state under `eo`.
pub fn is_convergent(ev: &Event, eo: &Rel, effs: &[&Effector]) -> bool {
    reachable_states(&ev.sigma_s, &ev.delta_r, eo, effs).len() <= 1
}

/// Atom budget for enumeration: distinct elements, and fresh identifiers
/// beyond the constant `i0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub elems: u32,
    pub ids: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { elems: 2, ids: 3 }
    }
}

/// Generates successors of well-formed executions.
#[derive(Debug, Clone)]
pub struct Explorer<'a> {
    pub spec: &'a CrdtSpec,
    pub policy: &'a Policy,
    pub budget: Budget,
    init: ConcreteState,
}

impl<'a> Explorer<'a> {
    pub fn new(spec: &'a CrdtSpec, policy: &'a Policy, budget: Budget) -> Self {
        Explorer {
            spec,
            policy,
            budget,
            init: ConcreteState::empty(spec),
        }
    }

    /// Operation instances available after `exec`, with the counters they consume.
    fn instances(&self, exec: &Execution) -> Vec<(OpInstance, u32, u32)> {
        let mut out = Vec::new();
        let has_root = !self.spec.consts.is_empty();
        for op in &self.spec.ops {
            // Each partial assignment carries (args, next_elem, next_id).
            let mut partial = alloc::vec![(Vec::new(), exec.next_elem, exec.next_id)];
            for p in &op.params {
                let mut grown = Vec::new();
                for (args, ne, ni) in partial {
                    let mut push = |a: Atom, ne: u32, ni: u32| {
                        let mut v: Vec<Atom> = args.clone();
                        v.push(a);
                        grown.push((v, ne, ni));
                    };
                    match (p.sort, p.fresh) {
                        (Sort::Elem, _) => {
                            for e in 0..ne {
                                push(Atom::elem(e), ne, ni);
                            }
                            if ne < self.budget.elems {
                                push(Atom::elem(ne), ne + 1, ni);
                            }
                        }
                        (Sort::Id, true) => {
                            if ni <= self.budget.ids {
                                push(Atom::id(ni), ne, ni + 1);
                            }
                        }
                        (Sort::Id, false) => {
                            let first = if has_root { 0 } else { 1 };
                            for i in first..ni {
                                push(Atom::id(i), ne, ni);
                            }
                        }
                    }
                }
                partial = grown;
            }
            for (args, ne, ni) in partial {
                let inst = OpInstance { op: op.name.clone(), args };
                if self.violates_unique(exec, op, &inst) {
                    continue;
                }
                out.push((inst, ne, ni));
            }
        }
        out
    }

    fn violates_unique(&self, exec: &Execution, op: &OpSpec, inst: &OpInstance) -> bool {
        if op.unique.is_empty() {
            return false;
        }
        let key = |args: &[Atom]| -> Vec<Atom> {
            op.unique
                .iter()
                .map(|u| args[op.params.iter().position(|p| &p.name == u).unwrap_or(0)])
                .collect()
        };
        let k = key(&inst.args);
        exec.events()
            .iter()
            .any(|e| e.op.op == op.name && key(&e.op.args) == k)
    }

    /// All one-event extensions of `exec` admitted by the policy.
    pub fn successors(&self, exec: &Execution) -> Vec<Execution> {
        let n = exec.len();
        let mut out = Vec::new();
        let instances = self.instances(exec);
        for mask in 0u32..(1 << n) {
            let visible: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            for eo_r in linear_extensions(&visible, &exec.config.eo) {
                for (inst, ne, ni) in &instances {
                    if let Ok((config, _)) = step(self.spec, &exec.config, inst, &self.init, &eo_r, self.policy) {
                        let mut eo_before = exec.eo_before.clone();
                        eo_before.push(exec.config.eo.clone());
                        out.push(Execution {
                            config,
                            eo_before,
                            next_elem: *ne,
                            next_id: *ni,
                        });
                    }
                }
            }
        }
        out
    }

    /// Well-formed executions with one event, in enumeration order.
    pub fn roots(&self) -> Vec<Execution> {
        self.successors(&Execution::empty())
    }

    /// Every well-formed execution of length `1..=depth` extending `root`
    /// (including `root`), breadth first.
    pub fn enumerate_from(&self, root: Execution, depth: usize) -> Vec<Execution> {
        let mut out = Vec::new();
        if root.len() > depth {
            return out;
        }
        let mut level = alloc::vec![root];
        while let Some(first) = level.first() {
            let at_max = first.len() >= depth;
            let next: Vec<Execution> = if at_max {
                Vec::new()
            } else {
                level.iter().flat_map(|e| self.successors(e)).collect()
            };
            out.append(&mut level);
            level = next;
        }
        out
    }

    /// Every well-formed execution of length `1..=depth`.
    pub fn enumerate(&self, depth: usize) -> Vec<Execution> {
        if depth == 0 {
            return Vec::new();
        }
        self.roots()
            .into_iter()
            .flat_map(|r| self.enumerate_from(r, depth))
            .collect()
    }

    /// Shortest witness extending `root` within `depth`, if any.
    pub fn check_from(&self, root: Execution, depth: usize) -> Option<Witness> {
        if root.len() > depth {
            return None;
        }
        let mut level = alloc::vec![root];
        loop {
            for exec in &level {
                if let Some(w) = find_divergence(self.spec, exec) {
                    return Some(w);
                }
            }
            if level.is_empty() || level[0].len() >= depth {
                return None;
            }
            level = level.iter().flat_map(|e| self.successors(e)).collect();
        }
    }
}

/// Which event of a witness fails to converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observer {
    /// A recorded event, by index.
    Event(usize),
    /// A read-only query issued after every event, seeing all of them
    /// under the final effector order.
    Final,
}

/// A non-convergent event with two orders of its history that diverge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub execution: Execution,
    pub observer: Observer,
    pub orders: [Vec<usize>; 2],
    pub states: [ConcreteState; 2],
}

impl Witness {
    pub fn describe(&self, spec: &CrdtSpec) -> String {
        let mut s = String::new();
        for e in self.execution.events() {
            let seen: Vec<String> = e.eo_r.iter().map(|i| format!("#{i}")).collect();
            s += &format!("#{} {} sees [{}]\n", e.eid, e.op, seen.join(", "));
        }
        let who = match self.observer {
            Observer::Event(i) => format!("event #{i}"),
            Observer::Final => String::from("a replica that has seen every event"),
        };
        s += &format!("{who} can reach different states:\n");
        for k in 0..2 {
            let ord: Vec<String> = self.orders[k].iter().map(|i| format!("#{i}")).collect();
            s += &format!("  [{}] -> {}\n", ord.join(", "), self.states[k].display(spec));
        }
        s
    }
}

fn divergence(
    exec: &Execution,
    observer: Observer,
    sigma_s: &ConcreteState,
    history: &BTreeSet<usize>,
    eo: &Rel,
) -> Option<Witness> {
    let effs: Vec<&Effector> = exec.events().iter().map(|e| &e.effector).collect();
    let reach = reachable_states(sigma_s, history, eo, &effs);
    if reach.len() < 2 {
        return None;
    }
    // Report in enumeration order of the orders, not of the states.
    let mut by_order: Vec<(Vec<usize>, ConcreteState)> = reach.into_iter().map(|(s, o)| (o, s)).collect();
    by_order.sort();
    let (o1, s1) = by_order.swap_remove(0);
    let (o2, s2) = by_order.swap_remove(0);
    Some(Witness {
        execution: exec.clone(),
        observer,
        orders: [o1, o2],
        states: [s1, s2],
    })
}

/// Checks the newest event and a final all-seeing query of `exec`.
pub fn find_divergence(spec: &CrdtSpec, exec: &Execution) -> Option<Witness> {
    let n = exec.len();
    if n == 0 {
        return None;
    }
    let last = &exec.events()[n - 1];
    divergence(exec, Observer::Event(n - 1), &last.sigma_s, &last.delta_r, &exec.eo_before[n - 1]).or_else(|| {
        let all: BTreeSet<usize> = (0..n).collect();
        divergence(exec, Observer::Final, &ConcreteState::empty(spec), &all, &exec.config.eo)
    })
}

/// Searches well-formed executions up to `depth` events for a
/// non-convergent event. Returns a shortest witness, ties broken by
/// enumeration order.
pub fn check_sec_bounded(spec: &CrdtSpec, policy: &Policy, depth: usize, budget: Budget) -> Option<Witness> {
    if depth == 0 {
        return None;
    }
    let ex = Explorer::new(spec, policy, budget);
    ex.roots()
        .into_iter()
        .filter_map(|r| ex.check_from(r, depth))
        .min_by_key(|w| w.execution.len())
}
