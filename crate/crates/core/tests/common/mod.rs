//! Oracle checks shared by the core property suites and the acceptance run.

#![allow(dead_code)]

use std::collections::BTreeSet;

use convergent_core::consistency::{axioms_hold, Frame, Rel, StabilityProbe};
use convergent_core::interp::{apply_effector, commutes_within, fold_effectors, gen_effector, run_op_with_history, wr_set, Atom, ConcreteState};
use convergent_core::spec::Sort;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use convergent_core::opsem::{is_convergent, Budget, Execution, Explorer};
use convergent_core::spec::default_sync_pairs;
use convergent_core::{CrdtSpec, Effector, Policy};

pub const DEPTH: usize = 3;

/// Atoms per sort; ids include the constant `i0`.
const ATOMS: u32 = 3;
pub const CASES: u32 = 10_000;

fn atom(sort: Sort, k: u32) -> Atom {
    match sort {
        Sort::Elem => Atom::elem(k),
        Sort::Id => Atom::id(k),
    }
}

pub fn state_strategy(spec: &CrdtSpec) -> BoxedStrategy<ConcreteState> {
    let empty = ConcreteState::empty(spec);
    let rels: Vec<(usize, Vec<Sort>)> = spec.state.iter().enumerate().map(|(i, r)| (i, r.columns.clone())).collect();
    let tuples = rels
        .into_iter()
        .map(|(i, cols)| {
            let n = cols.len();
            prop::collection::vec(prop::collection::vec(0..ATOMS, n), 0..5).prop_map(move |ts| {
                ts.into_iter()
                    .map(|t| (i, t.iter().zip(&cols).map(|(&k, &s)| atom(s, k)).collect::<Vec<_>>()))
                    .collect::<Vec<_>>()
            })
        })
        .collect::<Vec<_>>();
    tuples
        .prop_map(move |per_rel| {
            let mut s = empty.clone();
            for (rel, t) in per_rel.into_iter().flatten() {
                s.insert(rel, t);
            }
            s
        })
        .boxed()
}

/// An operation index and its arguments.
pub fn op_strategy(spec: &CrdtSpec) -> BoxedStrategy<(usize, Vec<Atom>)> {
    let sorts: Vec<Vec<Sort>> = spec.ops.iter().map(|o| o.params.iter().map(|p| p.sort).collect()).collect();
    (0..spec.ops.len())
        .prop_flat_map(move |k| {
            let s = sorts[k].clone();
            let n = s.len();
            prop::collection::vec(0..ATOMS, n).prop_map(move |ix| (k, ix.iter().zip(&s).map(|(&i, &so)| atom(so, i)).collect()))
        })
        .boxed()
}

pub fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

/// Effectors of `history`, each generated at the state reached so far.
pub fn history_effectors(spec: &CrdtSpec, start: &ConcreteState, history: &[(usize, Vec<Atom>)]) -> Vec<Effector> {
    let mut s = start.clone();
    let mut out = Vec::new();
    for (k, args) in history {
        let e = gen_effector(spec, &spec.ops[*k], args, &s).expect("well-sorted arguments");
        s = apply_effector(&e, &s);
        out.push(e);
    }
    out
}

/// History folding: generating after a history equals generating at the
/// folded state. Runs `CASES` random samples.
pub fn folding(spec: &CrdtSpec) -> Result<(), String> {
    let strat = (
        state_strategy(spec),
        prop::collection::vec(op_strategy(spec), 0..=4),
        op_strategy(spec),
        state_strategy(spec),
    );
    runner()
        .run(&strat, |(sigma, history, (k, args), target)| {
            let effs = history_effectors(spec, &sigma, &history);
            let op = &spec.ops[k];
            let folded = run_op_with_history(spec, op, &args, &sigma, &effs).unwrap();
            let direct = gen_effector(spec, op, &args, &fold_effectors(&sigma, &effs)).unwrap();
            prop_assert_eq!(&folded, &direct);
            prop_assert_eq!(apply_effector(&folded, &target), apply_effector(&direct, &target));
            Ok(())
        })
        .map_err(|e| format!("{}: {e}", spec.name))
}

/// Effectors change only tuples matched by their write set.
pub fn footprint(spec: &CrdtSpec) -> Result<(), String> {
    let strat = (op_strategy(spec), state_strategy(spec), state_strategy(spec));
    runner()
        .run(&strat, |((k, args), src, tgt)| {
            let op = &spec.ops[k];
            let fp = wr_set(spec, op, &args, &src).unwrap();
            let e = gen_effector(spec, op, &args, &src).unwrap();
            let out = apply_effector(&e, &tgt);
            prop_assert_eq!(&out, &apply_effector(&e, &tgt));
            for (rel, decl) in spec.state.iter().enumerate() {
                for t in tgt.relation(rel).symmetric_difference(out.relation(rel)) {
                    let covered = fp
                        .iter()
                        .any(|(r, pat)| *r == decl.name && pat.iter().zip(t).all(|(p, a)| p.is_none_or(|p| p == *a)));
                    prop_assert!(covered, "{} changed {:?} in {} outside its write set", op.name, t, decl.name);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("{}: {e}", spec.name))
}


/// The stable policies exercised by the suites, instantiated for `spec`.
pub fn stable_policies(spec: &CrdtSpec) -> Vec<Policy> {
    let red: BTreeSet<String> = spec.ops.iter().skip(1).take(1).map(|o| o.name.clone()).collect();
    vec![
        Policy::Ec,
        Policy::Cc,
        Policy::Rb(red),
        Policy::Psi,
        Policy::psi_rb(default_sync_pairs(&spec.name)),
        Policy::Sc,
    ]
}

pub fn executions(spec: &CrdtSpec, policy: &Policy) -> Vec<Execution> {
    Explorer::new(spec, policy, Budget::default()).enumerate(DEPTH)
}

#[derive(Debug, Default)]
pub struct HistoryCheck {
    /// Events with at least two visible events whose pairs all commute or
    /// are ordered.
    pub premise: usize,
    pub violations: Vec<String>,
}

/// Every event whose history pairs commute or are eo-ordered must be
/// convergent.
pub fn ordered_or_commuting(spec: &CrdtSpec, policy: &Policy) -> HistoryCheck {
    let mut out = HistoryCheck::default();
    for exec in executions(spec, policy) {
        let effs: Vec<&Effector> = exec.events().iter().map(|e| &e.effector).collect();
        for (k, ev) in exec.events().iter().enumerate() {
            let eo = &exec.eo_before[k];
            let hist: Vec<usize> = ev.delta_r.iter().copied().collect();
            let premise = hist.iter().all(|&a| {
                hist.iter()
                    .all(|&b| a >= b || eo.contains(&(a, b)) || eo.contains(&(b, a)) || commutes_within(spec, effs[a], effs[b]))
            });
            if !premise {
                continue;
            }
            if hist.len() >= 2 {
                out.premise += 1;
            }
            if !is_convergent(ev, eo, &effs) {
                out.violations.push(format!("{}/{policy}: event #{k} of {:?}", spec.name, exec.events()));
            }
        }
    }
    out
}

/// Feeds every enumerated configuration to a stability probe.
pub fn stability(spec: &CrdtSpec, policy: &Policy) -> StabilityProbe {
    let mut probe = StabilityProbe::new();
    for exec in executions(spec, policy) {
        exec.config.with_frame(|f| probe.observe(f));
    }
    probe
}

/// Compares the executable check with the axiom set on every EC
/// configuration, each paired with several candidate effector orders.
/// Returns the number of frames compared and the disagreements.
pub fn policy_agreement(spec: &CrdtSpec, policy: &Policy) -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for exec in executions(spec, &Policy::Ec) {
        let c = &exec.config;
        let ops: Vec<&str> = c.events.iter().map(|e| e.op.op.as_str()).collect();
        let effs: Vec<&Effector> = c.events.iter().map(|e| &e.effector).collect();
        let forced = policy.forced_eo(&Frame {
            ops: &ops,
            effs: &effs,
            vis: &c.vis,
            eo: &Rel::new(),
        });
        let mut first: Rel = Rel::new();
        if let Some(&p) = c.vis.iter().next() {
            first.insert(p);
        }
        for eo in [forced, Rel::new(), c.vis.clone(), first] {
            let f = Frame {
                ops: &ops,
                effs: &effs,
                vis: &c.vis,
                eo: &eo,
            };
            checked += 1;
            if policy.holds(&f) != axioms_hold(policy, &f) {
                bad.push(format!("{}/{policy}: vis {:?} eo {:?}", spec.name, c.vis, eo));
            }
        }
    }
    (checked, bad)
}
