//! Consistency policies over (events, vis, eo).
//!
//! Each policy exists twice: as an executable check on a finite [`Frame`]
//! and as first-order axioms ([`Axiom`]) the encoder instantiates. For every
//! policy here the effector order is a function of visibility, operation
//! names, write conflicts and (for the unstable test policy) the number of
//! events, so [`Policy::forced_eo`] computes it directly.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::interp::Effector;

/// A binary relation over event indices.
pub type Rel = BTreeSet<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Policy {
    /// Eventual consistency.
    Ec,
    /// Causal consistency.
    Cc,
    /// RedBlue consistency over the named (red) operations.
    Rb(BTreeSet<String>),
    /// Parallel snapshot isolation.
    Psi,
    /// PSI restricted to the given unordered operation pairs, EC elsewhere.
    PsiRb(BTreeSet<(String, String)>),
    /// Strong consistency.
    Sc,
    /// Orders visible pairs only once more than `k` events exist. Not
    /// behaviorally stable; used as a negative control.
    BoundedConcurrency(usize),
}

/// A finite configuration as seen by a policy.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub ops: &'a [&'a str],
    pub effs: &'a [&'a Effector],
    pub vis: &'a Rel,
    pub eo: &'a Rel,
}

impl Frame<'_> {
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn conflict(&self, i: usize, j: usize) -> bool {
        self.effs[i].conflicts_with(self.effs[j])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected ec, cc, rb:OPS, psi, psi+rb[:A/B,...], sc or bc:K)")]
    Unknown(String),
    #[error("policy `{0}` needs parameters")]
    MissingParams(String),
    #[error("malformed parameter `{param}` for policy `{policy}`")]
    BadParam { policy: String, param: String },
}

fn norm_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl Policy {
    /// The four columns of the verdict matrix, with the mixed column using
    /// `sync` as its operation pairs.
    pub fn matrix_columns(sync: &[(&str, &str)]) -> [Policy; 4] {
        [Policy::Ec, Policy::Cc, Policy::psi_rb(sync), Policy::Psi]
    }

    pub fn psi_rb(pairs: &[(&str, &str)]) -> Policy {
        Policy::PsiRb(pairs.iter().map(|(a, b)| norm_pair(a, b)).collect())
    }

    /// Parses `ec`, `cc`, `psi`, `sc`, `rb:Op,Op`, `psi+rb:A/B,C/D`, `bc:K`.
    /// A bare `psi+rb` takes `default_pairs`.
    pub fn parse(text: &str, default_pairs: &[(&str, &str)]) -> Result<Policy, PolicyError> {
        let lower = text.to_ascii_lowercase();
        let (name, params) = match lower.split_once(':') {
            Some((n, _)) => (n, Some(&text[n.len() + 1..])),
            None => (lower.as_str(), None),
        };
        let bad = |p: &str| PolicyError::BadParam {
            policy: name.to_string(),
            param: p.to_string(),
        };
        match (name, params) {
            ("ec", None) => Ok(Policy::Ec),
            ("cc", None) => Ok(Policy::Cc),
            ("psi", None) => Ok(Policy::Psi),
            ("sc", None) => Ok(Policy::Sc),
            ("rb", None) | ("bc", None) => Err(PolicyError::MissingParams(name.to_string())),
            ("psi+rb", None) if default_pairs.is_empty() => Err(PolicyError::MissingParams(name.to_string())),
            ("psi+rb", None) => Ok(Policy::psi_rb(default_pairs)),
            ("rb", Some(p)) => {
                let ops: BTreeSet<String> = p.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
                if ops.is_empty() {
                    return Err(bad(p));
                }
                Ok(Policy::Rb(ops))
            }
            ("psi+rb", Some(p)) => {
                let mut pairs = BTreeSet::new();
                for item in p.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (a, b) = item.split_once('/').ok_or_else(|| bad(item))?;
                    if a.is_empty() || b.is_empty() {
                        return Err(bad(item));
                    }
                    pairs.insert(norm_pair(a.trim(), b.trim()));
                }
                if pairs.is_empty() {
                    return Err(bad(p));
                }
                Ok(Policy::PsiRb(pairs))
            }
            ("bc", Some(p)) => p.trim().parse().map(Policy::BoundedConcurrency).map_err(|_| bad(p)),
            _ => Err(PolicyError::Unknown(text.to_string())),
        }
    }

    /// Column label: `EC`, `CC`, `RB`, `PSI`, `PSI+RB`, `SC`, `BC`.
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Ec => "EC",
            Policy::Cc => "CC",
            Policy::Rb(_) => "RB",
            Policy::Psi => "PSI",
            Policy::PsiRb(_) => "PSI+RB",
            Policy::Sc => "SC",
            Policy::BoundedConcurrency(_) => "BC",
        }
    }

    /// Whether every event's history is applied before it at every replica.
    pub fn delivers_causally(&self) -> bool {
        matches!(self, Policy::Cc | Policy::Sc)
    }

    /// Lower-case name used in file names.
    pub fn slug(&self) -> String {
        self.name().to_ascii_lowercase()
    }

    fn red(&self, op: &str) -> bool {
        matches!(self, Policy::Rb(ops) if ops.contains(op))
    }

    fn synced(&self, a: &str, b: &str) -> bool {
        matches!(self, Policy::PsiRb(pairs) if pairs.contains(&norm_pair(a, b)))
    }

    /// Whether the pair (i, j) must be ordered by visibility one way or the other.
    fn needs_total(&self, f: &Frame, i: usize, j: usize) -> bool {
        match self {
            Policy::Ec | Policy::Cc | Policy::BoundedConcurrency(_) => false,
            Policy::Rb(_) => self.red(f.ops[i]) && self.red(f.ops[j]),
            Policy::Psi => f.conflict(i, j),
            Policy::PsiRb(_) => self.synced(f.ops[i], f.ops[j]) && f.conflict(i, j),
            Policy::Sc => true,
        }
    }

    /// Whether a visible pair (i, j) is placed in the effector order.
    fn orders(&self, f: &Frame, i: usize, j: usize) -> bool {
        match self {
            Policy::Ec => false,
            Policy::Cc | Policy::Sc => true,
            Policy::BoundedConcurrency(k) => f.len() > *k,
            _ => self.needs_total(f, i, j),
        }
    }

    /// The effector order the policy requires for `f`'s events and visibility.
    pub fn forced_eo(&self, f: &Frame) -> Rel {
        f.vis.iter().copied().filter(|&(i, j)| self.orders(f, i, j)).collect()
    }

    /// Evaluates the policy on a finite configuration.
    pub fn holds(&self, f: &Frame) -> bool {
        if *f.eo != self.forced_eo(f) {
            return false;
        }
        let n = f.len();
        for i in 0..n {
            for j in i + 1..n {
                if self.needs_total(f, i, j) && !f.vis.contains(&(i, j)) && !f.vis.contains(&(j, i)) {
                    return false;
                }
            }
        }
        if *self == Policy::Cc {
            for &(a, b) in f.vis {
                for &(b2, c) in f.vis {
                    if b == b2 && a != c && !f.vis.contains(&(a, c)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// The policy as universally quantified axioms over distinct events.
    pub fn axioms(&self) -> Vec<Axiom> {
        use PFormula::*;
        let (x, y) = (0, 1);
        let iff_eo = |guard: PFormula| Axiom {
            vars: 2,
            body: Iff(Box::new(and([guard, Vis(x, y)])), Box::new(Eo(x, y))),
        };
        let total = |guard: PFormula| Axiom {
            vars: 2,
            body: Implies(Box::new(guard), Box::new(Or(alloc::vec![Vis(x, y), Vis(y, x)]))),
        };
        match self {
            Policy::Ec => alloc::vec![Axiom { vars: 2, body: Not(Box::new(Eo(x, y))) }],
            Policy::Cc => alloc::vec![
                iff_eo(True),
                Axiom {
                    vars: 3,
                    body: Implies(
                        Box::new(And(alloc::vec![Vis(0, 1), Vis(1, 2)])),
                        Box::new(Vis(0, 2)),
                    ),
                },
            ],
            Policy::Rb(_) => {
                let red = And(alloc::vec![Red(x), Red(y)]);
                alloc::vec![iff_eo(red.clone()), total(red)]
            }
            Policy::Psi => alloc::vec![iff_eo(Conflict(x, y)), total(Conflict(x, y))],
            Policy::PsiRb(_) => {
                let g = And(alloc::vec![Synced(x, y), Conflict(x, y)]);
                alloc::vec![iff_eo(g.clone()), total(g)]
            }
            Policy::Sc => alloc::vec![iff_eo(True), total(True)],
            Policy::BoundedConcurrency(k) => alloc::vec![iff_eo(MoreThan(*k))],
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Rb(ops) => {
                f.write_str("rb:")?;
                for (i, o) in ops.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(o)?;
                }
                Ok(())
            }
            Policy::PsiRb(pairs) => {
                f.write_str("psi+rb:")?;
                for (i, (a, b)) in pairs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}/{b}")?;
                }
                Ok(())
            }
            Policy::BoundedConcurrency(k) => write!(f, "bc:{k}"),
            p => f.write_str(&p.slug()),
        }
    }
}

/// Quantifier-free body of a policy axiom. Event variables are indices into
/// the axiom's variable list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PFormula {
    True,
    Not(Box<PFormula>),
    And(Vec<PFormula>),
    Or(Vec<PFormula>),
    Implies(Box<PFormula>, Box<PFormula>),
    Iff(Box<PFormula>, Box<PFormula>),
    Vis(usize, usize),
    Eo(usize, usize),
    /// The events' write sets intersect.
    Conflict(usize, usize),
    /// The event's operation is red (RB).
    Red(usize),
    /// The events' operations form a synchronised pair (PSI+RB).
    Synced(usize, usize),
    /// The configuration has more than `k` events.
    MoreThan(usize),
}

fn and<const N: usize>(fs: [PFormula; N]) -> PFormula {
    let fs: Vec<PFormula> = fs.into_iter().filter(|f| *f != PFormula::True).collect();
    match fs.len() {
        0 => PFormula::True,
        1 => fs.into_iter().next().unwrap_or(PFormula::True),
        _ => PFormula::And(fs),
    }
}

/// `∀ x0..x{vars-1}` pairwise distinct. `body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axiom {
    pub vars: usize,
    pub body: PFormula,
}

impl PFormula {
    /// Replaces variables by events.
    pub fn ground(&self, events: &[usize]) -> PFormula {
        use PFormula::*;
        let g = |f: &PFormula| Box::new(f.ground(events));
        match self {
            True => True,
            Not(f) => Not(g(f)),
            And(fs) => And(fs.iter().map(|f| f.ground(events)).collect()),
            Or(fs) => Or(fs.iter().map(|f| f.ground(events)).collect()),
            Implies(a, b) => Implies(g(a), g(b)),
            Iff(a, b) => Iff(g(a), g(b)),
            Vis(a, b) => Vis(events[*a], events[*b]),
            Eo(a, b) => Eo(events[*a], events[*b]),
            Conflict(a, b) => Conflict(events[*a], events[*b]),
            Red(a) => Red(events[*a]),
            Synced(a, b) => Synced(events[*a], events[*b]),
            MoreThan(k) => MoreThan(*k),
        }
    }

    /// Evaluates a ground formula on a frame.
    pub fn eval(&self, policy: &Policy, f: &Frame) -> bool {
        use PFormula::*;
        match self {
            True => true,
            Not(a) => !a.eval(policy, f),
            And(fs) => fs.iter().all(|a| a.eval(policy, f)),
            Or(fs) => fs.iter().any(|a| a.eval(policy, f)),
            Implies(a, b) => !a.eval(policy, f) || b.eval(policy, f),
            Iff(a, b) => a.eval(policy, f) == b.eval(policy, f),
            Vis(a, b) => f.vis.contains(&(*a, *b)),
            Eo(a, b) => f.eo.contains(&(*a, *b)),
            Conflict(a, b) => f.conflict(*a, *b),
            Red(a) => policy.red(f.ops[*a]),
            Synced(a, b) => policy.synced(f.ops[*a], f.ops[*b]),
            MoreThan(k) => f.len() > *k,
        }
    }
}

impl Axiom {
    /// All instances over `n` events with distinct variables, in
    /// lexicographic order of the event tuple.
    pub fn instances(&self, n: usize) -> Vec<PFormula> {
        let mut out = Vec::new();
        let mut tuple = Vec::new();
        fn go(ax: &Axiom, n: usize, tuple: &mut Vec<usize>, out: &mut Vec<PFormula>) {
            if tuple.len() == ax.vars {
                out.push(ax.body.ground(tuple));
                return;
            }
            for e in 0..n {
                if !tuple.contains(&e) {
                    tuple.push(e);
                    go(ax, n, tuple, out);
                    tuple.pop();
                }
            }
        }
        go(self, n, &mut tuple, &mut out);
        out
    }
}

/// Every ground axiom instance of `policy` over `n` events.
pub fn ground_axioms(policy: &Policy, n: usize) -> Vec<PFormula> {
    policy.axioms().iter().flat_map(|a| a.instances(n)).collect()
}

/// Evaluates the axiom set on a frame.
pub fn axioms_hold(policy: &Policy, f: &Frame) -> bool {
    ground_axioms(policy, f.len()).iter().all(|g| g.eval(policy, f))
}

/// Behavioral signature of an event for the stability probe: its effector,
/// which carries the operation name.
pub type BehaviorKey = Effector;

/// A violation of behavioral stability: two configurations place
/// behaviorally equivalent pairs with equal visibility in different
/// effector orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityViolation {
    pub first: (BehaviorKey, BehaviorKey),
    pub visible: bool,
    pub ordered_first: bool,
    pub description: String,
}

/// Accumulates (effector, effector, vis) → eo observations across
/// configurations admitted by a policy.
#[derive(Debug, Default, Clone)]
pub struct StabilityProbe {
    seen: BTreeMap<(BehaviorKey, BehaviorKey, bool), bool>,
    violation: Option<StabilityViolation>,
}

impl StabilityProbe {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records every ordered pair of distinct events of `f`.
    pub fn observe(&mut self, f: &Frame) {
        for i in 0..f.len() {
            for j in 0..f.len() {
                if i == j {
                    continue;
                }
                let key = (f.effs[i].clone(), f.effs[j].clone(), f.vis.contains(&(i, j)));
                let eo = f.eo.contains(&(i, j));
                match self.seen.get(&key) {
                    Some(&prev) if prev != eo && self.violation.is_none() => {
                        self.violation = Some(StabilityViolation {
                            description: format!(
                                "{} / {} with vis={} ordered {} in one configuration and {} in another",
                                key.0.op, key.1.op, key.2, prev, eo
                            ),
                            first: (key.0, key.1),
                            visible: key.2,
                            ordered_first: prev,
                        });
                    }
                    Some(_) => {}
                    None => {
                        self.seen.insert(key, eo);
                    }
                }
            }
        }
    }

    pub fn merge(&mut self, other: StabilityProbe) {
        if self.violation.is_none() {
            self.violation = other.violation.clone();
        }
        for (k, v) in other.seen {
            match self.seen.get(&k) {
                Some(&prev) if prev != v && self.violation.is_none() => {
                    self.violation = Some(StabilityViolation {
                        description: format!(
                            "{} / {} with vis={} ordered {} in one configuration and {} in another",
                            k.0.op, k.1.op, k.2, prev, v
                        ),
                        first: (k.0.clone(), k.1.clone()),
                        visible: k.2,
                        ordered_first: prev,
                    });
                }
                Some(_) => {}
                None => {
                    self.seen.insert(k, v);
                }
            }
        }
    }

    pub fn observations(&self) -> usize {
        self.seen.len()
    }

    /// `Ok` when stable so far.
    pub fn result(&self) -> Result<(), &StabilityViolation> {
        match &self.violation {
            Some(v) => Err(v),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{gen_effector_named, ConcreteState};
    use crate::spec::builtin;
    use crate::Atom;

    fn adds() -> (Effector, Effector) {
        let s = builtin("simple-set").unwrap();
        let e = gen_effector_named(&s, "Add", &[Atom::elem(0)], &ConcreteState::empty(&s)).unwrap();
        (e.clone(), e)
    }

    fn frame<'a>(ops: &'a [&'a str], effs: &'a [&'a Effector], vis: &'a Rel, eo: &'a Rel) -> Frame<'a> {
        Frame { ops, effs, vis, eo }
    }

    #[test]
    fn empty_configuration_satisfies_every_policy() {
        let r = Rel::new();
        let f = frame(&[], &[], &r, &r);
        for p in [Policy::Ec, Policy::Cc, Policy::Psi, Policy::Sc, Policy::psi_rb(&[("Add", "Remove")])] {
            assert!(p.holds(&f));
            assert!(axioms_hold(&p, &f));
        }
    }

    #[test]
    fn concurrent_conflicting_adds() {
        let (a, b) = adds();
        let effs = [&a, &b];
        let r = Rel::new();
        let f = frame(&["Add", "Add"], &effs, &r, &r);
        assert!(!Policy::Psi.holds(&f));
        assert!(Policy::Ec.holds(&f));
        assert!(Policy::Cc.holds(&f));
        assert!(!Policy::Sc.holds(&f));
    }

    #[test]
    fn cc_orders_visible_pairs() {
        let (a, b) = adds();
        let effs = [&a, &b];
        let vis: Rel = [(0, 1)].into_iter().collect();
        let f = frame(&["Add", "Add"], &effs, &vis, &vis);
        assert_eq!(Policy::Cc.forced_eo(&f), vis);
        assert!(Policy::Cc.holds(&f));
        assert!(!Policy::Ec.holds(&f));
        assert!(Policy::Ec.forced_eo(&f).is_empty());
    }

    #[test]
    fn axiom_shapes() {
        assert_eq!(ground_axioms(&Policy::Ec, 2).len(), 2);
        assert_eq!(ground_axioms(&Policy::Cc, 3).len(), 6 + 6);
        assert_eq!(ground_axioms(&Policy::Sc, 2).len(), 4);
    }

    #[test]
    fn parsing() {
        let d = [("Add", "Remove")];
        assert_eq!(Policy::parse("CC", &d), Ok(Policy::Cc));
        assert_eq!(Policy::parse("psi+rb", &d), Ok(Policy::psi_rb(&d)));
        assert_eq!(
            Policy::parse("psi+rb:Remove/AddRight,AddRight/AddRight", &[]),
            Ok(Policy::psi_rb(&[("AddRight", "Remove"), ("AddRight", "AddRight")]))
        );
        assert_eq!(Policy::parse("bc:1", &[]), Ok(Policy::BoundedConcurrency(1)));
        assert!(matches!(Policy::parse("rb", &[]), Err(PolicyError::MissingParams(_))));
        assert!(matches!(Policy::parse("linearizable", &[]), Err(PolicyError::Unknown(_))));
        assert!(Policy::parse("psi+rb:Add", &[]).is_err());
        let p = Policy::parse("rb:Add,Remove", &[]).unwrap();
        assert_eq!(Policy::parse(&p.to_string(), &[]), Ok(p));
    }
}
