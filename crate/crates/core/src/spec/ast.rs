use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Column sort. `Id` carries a strict total order, `Elem` is uninterpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Elem,
    Id,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Elem => "Elem",
            Sort::Id => "Id",
        }
    }

    pub fn from_name(s: &str) -> Option<Sort> {
        match s {
            "Elem" => Some(Sort::Elem),
            "Id" => Some(Sort::Id),
            _ => None,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One component of the replica state: a finite relation over column sorts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelDecl {
    pub name: String,
    pub columns: Vec<Sort>,
}

/// Named constant. Only `Id` constants are supported; each is the least
/// identifier of the order (e.g. the list head of RGA).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstDecl {
    pub name: String,
    pub sort: Sort,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub sort: Sort,
    /// A fresh identifier: distinct from every other fresh identifier of the
    /// execution and larger than every identifier allocated before it.
    pub fresh: bool,
}

/// Reference to a state relation, either in the source replica (`S`) or in
/// the target replica the effector is applied to (`S'`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RelRef {
    pub name: String,
    pub target: bool,
}

impl fmt::Display for RelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.target {
            f.write_str("'")?;
        }
        Ok(())
    }
}

/// Position in a relation pattern.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slot {
    /// Introduces a new variable bound to this column.
    Bind(String),
    /// Column must equal a variable already in scope.
    Match(String),
    /// Any value.
    Wild,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Not(alloc::boxed::Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(alloc::boxed::Box<Formula>, alloc::boxed::Box<Formula>),
    Eq(String, String),
    /// Strict identifier order.
    Lt(String, String),
    In(RelRef, Vec<String>),
    Exists(RelRef, Vec<Slot>, alloc::boxed::Box<Formula>),
    Forall(RelRef, Vec<Slot>, alloc::boxed::Box<Formula>),
}

impl Formula {
    /// True when any relation reference (at any depth) points at the target state.
    pub fn mentions_target(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Eq(..) | Formula::Lt(..) => false,
            Formula::Not(f) => f.mentions_target(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().any(Formula::mentions_target),
            Formula::Implies(a, b) => a.mentions_target() || b.mentions_target(),
            Formula::In(r, _) => r.target,
            Formula::Exists(r, _, b) | Formula::Forall(r, _, b) => r.target || b.mentions_target(),
        }
    }

    /// True when no relation reference points at the target state.
    pub fn is_source_only(&self) -> bool {
        !self.mentions_target()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UpdateKind {
    Add,
    Remove,
}

impl UpdateKind {
    pub fn keyword(self) -> &'static str {
        match self {
            UpdateKind::Add => "add",
            UpdateKind::Remove => "remove",
        }
    }
}

/// Comprehension range: iterate over the source tuples of `rel` matching `slots`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Range {
    pub rel: RelRef,
    pub slots: Vec<Slot>,
}

/// `(add R (t ...) (for ...) (when ...))` / `(remove ...)`.
///
/// `tuple` entries are variable names, or `None` for `_` (remove only). The
/// `when` condition may mention the target state; it is re-evaluated when the
/// effector is applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Update {
    pub kind: UpdateKind,
    pub rel: String,
    pub tuple: Vec<Option<String>>,
    pub range: Option<Range>,
    pub when: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpSpec {
    pub name: String,
    pub params: Vec<Param>,
    /// Evaluated on the source state; a false guard yields the identity effector.
    pub guard: Formula,
    /// Parameters forming a key that no two events of this operation share.
    pub unique: Vec<String>,
    pub updates: Vec<Update>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrdtSpec {
    pub name: String,
    pub consts: Vec<ConstDecl>,
    pub state: Vec<RelDecl>,
    pub ops: Vec<OpSpec>,
    pub queries: Vec<QuerySpec>,
}

impl CrdtSpec {
    pub fn relation(&self, name: &str) -> Option<(usize, &RelDecl)> {
        self.state.iter().enumerate().find(|(_, r)| r.name == name)
    }

    pub fn op(&self, name: &str) -> Option<&OpSpec> {
        self.ops.iter().find(|o| o.name == name)
    }

    pub fn query(&self, name: &str) -> Option<&QuerySpec> {
        self.queries.iter().find(|q| q.name == name)
    }

    pub fn has_fresh_ids(&self) -> bool {
        self.ops.iter().any(|o| o.params.iter().any(|p| p.fresh))
    }

    /// Relations that only grow, and only by adds that do not inspect the
    /// target state: once a replica holds such a tuple, every replica that
    /// applies the same effectors holds it too.
    pub fn stable_relations(&self) -> Vec<&str> {
        self.state
            .iter()
            .filter(|r| {
                self.ops.iter().flat_map(|o| &o.updates).filter(|u| u.rel == r.name).all(|u| {
                    u.kind == UpdateKind::Add && u.when == Formula::True
                })
            })
            .map(|r| r.name.as_str())
            .collect()
    }
}
