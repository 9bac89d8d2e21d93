//! Reading solver models back into concrete values.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ScriptMeta;
use crate::interp::{Atom, ConcreteState};
use crate::sexpr::{read_all, ReadError, Sexp};
use crate::spec::{CrdtSpec, Sort};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("malformed model: {0}")]
    Read(#[from] ReadError),
    #[error("unsupported model term `{0}`")]
    Unsupported(String),
    #[error("model term nests too deeply")]
    TooDeep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Val {
    Bool(bool),
    Elt(String),
}

/// Function definitions from a `(get-model)` response.
#[derive(Debug, Clone, Default)]
pub struct Model {
    funs: BTreeMap<String, (Vec<String>, Sexp)>,
    universe: BTreeMap<String, Vec<String>>,
}

fn collect_values(e: &Sexp, out: &mut BTreeMap<String, Vec<String>>) {
    match e {
        Sexp::Atom(a, _) => {
            if let Some((sort, _)) = a.split_once("!val!") {
                let vals = out.entry(sort.to_string()).or_default();
                if !vals.contains(a) {
                    vals.push(a.clone());
                }
            }
        }
        Sexp::List(items, _) => items.iter().for_each(|i| collect_values(i, out)),
    }
}

fn value_index(v: &str) -> u64 {
    v.rsplit_once("!val!").and_then(|(_, n)| n.parse().ok()).unwrap_or(u64::MAX)
}

impl Model {
    /// Parses the model text. Both the bare list of `define-fun`s and the
    /// older `(model ...)` wrapper are accepted.
    pub fn parse(text: &str) -> Result<Model, ModelError> {
        let mut m = Model::default();
        let mut todo: Vec<Sexp> = read_all(text)?;
        while let Some(e) = todo.pop() {
            match e.head() {
                Some("define-fun") => {
                    let l = e.as_list().unwrap_or_default();
                    if l.len() != 5 {
                        return Err(ModelError::Unsupported(e.to_string()));
                    }
                    let name = l[1].as_atom().unwrap_or_default().to_string();
                    let params = l[2]
                        .as_list()
                        .unwrap_or_default()
                        .iter()
                        .filter_map(|p| p.head().map(str::to_string))
                        .collect();
                    collect_values(&l[4], &mut m.universe);
                    m.funs.insert(name, (params, l[4].clone()));
                }
                Some("declare-fun") => collect_values(&e, &mut m.universe),
                Some(_) | None => {
                    if let Some(items) = e.as_list() {
                        todo.extend(items.iter().cloned());
                    }
                }
            }
        }
        for vals in m.universe.values_mut() {
            vals.sort_by_key(|v| value_index(v));
        }
        Ok(m)
    }

    /// Values of an uninterpreted sort that occur in the model.
    pub fn universe(&self, sort: &str) -> &[String] {
        self.universe.get(sort).map(Vec::as_slice).unwrap_or_default()
    }

    fn eval(&self, e: &Sexp, env: &[(String, Val)], depth: usize) -> Result<Val, ModelError> {
        if depth > 512 {
            return Err(ModelError::TooDeep);
        }
        let bool_of = |e: &Sexp, env: &[(String, Val)]| -> Result<bool, ModelError> {
            match self.eval(e, env, depth + 1)? {
                Val::Bool(b) => Ok(b),
                Val::Elt(v) => Err(ModelError::Unsupported(v)),
            }
        };
        match e {
            Sexp::Atom(a, _) => Ok(match a.as_str() {
                "true" => Val::Bool(true),
                "false" => Val::Bool(false),
                _ => {
                    if let Some((_, v)) = env.iter().rev().find(|(n, _)| n == a) {
                        v.clone()
                    } else if self.funs.contains_key(a) {
                        self.call(a, &[], depth + 1)?
                    } else {
                        Val::Elt(a.clone())
                    }
                }
            }),
            Sexp::List(items, _) => {
                let head = e.head().ok_or_else(|| ModelError::Unsupported(e.to_string()))?;
                let args = &items[1..];
                match head {
                    "and" => {
                        for a in args {
                            if !bool_of(a, env)? {
                                return Ok(Val::Bool(false));
                            }
                        }
                        Ok(Val::Bool(true))
                    }
                    "or" => {
                        for a in args {
                            if bool_of(a, env)? {
                                return Ok(Val::Bool(true));
                            }
                        }
                        Ok(Val::Bool(false))
                    }
                    "not" if args.len() == 1 => Ok(Val::Bool(!bool_of(&args[0], env)?)),
                    "=>" if args.len() == 2 => Ok(Val::Bool(!bool_of(&args[0], env)? || bool_of(&args[1], env)?)),
                    "ite" if args.len() == 3 => {
                        if bool_of(&args[0], env)? {
                            self.eval(&args[1], env, depth + 1)
                        } else {
                            self.eval(&args[2], env, depth + 1)
                        }
                    }
                    "=" | "distinct" => {
                        let vals = args
                            .iter()
                            .map(|a| self.eval(a, env, depth + 1))
                            .collect::<Result<Vec<_>, _>>()?;
                        let eq = vals.windows(2).all(|w| w[0] == w[1]);
                        if head == "=" {
                            Ok(Val::Bool(eq))
                        } else {
                            let mut all_distinct = true;
                            for i in 0..vals.len() {
                                for j in i + 1..vals.len() {
                                    all_distinct &= vals[i] != vals[j];
                                }
                            }
                            Ok(Val::Bool(all_distinct))
                        }
                    }
                    "let" if args.len() == 2 => {
                        let mut env2 = env.to_vec();
                        for b in args[0].as_list().unwrap_or_default() {
                            let pair = b.as_list().unwrap_or_default();
                            if pair.len() != 2 {
                                return Err(ModelError::Unsupported(b.to_string()));
                            }
                            let v = self.eval(&pair[1], env, depth + 1)?;
                            env2.push((pair[0].as_atom().unwrap_or_default().to_string(), v));
                        }
                        self.eval(&args[1], &env2, depth + 1)
                    }
                    f if self.funs.contains_key(f) => {
                        let vals = args
                            .iter()
                            .map(|a| self.eval(a, env, depth + 1))
                            .collect::<Result<Vec<_>, _>>()?;
                        self.call(f, &vals, depth + 1)
                    }
                    _ => Err(ModelError::Unsupported(e.to_string())),
                }
            }
        }
    }

    fn call(&self, f: &str, args: &[Val], depth: usize) -> Result<Val, ModelError> {
        let (params, body) = &self.funs[f];
        let env: Vec<(String, Val)> = params.iter().cloned().zip(args.iter().cloned()).collect();
        self.eval(body, &env, depth)
    }

    /// Value of a Boolean constant; `None` if the model leaves it out.
    pub fn bool(&self, name: &str) -> Result<Option<bool>, ModelError> {
        if !self.funs.contains_key(name) {
            return Ok(None);
        }
        match self.call(name, &[], 0)? {
            Val::Bool(b) => Ok(Some(b)),
            Val::Elt(v) => Err(ModelError::Unsupported(v)),
        }
    }

    /// Value of a constant of an uninterpreted sort.
    pub fn value(&self, name: &str) -> Result<Option<String>, ModelError> {
        if !self.funs.contains_key(name) {
            return Ok(None);
        }
        match self.call(name, &[], 0)? {
            Val::Elt(v) => Ok(Some(v)),
            Val::Bool(b) => Err(ModelError::Unsupported(b.to_string())),
        }
    }

    /// Whether predicate `f` holds on `args`; an absent predicate is false.
    pub fn holds(&self, f: &str, args: &[String]) -> Result<bool, ModelError> {
        if !self.funs.contains_key(f) {
            return Ok(false);
        }
        let vals: Vec<Val> = args.iter().cloned().map(Val::Elt).collect();
        match self.call(f, &vals, 0)? {
            Val::Bool(b) => Ok(b),
            Val::Elt(v) => Err(ModelError::Unsupported(v)),
        }
    }
}

/// An operation instance read from a model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInst {
    pub op: String,
    pub args: Vec<Atom>,
}

/// Everything a script's metadata names, in concrete terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub insts: Vec<ModelInst>,
    pub bits: BTreeMap<String, bool>,
    pub states: BTreeMap<String, ConcreteState>,
}

/// Maps solver values to atoms: elements by value index, identifiers by
/// rank under `lt`, so that `root` becomes `i0`.
struct Atoms {
    elems: Vec<String>,
    ids: Vec<String>,
}

impl Atoms {
    fn new(m: &Model) -> Result<Atoms, ModelError> {
        let mut elems = m.universe("Elem").to_vec();
        if elems.is_empty() {
            elems.push("Elem!val!0".into());
        }
        let mut ids = m.universe("Id").to_vec();
        if ids.is_empty() {
            ids.push("Id!val!0".into());
        }
        let mut ranked = Vec::new();
        for a in &ids {
            let mut below = 0usize;
            for b in &ids {
                if m.holds("lt", &[b.clone(), a.clone()])? {
                    below += 1;
                }
            }
            ranked.push((below, value_index(a), a.clone()));
        }
        ranked.sort();
        Ok(Atoms {
            elems,
            ids: ranked.into_iter().map(|(_, _, a)| a).collect(),
        })
    }

    fn universe(&self, s: Sort) -> &[String] {
        match s {
            Sort::Elem => &self.elems,
            Sort::Id => &self.ids,
        }
    }

    fn atom(&self, s: Sort, v: &str) -> Atom {
        let pos = self.universe(s).iter().position(|x| x == v).unwrap_or(0);
        match s {
            Sort::Elem => Atom::elem(pos as u32),
            Sort::Id => Atom::id(pos as u32),
        }
    }
}

fn tuples(atoms: &Atoms, sorts: &[Sort]) -> Vec<Vec<(String, Atom)>> {
    let mut out: Vec<Vec<(String, Atom)>> = alloc::vec![Vec::new()];
    for s in sorts {
        let mut next = Vec::new();
        for t in &out {
            for (k, v) in atoms.universe(*s).iter().enumerate() {
                let a = match s {
                    Sort::Elem => Atom::elem(k as u32),
                    Sort::Id => Atom::id(k as u32),
                };
                let mut t2 = t.clone();
                t2.push((v.clone(), a));
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

/// Reads the instances, bits and states named by `meta` from a model.
pub fn decode(spec: &CrdtSpec, meta: &ScriptMeta, model_text: &str) -> Result<Decoded, ModelError> {
    let m = Model::parse(model_text)?;
    let atoms = Atoms::new(&m)?;
    let mut insts = Vec::new();
    for i in &meta.insts {
        let mut chosen = None;
        for (op, sel, args) in &i.ops {
            if m.bool(sel)? == Some(true) {
                chosen = Some((op, args));
            }
        }
        let (op, args) = match chosen.or_else(|| i.ops.first().map(|(o, _, a)| (o, a))) {
            Some(c) => c,
            None => continue,
        };
        let spec_op = spec.op(op).ok_or_else(|| ModelError::Unsupported(op.clone()))?;
        let mut vals = Vec::new();
        for (p, a) in spec_op.params.iter().zip(args) {
            let v = m.value(a)?.unwrap_or_else(|| atoms.universe(p.sort)[0].clone());
            vals.push(atoms.atom(p.sort, &v));
        }
        insts.push(ModelInst { op: op.clone(), args: vals });
    }
    let mut bits = BTreeMap::new();
    for (label, name) in &meta.bits {
        bits.insert(label.clone(), m.bool(name)?.unwrap_or(false));
    }
    let mut states = BTreeMap::new();
    for s in &meta.states {
        let mut st = ConcreteState::empty(spec);
        for (k, r) in spec.state.iter().enumerate() {
            for t in tuples(&atoms, &r.columns) {
                let vals: Vec<String> = t.iter().map(|(v, _)| v.clone()).collect();
                if m.holds(&alloc::format!("{s}_{}", r.name), &vals)? {
                    st.insert(k, t.into_iter().map(|(_, a)| a).collect());
                }
            }
        }
        states.insert(s.clone(), st);
    }
    Ok(Decoded { insts, bits, states })
}
