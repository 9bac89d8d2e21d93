//! Plain-text rendering of reports.

use std::fmt::Write;

use crate::report::{Conclusion, EventJson, MatrixReport, Ni2ModelJson, OpJson, QueryJson, SimulationJson, StateJson, Verdict, WitnessJson};

pub fn state(s: &StateJson) -> String {
    let rels: Vec<String> = s
        .iter()
        .map(|(r, rows)| {
            let tuples: Vec<String> = rows.iter().map(|t| format!("({})", t.join(" "))).collect();
            if tuples.is_empty() {
                format!("{r}:")
            } else {
                format!("{r}: {}", tuples.join(", "))
            }
        })
        .collect();
    format!("{{{}}}", rels.join("; "))
}

/// Like [`state`], but summarizes states with more than `LONG` tuples.
fn brief(s: &StateJson) -> String {
    const LONG: usize = 12;
    if s.values().map(Vec::len).sum::<usize>() <= LONG {
        return state(s);
    }
    let rels: Vec<String> = s.iter().map(|(r, rows)| format!("{r}: {} tuples", rows.len())).collect();
    format!("{{{}}}", rels.join("; "))
}

/// Tuples present in `a` but not in `b`, as a state.
fn minus(a: &StateJson, b: &StateJson) -> StateJson {
    a.iter()
        .map(|(r, rows)| {
            let other = b.get(r);
            let rest = rows.iter().filter(|t| other.is_none_or(|o| !o.contains(t))).cloned().collect();
            (r.clone(), rest)
        })
        .collect()
}

fn op(o: &OpJson) -> String {
    format!("{}({})", o.op, o.args.join(", "))
}

fn events(out: &mut String, evs: &[EventJson]) {
    for e in evs {
        let sees: Vec<String> = e.sees.iter().map(|i| format!("#{i}")).collect();
        let _ = writeln!(out, "  #{} {} sees [{}]", e.id, op(&e.op), sees.join(", "));
    }
}

fn order(o: &[usize]) -> String {
    let v: Vec<String> = o.iter().map(|i| format!("#{i}")).collect();
    format!("[{}]", v.join(", "))
}

pub fn witness(w: &WitnessJson) -> String {
    let mut s = String::new();
    match w {
        WitnessJson::Ni1 { events: evs, target, states, from_init } => {
            let _ = writeln!(s, "two-event execution (from NI-1):");
            events(&mut s, evs);
            let at = if *from_init { "the initial state".to_string() } else { state(target) };
            let _ = writeln!(s, "  applying both effectors to {at}:");
            let _ = writeln!(s, "    [#1, #0] -> {}", state(&states[0]));
            let _ = writeln!(s, "    [#0, #1] -> {}", state(&states[1]));
        }
        WitnessJson::Simulation { events: evs, observer, orders, states } => {
            let _ = writeln!(s, "well-formed execution of length {} (from bounded simulation):", evs.len());
            events(&mut s, evs);
            let who = if observer == "final" {
                "a replica that has seen every event".to_string()
            } else {
                format!("event #{observer}")
            };
            let _ = writeln!(s, "  {who} can reach different states:");
            for k in 0..2 {
                let _ = writeln!(s, "    {} -> {}", order(&orders[k]), state(&states[k]));
            }
        }
    }
    s
}

pub fn ni2_model(m: &Ni2ModelJson) -> String {
    let mut s = String::from("NI-2 counterexample:\n");
    for (k, (e, st)) in m.events.iter().zip(&m.starts).enumerate() {
        let _ = writeln!(s, "  eta{} = {} from {}", k + 1, op(e), brief(st));
    }
    let _ = writeln!(
        s,
        "  vis(eta1, eta2) = {}, vis(eta3, eta1') = {}, vis(eta3, eta2') = {}",
        m.vis12, m.vis31, m.vis32
    );
    let _ = writeln!(s, "  on {}:", brief(&m.target));
    let _ = writeln!(s, "    [eta2', eta1'] -> {}", brief(&m.states[0]));
    let _ = writeln!(s, "    [eta1', eta2'] -> {}", brief(&m.states[1]));
    let _ = writeln!(s, "    only in the first: {}", state(&minus(&m.states[0], &m.states[1])));
    let _ = writeln!(s, "    only in the second: {}", state(&minus(&m.states[1], &m.states[0])));
    s
}

fn query(q: &QueryJson) -> String {
    let mut s = format!("{} ({:.2} s)", q.status.as_str(), q.seconds);
    if let Some(d) = &q.detail {
        s += &format!(": {d}");
    }
    s
}

pub fn simulation(sim: &SimulationJson) -> String {
    match &sim.witness {
        Some(w) => format!(
            "bounded simulation (depth {}, {} elems, {} ids, {:.2} s): witness of length {}\n",
            sim.depth,
            sim.elems,
            sim.ids,
            sim.seconds,
            w.len()
        ),
        None => format!(
            "no violation up to depth {} with budget {} elems / {} ids ({:.2} s)\n",
            sim.depth, sim.elems, sim.ids, sim.seconds
        ),
    }
}

pub fn conclusion(c: Conclusion) -> &'static str {
    match c {
        Conclusion::Converges => "CONVERGES",
        Conclusion::NotConvergent => "NOT CONVERGENT",
        Conclusion::Inconclusive => "INCONCLUSIVE",
    }
}

pub fn verdict(v: &Verdict) -> String {
    let mut s = format!("crdt: {}  policy: {}\n", v.crdt, v.policy);
    let _ = writeln!(s, "NI-1: {}", query(&v.ni1));
    if let Some(q) = &v.ni2 {
        let _ = writeln!(s, "NI-2: {}", query(q));
    }
    if let Some(m) = &v.ni2_model {
        s += &ni2_model(m);
    }
    if let Some(sim) = &v.simulation {
        s += &simulation(sim);
    }
    if let Some(r) = &v.reason {
        if v.conclusion == Conclusion::Inconclusive {
            let _ = writeln!(s, "note: {r}");
        }
    }
    let _ = writeln!(s, "verdict: {}", conclusion(v.conclusion));
    if let Some(w) = &v.witness {
        s += &witness(w);
    }
    s
}

pub fn matrix(m: &MatrixReport, policies: &[String]) -> String {
    let mut s = format!("{:<18}", "CRDT");
    for p in policies {
        let _ = write!(s, "{p:<8}");
    }
    s += "time (s)\n";
    let mut rows: Vec<&str> = Vec::new();
    for c in &m.cells {
        if !rows.contains(&c.crdt.as_str()) {
            rows.push(&c.crdt);
        }
    }
    for crdt in rows {
        let row = &m.matrix[crdt];
        let _ = write!(s, "{crdt:<18}");
        for p in policies {
            let mark = row.get(p).map(|c| c.mark()).unwrap_or("-");
            let _ = write!(s, "{mark:<8}");
        }
        let secs: f64 = m
            .cells
            .iter()
            .filter(|c| c.crdt == crdt)
            .map(|c| c.ni1.seconds + c.ni2.as_ref().map_or(0.0, |q| q.seconds) + c.simulation.as_ref().map_or(0.0, |x| x.seconds))
            .sum();
        let _ = writeln!(s, "{secs:.2}");
    }
    s += "ok = converges, x = not convergent, ? = inconclusive\n";
    if m.mismatches.is_empty() {
        s += "all cells agree with the expected matrix\n";
    } else {
        let _ = writeln!(s, "cells differing from the expected matrix: {}", m.mismatches.join(", "));
    }
    s
}
