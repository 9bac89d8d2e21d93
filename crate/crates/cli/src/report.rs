//! Versioned, serializable reports.

use std::collections::BTreeMap;

use convergent_core::encoder::replay::{Ni1Replay, Ni2Replay};
use convergent_core::opsem::{Event, Observer, OpInstance, Witness};
use convergent_core::{ConcreteState, CrdtSpec};
use serde::{Deserialize, Serialize};

use crate::solver::{SolverResult, Status};

/// Bumped on any incompatible change to the JSON layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Relation name → sorted tuples of atom names.
pub type StateJson = BTreeMap<String, Vec<Vec<String>>>;

pub fn state_json(spec: &CrdtSpec, s: &ConcreteState) -> StateJson {
    spec.state
        .iter()
        .zip(s.relations())
        .map(|(r, tuples)| {
            let rows = tuples.iter().map(|t| t.iter().map(|a| a.to_string()).collect()).collect();
            (r.name.clone(), rows)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpJson {
    pub op: String,
    pub args: Vec<String>,
}

impl From<&OpInstance> for OpJson {
    fn from(o: &OpInstance) -> Self {
        OpJson {
            op: o.op.clone(),
            args: o.args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventJson {
    pub id: usize,
    #[serde(flatten)]
    pub op: OpJson,
    /// Visible events in the order they were applied at the origin replica.
    pub sees: Vec<usize>,
}

impl From<&Event> for EventJson {
    fn from(e: &Event) -> Self {
        EventJson {
            id: e.eid,
            op: (&e.op).into(),
            sees: e.eo_r.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WitnessJson {
    /// Decoded from a satisfiable NI-1 query and replayed.
    Ni1 {
        events: Vec<EventJson>,
        target: StateJson,
        from_init: bool,
        states: [StateJson; 2],
    },
    /// Found by bounded enumeration of well-formed executions.
    Simulation {
        events: Vec<EventJson>,
        /// `"final"` or the index of the non-convergent event.
        observer: String,
        orders: [Vec<usize>; 2],
        states: [StateJson; 2],
    },
}

impl WitnessJson {
    pub fn from_ni1(spec: &CrdtSpec, r: &Ni1Replay) -> Self {
        WitnessJson::Ni1 {
            events: vec![
                EventJson {
                    id: 0,
                    op: (&r.events[0]).into(),
                    sees: vec![],
                },
                EventJson {
                    id: 1,
                    op: (&r.events[1]).into(),
                    sees: if r.vis { vec![0] } else { vec![] },
                },
            ],
            target: state_json(spec, &r.target),
            from_init: r.from_init,
            states: [state_json(spec, &r.states[0]), state_json(spec, &r.states[1])],
        }
    }

    pub fn from_simulation(spec: &CrdtSpec, w: &Witness) -> Self {
        WitnessJson::Simulation {
            events: w.execution.events().iter().map(EventJson::from).collect(),
            observer: match w.observer {
                Observer::Event(i) => i.to_string(),
                Observer::Final => "final".into(),
            },
            orders: w.orders.clone(),
            states: [state_json(spec, &w.states[0]), state_json(spec, &w.states[1])],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            WitnessJson::Ni1 { events, .. } | WitnessJson::Simulation { events, .. } => events.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A decoded NI-2 counterexample. It shows why the proof rule fails, not
/// that the CRDT diverges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ni2ModelJson {
    /// η1, η2 and the interferer η3.
    pub events: [OpJson; 3],
    pub starts: [StateJson; 3],
    pub vis12: bool,
    pub vis31: bool,
    pub vis32: bool,
    pub target: StateJson,
    pub states: [StateJson; 2],
}

impl Ni2ModelJson {
    pub fn new(spec: &CrdtSpec, r: &Ni2Replay) -> Self {
        Ni2ModelJson {
            events: [(&r.events[0]).into(), (&r.events[1]).into(), (&r.events[2]).into()],
            starts: [
                state_json(spec, &r.starts[0]),
                state_json(spec, &r.starts[1]),
                state_json(spec, &r.starts[2]),
            ],
            vis12: r.vis12,
            vis31: r.vis31,
            vis32: r.vis32,
            target: state_json(spec, &r.target),
            states: [state_json(spec, &r.states[0]), state_json(spec, &r.states[1])],
        }
    }
}

/// Outcome of one solver query, without the model text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryJson {
    pub status: Status,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl From<&SolverResult> for QueryJson {
    fn from(r: &SolverResult) -> Self {
        QueryJson {
            status: r.status,
            seconds: r.seconds,
            detail: r.detail.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationJson {
    pub depth: usize,
    pub elems: u32,
    pub ids: u32,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conclusion {
    Converges,
    NotConvergent,
    Inconclusive,
}

impl Conclusion {
    pub fn exit_code(self) -> i32 {
        match self {
            Conclusion::Converges => 0,
            Conclusion::NotConvergent => 1,
            Conclusion::Inconclusive => 2,
        }
    }

    pub fn mark(self) -> &'static str {
        match self {
            Conclusion::Converges => "ok",
            Conclusion::NotConvergent => "x",
            Conclusion::Inconclusive => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub schema_version: u32,
    pub crdt: String,
    pub policy: String,
    pub conclusion: Conclusion,
    pub ni1: QueryJson,
    /// Absent when NI-1 already failed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ni2: Option<QueryJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ni2_model: Option<Ni2ModelJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// CRDT → policy name → conclusion.
pub type MatrixJson = BTreeMap<String, BTreeMap<String, Conclusion>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub schema_version: u32,
    pub matrix: MatrixJson,
    pub cells: Vec<Verdict>,
    /// Cells whose conclusion differs from the expected matrix.
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedMatrix {
    pub schema_version: u32,
    pub matrix: MatrixJson,
}

/// The expected verdict matrix shipped with the tool.
pub fn expected_matrix() -> ExpectedMatrix {
    serde_json::from_str(include_str!("../assets/expected-matrix.json")).expect("bundled expected matrix is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub crdt: String,
    pub policy: String,
    #[serde(flatten)]
    pub simulation: SimulationJson,
}
