//! Verdicts from solver answers, with bounded simulation as fallback.

use std::time::Instant;

use convergent_core::encoder::model::{decode, Decoded, ModelError};
use convergent_core::encoder::replay::{replay_ni1, replay_ni2, ReplayError};
use convergent_core::encoder::{encode_ni1, encode_ni2, Condition, SmtScript};
use convergent_core::opsem::{Budget, Explorer, Witness};
use convergent_core::{CrdtSpec, Policy};
use rayon::prelude::*;

use crate::report::{Conclusion, Ni2ModelJson, QueryJson, SimulationJson, Verdict, WitnessJson, SCHEMA_VERSION};
use crate::solver::{Solver, SolverError, SolverResult, Status};

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot decode {0} model: {1}")]
    Decode(Condition, ModelError),
    #[error("{0} model does not replay (encoder bug): {1}")]
    Replay(Condition, ReplayError),
}

#[derive(Debug, Clone)]
pub struct Options {
    pub solver: Solver,
    /// Bounded simulation depth for the fallback; 0 disables it.
    pub depth: usize,
    pub budget: Budget,
}

/// Searches well-formed executions up to `depth` events, one task per root
/// event. Returns a shortest witness; ties go to the earliest root.
pub fn simulate(spec: &CrdtSpec, policy: &Policy, depth: usize, budget: Budget) -> Option<Witness> {
    if depth == 0 {
        return None;
    }
    let ex = Explorer::new(spec, policy, budget);
    ex.roots()
        .into_par_iter()
        .enumerate()
        .filter_map(|(k, r)| ex.check_from(r, depth).map(|w| (w.execution.len(), k, w)))
        .min_by_key(|(len, k, _)| (*len, *k))
        .map(|(_, _, w)| w)
}

/// Runs [`simulate`] and packages the result.
pub fn simulation_json(spec: &CrdtSpec, policy: &Policy, depth: usize, budget: Budget) -> SimulationJson {
    let start = Instant::now();
    let w = simulate(spec, policy, depth, budget);
    SimulationJson {
        depth,
        elems: budget.elems,
        ids: budget.ids,
        seconds: start.elapsed().as_secs_f64(),
        witness: w.map(|w| WitnessJson::from_simulation(spec, &w)),
    }
}

fn model_of(r: &SolverResult, cond: Condition) -> Result<&str, VerifyError> {
    r.model
        .as_deref()
        .ok_or_else(|| VerifyError::Decode(cond, ModelError::Unsupported("missing model".into())))
}

fn decoded(spec: &CrdtSpec, script: &SmtScript, r: &SolverResult, cond: Condition) -> Result<Decoded, VerifyError> {
    decode(spec, &script.meta, model_of(r, cond)?).map_err(|e| VerifyError::Decode(cond, e))
}

/// Checks NI-1, then NI-2; falls back to bounded simulation when the
/// proof rule is not conclusive.
pub fn verify(spec: &CrdtSpec, policy: &Policy, opts: &Options) -> Result<Verdict, VerifyError> {
    let mut v = Verdict {
        schema_version: SCHEMA_VERSION,
        crdt: spec.name.clone(),
        policy: policy.to_string(),
        conclusion: Conclusion::Inconclusive,
        ni1: QueryJson {
            status: Status::Unknown,
            seconds: 0.0,
            detail: None,
        },
        ni2: None,
        ni2_model: None,
        simulation: None,
        witness: None,
        reason: None,
    };

    let s1 = encode_ni1(spec, policy);
    let r1 = opts.solver.run(&s1)?;
    v.ni1 = (&r1).into();
    match r1.status {
        Status::Sat => {
            let d = decoded(spec, &s1, &r1, Condition::Ni1)?;
            let rep = replay_ni1(spec, policy, &d).map_err(|e| VerifyError::Replay(Condition::Ni1, e))?;
            v.conclusion = Conclusion::NotConvergent;
            v.witness = Some(WitnessJson::from_ni1(spec, &rep));
            return Ok(v);
        }
        Status::Unsat => {}
        other => {
            v.reason = Some(format!("NI-1 query returned {}", other.as_str()));
            return Ok(fallback(spec, policy, opts, v));
        }
    }

    let s2 = encode_ni2(spec, policy);
    let r2 = opts.solver.run(&s2)?;
    v.ni2 = Some((&r2).into());
    match r2.status {
        Status::Unsat => {
            v.conclusion = Conclusion::Converges;
            Ok(v)
        }
        Status::Sat => {
            let d = decoded(spec, &s2, &r2, Condition::Ni2)?;
            let rep = replay_ni2(spec, policy, &d).map_err(|e| VerifyError::Replay(Condition::Ni2, e))?;
            v.ni2_model = Some(Ni2ModelJson::new(spec, &rep));
            v.reason = Some("NI-2 fails; the proof rule is inconclusive".into());
            Ok(fallback(spec, policy, opts, v))
        }
        other => {
            v.reason = Some(format!("NI-2 query returned {}", other.as_str()));
            Ok(fallback(spec, policy, opts, v))
        }
    }
}

fn fallback(spec: &CrdtSpec, policy: &Policy, opts: &Options, mut v: Verdict) -> Verdict {
    if opts.depth == 0 {
        return v;
    }
    let sim = simulation_json(spec, policy, opts.depth, opts.budget);
    if let Some(w) = &sim.witness {
        v.conclusion = Conclusion::NotConvergent;
        v.witness = Some(w.clone());
    }
    v.simulation = Some(sim);
    v
}
