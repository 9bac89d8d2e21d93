//! Subcommand implementations. Each returns the rendered report and the
//! process exit code so tests can drive them without spawning the binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use convergent_core::encoder::{encode_ni1, encode_ni2};
use convergent_core::opsem::Budget;
use convergent_core::spec::{default_sync_pairs, BUILTIN_NAMES};
use convergent_core::{builtin, parse_spec, CrdtSpec, Policy};
use rayon::prelude::*;
use serde::Serialize;

use crate::report::{expected_matrix, Conclusion, MatrixJson, MatrixReport, QueryJson, SimulateReport, Verdict, SCHEMA_VERSION};
use crate::solver::{SolverError, Status};
use crate::verify::{simulation_json, verify, Options, VerifyError};
use crate::text;

/// Exit code for invalid invocations and configuration errors.
pub const EXIT_USAGE: i32 = 3;
/// Exit code for failures after a valid configuration was accepted.
pub const EXIT_FAILURE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Verify(VerifyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Solver(SolverError::Missing(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Solver(s) => CliError::Solver(s),
            e => CliError::Verify(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub output: String,
    pub code: i32,
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Resolves a built-in name or a path to a `.crdt` file.
pub fn load_crdt(selector: &str) -> Result<CrdtSpec, CliError> {
    if let Ok(spec) = builtin(selector) {
        return Ok(spec);
    }
    let path = Path::new(selector);
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "unknown CRDT `{selector}`: not a built-in ({}) and no such file",
            BUILTIN_NAMES.join(", ")
        )));
    }
    let src = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    parse_spec(&src).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}:{e}", path.display())).collect();
        CliError::Usage(lines.join("\n"))
    })
}

/// Parses a policy; `psi+rb` without pairs takes the CRDT's defaults.
pub fn load_policy(selector: &str, spec: &CrdtSpec) -> Result<Policy, CliError> {
    let policy = Policy::parse(selector, default_sync_pairs(&spec.name)).map_err(|e| CliError::Usage(e.to_string()))?;
    let known = |op: &str| spec.op(op).is_some();
    let unknown: Vec<&str> = match &policy {
        Policy::Rb(ops) => ops.iter().map(String::as_str).filter(|o| !known(o)).collect(),
        Policy::PsiRb(pairs) => pairs
            .iter()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .filter(|o| !known(o))
            .collect(),
        _ => vec![],
    };
    if let Some(op) = unknown.first() {
        return Err(CliError::Usage(format!("policy `{selector}` names unknown operation `{op}` of `{}`", spec.name)));
    }
    Ok(policy)
}

pub fn cmd_verify(spec: &CrdtSpec, policy: &Policy, opts: &Options, format: Format) -> Result<Outcome, CliError> {
    let v = verify(spec, policy, opts)?;
    let output = match format {
        Format::Text => text::verdict(&v),
        Format::Json => json(&v),
    };
    Ok(Outcome {
        output,
        code: v.conclusion.exit_code(),
    })
}

/// One requested matrix column: the policy text as given, or a default
/// column name.
#[derive(Debug, Clone)]
pub struct Column {
    pub selector: String,
    /// Key in the matrix and the expected fixture.
    pub key: String,
}

impl Column {
    pub fn defaults() -> Vec<Column> {
        ["EC", "CC", "PSI+RB", "PSI"]
            .into_iter()
            .map(|k| Column {
                selector: k.to_ascii_lowercase(),
                key: k.into(),
            })
            .collect()
    }

    pub fn parse(selector: &str) -> Column {
        let key = match Policy::parse(selector, &[("_", "_")]) {
            Ok(p) if !selector.contains(':') => p.name().into(),
            _ => selector.to_string(),
        };
        Column {
            selector: selector.into(),
            key,
        }
    }
}

fn failed_cell(spec: &CrdtSpec, policy: &Policy, e: &CliError) -> Verdict {
    Verdict {
        schema_version: SCHEMA_VERSION,
        crdt: spec.name.clone(),
        policy: policy.to_string(),
        conclusion: Conclusion::Inconclusive,
        ni1: QueryJson {
            status: Status::Crash,
            seconds: 0.0,
            detail: None,
        },
        ni2: None,
        ni2_model: None,
        simulation: None,
        witness: None,
        reason: Some(e.to_string()),
    }
}

/// Runs every (CRDT, column) cell on a pool of `jobs` workers and compares
/// the result with the bundled expected matrix.
pub fn cmd_matrix(specs: &[CrdtSpec], columns: &[Column], opts: &Options, format: Format, jobs: usize) -> Result<Outcome, CliError> {
    let mut cells = Vec::new();
    for spec in specs {
        for col in columns {
            cells.push((spec, col, load_policy(&col.selector, spec)?));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let results: Vec<(Verdict, bool)> = pool.install(|| {
        cells
            .par_iter()
            .map(|(spec, _, policy)| match verify(spec, policy, opts) {
                Ok(v) => (v, false),
                Err(e) => (failed_cell(spec, policy, &e.into()), true),
            })
            .collect()
    });

    let expected = expected_matrix().matrix;
    let mut matrix = MatrixJson::new();
    let mut mismatches = Vec::new();
    let mut failed = false;
    for ((spec, col, _), (v, err)) in cells.iter().zip(&results) {
        failed |= *err;
        matrix.entry(spec.name.clone()).or_default().insert(col.key.clone(), v.conclusion);
        if let Some(want) = expected.get(&spec.name).and_then(|r| r.get(&col.key)) {
            if *want != v.conclusion {
                mismatches.push(format!("{}/{}", spec.name, col.key));
            }
        }
    }
    let report = MatrixReport {
        schema_version: SCHEMA_VERSION,
        matrix,
        cells: results.into_iter().map(|(v, _)| v).collect(),
        mismatches,
    };
    let output = match format {
        Format::Text => {
            let keys: Vec<String> = columns.iter().map(|c| c.key.clone()).collect();
            let mut s = text::matrix(&report, &keys);
            for v in report.cells.iter().filter(|v| v.reason.is_some() && v.ni1.status == Status::Crash) {
                let _ = writeln!(s, "error in {}/{}: {}", v.crdt, v.policy, v.reason.as_deref().unwrap_or(""));
            }
            let _ = writeln!(s, "total wall time {:.2} s", start.elapsed().as_secs_f64());
            s
        }
        Format::Json => json(&report),
    };
    let code = if report.mismatches.is_empty() && !failed { 0 } else { 1 };
    Ok(Outcome { output, code })
}

/// Bounded search for a non-convergent execution. Exits 1 on a witness.
pub fn cmd_simulate(spec: &CrdtSpec, policy: &Policy, depth: usize, budget: Budget, format: Format) -> Outcome {
    let sim = simulation_json(spec, policy, depth, budget);
    let code = if sim.witness.is_some() { 1 } else { 0 };
    let output = match format {
        Format::Text => {
            let mut s = format!("crdt: {}  policy: {policy}\n", spec.name);
            match &sim.witness {
                Some(w) => {
                    s += &text::simulation(&sim);
                    s += &text::witness(w);
                }
                None => {
                    let _ = writeln!(
                        s,
                        "no violation up to depth {depth} with budget {} elems / {} ids ({:.2} s)",
                        budget.elems, budget.ids, sim.seconds
                    );
                }
            }
            s
        }
        Format::Json => json(&SimulateReport {
            schema_version: SCHEMA_VERSION,
            crdt: spec.name.clone(),
            policy: policy.to_string(),
            simulation: sim,
        }),
    };
    Outcome { output, code }
}

/// Writes the NI-1 and NI-2 scripts of every cell into `dir`.
pub fn cmd_emit(specs: &[CrdtSpec], columns: &[Column], dir: &Path) -> Result<Outcome, CliError> {
    let io = |source| CliError::Io {
        path: dir.into(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut out = String::new();
    for spec in specs {
        for col in columns {
            let policy = load_policy(&col.selector, spec)?;
            for script in [encode_ni1(spec, &policy), encode_ni2(spec, &policy)] {
                let path = dir.join(script.file_name());
                std::fs::write(&path, &script.text).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                let _ = writeln!(out, "{}", path.display());
            }
        }
    }
    Ok(Outcome { output: out, code: 0 })
}

pub fn cmd_list() -> Outcome {
    let mut s = String::from("built-in CRDTs:\n");
    for name in BUILTIN_NAMES {
        let spec = builtin(name).expect("built-in");
        let ops: Vec<&str> = spec.ops.iter().map(|o| o.name.as_str()).collect();
        let pairs: Vec<String> = default_sync_pairs(name).iter().map(|(a, b)| format!("{a}/{b}")).collect();
        let _ = writeln!(s, "  {name:<18} ops: {}", ops.join(", "));
        let _ = writeln!(s, "  {:<18} psi+rb pairs: {}", "", pairs.join(", "));
    }
    s += "policies:\n";
    for (p, d) in [
        ("ec", "eventual consistency"),
        ("cc", "causal consistency"),
        ("rb:OP,...", "RedBlue; the listed operations are red"),
        ("psi", "parallel snapshot isolation"),
        ("psi+rb[:A/B,...]", "PSI for the listed pairs, EC elsewhere"),
        ("sc", "strong consistency"),
        ("bc:K", "bounded concurrency (not stable; for testing)"),
    ] {
        let _ = writeln!(s, "  {p:<18} {d}");
    }
    Outcome { output: s, code: 0 }
}
