//! External SMT solver process driver.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use convergent_core::encoder::model::Model;
use convergent_core::encoder::SmtScript;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

/// Environment variable naming the solver executable; overrides `--solver`.
pub const SOLVER_ENV: &str = "CONVERGENT_SOLVER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Unsat,
    Sat,
    Unknown,
    Timeout,
    Crash,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Unsat => "unsat",
            Status::Sat => "sat",
            Status::Unknown => "unknown",
            Status::Timeout => "timeout",
            Status::Crash => "crash",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub status: Status,
    /// Model text, present iff `status` is `sat`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Diagnostic for `crash`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub seconds: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("solver executable `{0}` not found")]
    Missing(String),
    #[error("cannot run solver `{path}`: {source}")]
    Spawn {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write solver input: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Solver {
    pub path: PathBuf,
    pub timeout: Duration,
}

fn on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|d| d.join(name)).find(|p| p.is_file())
}

impl Solver {
    /// Resolves the executable: environment variable, then `flag`, then `z3`
    /// on `PATH`.
    pub fn locate(flag: Option<&Path>, timeout: Duration) -> Result<Solver, SolverError> {
        let chosen = std::env::var_os(SOLVER_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .or_else(|| flag.map(Path::to_path_buf));
        let path = match chosen {
            Some(p) if p.components().count() > 1 || p.is_file() => p,
            Some(p) => on_path(&p.to_string_lossy()).ok_or_else(|| SolverError::Missing(p.display().to_string()))?,
            None => on_path("z3").ok_or_else(|| SolverError::Missing("z3".into()))?,
        };
        if !path.is_file() {
            return Err(SolverError::Missing(path.display().to_string()));
        }
        Ok(Solver { path, timeout })
    }

    /// Runs the solver on `script`, killing it after the timeout.
    pub fn run(&self, script: &SmtScript) -> Result<SolverResult, SolverError> {
        self.run_text(&script.text)
    }

    pub fn run_text(&self, text: &str) -> Result<SolverResult, SolverError> {
        let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
        file.write_all(text.as_bytes())?;
        file.flush()?;
        let start = Instant::now();
        let mut cmd = Command::new(&self.path);
        // Own process group, so a timeout also reaps anything the solver forked.
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd
            .arg(file.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| SolverError::Spawn {
                path: self.path.display().to_string(),
                source,
            })?;
        let mut out = child.stdout.take().expect("piped stdout");
        let mut err = child.stderr.take().expect("piped stderr");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = out.read_to_string(&mut s);
            s
        });
        let err_reader = std::thread::spawn(move || {
            let mut s = String::new();
            let _ = err.read_to_string(&mut s);
            s
        });
        let exited = child.wait_timeout(self.timeout)?;
        if exited.is_none() {
            kill_group(&mut child);
        }
        let stdout = reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        let seconds = start.elapsed().as_secs_f64();
        if exited.is_none() {
            return Ok(SolverResult {
                status: Status::Timeout,
                model: None,
                detail: None,
                seconds,
            });
        }
        Ok(classify(&stdout, &stderr, seconds))
    }
}

#[cfg(unix)]
fn kill_group(child: &mut std::process::Child) {
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: plain syscall on a process group we created.
        unsafe {
            libc::killpg(pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

#[cfg(not(unix))]
fn kill_group(child: &mut std::process::Child) {
    let _ = child.kill();
    let _ = child.wait();
}

/// Interprets solver output: the first line is the status, a model follows
/// on `sat`.
pub fn classify(stdout: &str, stderr: &str, seconds: f64) -> SolverResult {
    let mut lines = stdout.lines().skip_while(|l| l.trim().is_empty());
    let first = lines.next().map(str::trim).unwrap_or("");
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let crash = |detail: String| SolverResult {
        status: Status::Crash,
        model: None,
        detail: Some(detail),
        seconds,
    };
    match first {
        "unsat" => SolverResult {
            status: Status::Unsat,
            model: None,
            detail: None,
            seconds,
        },
        "unknown" => SolverResult {
            status: Status::Unknown,
            model: None,
            detail: None,
            seconds,
        },
        "sat" => match Model::parse(&rest) {
            Ok(_) => SolverResult {
                status: Status::Sat,
                model: Some(rest),
                detail: None,
                seconds,
            },
            Err(e) => crash(format!("unparseable model: {e}")),
        },
        _ => {
            let mut d = first.to_string();
            if !stderr.trim().is_empty() {
                d = format!("{d} {}", stderr.trim());
            }
            crash(if d.trim().is_empty() { "no output".into() } else { d })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_solver_output() {
        assert_eq!(classify("unsat\n(error \"no model\")\n", "", 0.0).status, Status::Unsat);
        assert_eq!(classify("unknown\n", "", 0.0).status, Status::Unknown);
        let s = classify("sat\n(\n  (define-fun a () Bool true)\n)\n", "", 0.0);
        assert_eq!(s.status, Status::Sat);
        assert!(s.model.unwrap().contains("define-fun"));
        assert_eq!(classify("", "segfault", 0.0).status, Status::Crash);
        assert_eq!(classify("sat\n((\n", "", 0.0).status, Status::Crash);
    }
}
