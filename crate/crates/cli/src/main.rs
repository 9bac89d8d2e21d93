use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use convergent::commands::{self, CliError, Column, Format, Outcome, EXIT_FAILURE, EXIT_USAGE};
use convergent::solver::Solver;
use convergent::verify::Options;
use convergent_core::opsem::Budget;
use convergent_core::spec::BUILTIN_NAMES;

/// Verifies strong eventual consistency of operation-based CRDTs under
/// weak consistency policies.
#[derive(Parser)]
#[command(name = "convergent", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check one CRDT under one policy. Exits 0, 1 or 2 for converges,
    /// not convergent or inconclusive.
    Verify {
        /// Built-in name or path to a .crdt file.
        #[arg(long)]
        crdt: String,
        /// ec, cc, rb:OPS, psi, psi+rb[:A/B,...], sc or bc:K.
        #[arg(long)]
        policy: String,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Verdict matrix over CRDTs and policies, compared with the expected one.
    Matrix {
        /// Restrict to these CRDTs (repeatable); default all built-ins.
        #[arg(long)]
        crdt: Vec<String>,
        /// Restrict to these policies (repeatable); default EC, CC, PSI+RB, PSI.
        #[arg(long)]
        policy: Vec<String>,
        /// Worker threads; default one per core.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bounded search for a non-convergent well-formed execution. Exits 1
    /// when one is found.
    Simulate {
        #[arg(long)]
        crdt: String,
        #[arg(long)]
        policy: String,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write the SMT-LIB scripts without solving them.
    Emit {
        #[arg(long)]
        crdt: Vec<String>,
        #[arg(long)]
        policy: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "smt")]
        out: PathBuf,
    },
    /// List built-in CRDTs and policy syntax.
    List,
}

#[derive(Args)]
struct SolveArgs {
    /// Per-query timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout: u64,
    /// Solver executable; the CONVERGENT_SOLVER environment variable takes
    /// precedence. Default: z3 on PATH.
    #[arg(long)]
    solver: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    /// Maximum number of events in simulated executions; 0 disables.
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Element atoms available to generated operations.
    #[arg(long, default_value_t = 2)]
    elems: u32,
    /// Identifier atoms available to generated operations.
    #[arg(long, default_value_t = 3)]
    ids: u32,
}

impl SimArgs {
    fn budget(&self) -> Budget {
        Budget {
            elems: self.elems,
            ids: self.ids,
        }
    }
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn options(solve: &SolveArgs, sim: &SimArgs) -> Result<Options, CliError> {
    if solve.timeout == 0 {
        return Err(CliError::Usage("--timeout must be positive".into()));
    }
    Ok(Options {
        solver: Solver::locate(solve.solver.as_deref(), Duration::from_secs(solve.timeout))?,
        depth: sim.depth,
        budget: sim.budget(),
    })
}

fn check_budget(sim: &SimArgs) -> Result<(), CliError> {
    if sim.elems == 0 || sim.ids == 0 {
        return Err(CliError::Usage("--elems and --ids must be positive".into()));
    }
    Ok(())
}

fn specs(selectors: &[String]) -> Result<Vec<convergent_core::CrdtSpec>, CliError> {
    if selectors.is_empty() {
        return BUILTIN_NAMES.iter().map(|n| commands::load_crdt(n)).collect();
    }
    selectors.iter().map(|s| commands::load_crdt(s)).collect()
}

fn columns(selectors: &[String]) -> Vec<Column> {
    if selectors.is_empty() {
        Column::defaults()
    } else {
        selectors.iter().map(|s| Column::parse(s)).collect()
    }
}

fn run(cmd: Cmd) -> Result<(Outcome, Option<PathBuf>), CliError> {
    Ok(match cmd {
        Cmd::Verify { crdt, policy, solve, sim, out } => {
            check_budget(&sim)?;
            let spec = commands::load_crdt(&crdt)?;
            let policy = commands::load_policy(&policy, &spec)?;
            let opts = options(&solve, &sim)?;
            (commands::cmd_verify(&spec, &policy, &opts, out.format)?, out.out)
        }
        Cmd::Matrix {
            crdt,
            policy,
            jobs,
            solve,
            sim,
            out,
        } => {
            check_budget(&sim)?;
            let specs = specs(&crdt)?;
            let opts = options(&solve, &sim)?;
            let jobs = jobs
                .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
                .unwrap_or(1);
            if jobs == 0 {
                return Err(CliError::Usage("--jobs must be positive".into()));
            }
            (commands::cmd_matrix(&specs, &columns(&policy), &opts, out.format, jobs)?, out.out)
        }
        Cmd::Simulate { crdt, policy, sim, out } => {
            check_budget(&sim)?;
            let spec = commands::load_crdt(&crdt)?;
            let policy = commands::load_policy(&policy, &spec)?;
            (commands::cmd_simulate(&spec, &policy, sim.depth, sim.budget(), out.format), out.out)
        }
        Cmd::Emit { crdt, policy, out } => (commands::cmd_emit(&specs(&crdt)?, &columns(&policy), &out)?, None),
        Cmd::List => (commands::cmd_list(), None),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok((outcome, None)) => {
            let _ = std::io::stdout().write_all(outcome.output.as_bytes());
            ExitCode::from(outcome.code as u8)
        }
        Ok((outcome, Some(path))) => match std::fs::write(&path, &outcome.output) {
            Ok(()) => ExitCode::from(outcome.code as u8),
            Err(e) => {
                eprintln!("convergent: {}: {e}", path.display());
                ExitCode::from(EXIT_FAILURE as u8)
            }
        },
        Err(e) => {
            eprintln!("convergent: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
