//! `workstate` command line.
//!
//! Exit codes: 0 success, 1 usage or I/O problems, 2 domain failures
//! (aborted tasks, invalid chains, replay divergence).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::executor::{load_rules, ReflexRule, DEFAULT_MAX_STEPS};
use crate::ledger::{
    export, logical_timestamp, parse_entries, task_ids, verify_chain, Clock, LedgerEntry,
    LogicalClock, WallClock,
};
use crate::notes::{render_journal, NotesError};
use crate::runtime::{first_divergence, run_stress, run_workload_with, Workload};
use crate::simenv::EnvConfig;
use crate::task_model::Task;
use crate::worker::{RunSettings, StrategyState, DEFAULT_MAX_REVISIONS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;

pub const DEFAULT_LEDGER_PATH: &str = "run.wsl.jsonl";

#[derive(Debug, Parser)]
#[command(name = "workstate", version, about = "Work-state agent runtime")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run tasks and write the ledger.
    Run(RunArgs),
    /// Verify a ledger file.
    Verify {
        ledger: PathBuf,
    },
    /// Render a ledger into a Markdown work journal.
    Journal {
        ledger: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Re-run the workload of a logical-clock ledger and compare transcripts.
    Replay {
        ledger: PathBuf,
        #[command(flatten)]
        workload: WorkloadArgs,
    },
    /// Synthetic scalability run over chained calc tasks.
    Stress(StressArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClockMode {
    Logical,
    Wall,
}

#[derive(Debug, Args)]
pub struct WorkloadArgs {
    /// Task files (`.task.json`).
    #[arg(required = true)]
    pub tasks: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Environment seed; overrides the seed of `--env`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "max-steps", default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: u32,
    /// Reflex rule file (`.reflex.json`).
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Strategy file; loaded when present and rewritten on exit by `run`.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Environment config (`.env.json`).
    #[arg(long)]
    pub env: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub workload: WorkloadArgs,
    #[arg(long, default_value = DEFAULT_LEDGER_PATH)]
    pub ledger: PathBuf,
    #[arg(long, value_enum, default_value_t = ClockMode::Logical)]
    pub clock: ClockMode,
    /// Also write the journal here.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StressArgs {
    #[arg(long)]
    pub tasks: usize,
    #[arg(long)]
    pub subtasks: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "max-steps", default_value_t = DEFAULT_MAX_STEPS)]
    pub max_steps: u32,
    #[arg(long, value_enum, default_value_t = ClockMode::Logical)]
    pub clock: ClockMode,
    /// Write the stress ledger here.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
}

/// A command failure: message plus exit code.
struct Failure(i32, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, out, err),
        Command::Verify { ledger } => cmd_verify(&ledger, out),
        Command::Journal { ledger, output } => cmd_journal(&ledger, output.as_deref(), out),
        Command::Replay { ledger, workload } => cmd_replay(&ledger, &workload, out),
        Command::Stress(args) => cmd_stress(&args, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "workstate: {msg}");
            code
        }
    }
}

fn clock_for(mode: ClockMode) -> Arc<dyn Clock> {
    match mode {
        ClockMode::Logical => Arc::new(LogicalClock::new()),
        ClockMode::Wall => Arc::new(WallClock),
    }
}

struct Prepared {
    workload: Workload,
    strategy: StrategyState,
}

fn prepare(args: &WorkloadArgs) -> Result<Prepared, Failure> {
    if args.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    if args.max_steps == 0 {
        return Err(usage("--max-steps must be at least 1"));
    }
    let tasks = args
        .tasks
        .iter()
        .map(|p| Task::load(p).map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let rules: Vec<ReflexRule> = match &args.rules {
        Some(path) => load_rules(path).map_err(|e| usage(format!("{}: {e}", path.display())))?,
        None => Vec::new(),
    };
    let mut env = match &args.env {
        Some(path) => EnvConfig::load(path).map_err(|e| usage(e.to_string()))?,
        None => EnvConfig::default(),
    };
    if let Some(seed) = args.seed {
        env.seed = seed;
    }
    env.flaky_fail_count().map_err(|e| usage(e.to_string()))?;
    let strategy = match &args.strategy {
        Some(path) if path.exists() => StrategyState::load(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?,
        _ => StrategyState::default(),
    };
    Ok(Prepared {
        workload: Workload {
            tasks,
            rules,
            env,
            settings: RunSettings {
                max_steps: args.max_steps,
                max_revisions: DEFAULT_MAX_REVISIONS,
            },
            workers: args.workers,
        },
        strategy,
    })
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut buf = BufWriter::new(file);
    write(&mut buf)
        .and_then(|_| buf.flush())
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let prepared = prepare(&args.workload)?;
    let strategy = Mutex::new(prepared.strategy);
    let result = run_workload_with(&prepared.workload, clock_for(args.clock), &strategy)
        .map_err(|e| usage(e.to_string()))?;

    let snapshot = result.ledger.snapshot();
    write_file(&args.ledger, |w| export(&snapshot, w))?;

    let mut code = EXIT_OK;
    for (task, report) in prepared.workload.tasks.iter().zip(&result.reports) {
        match report {
            Ok(report) => {
                let _ = writeln!(out, "{}", report.summary_line());
                if report.final_phase != crate::ledger::Phase::Completed {
                    code = EXIT_DOMAIN;
                }
            }
            Err(e) => {
                let _ = writeln!(err, "{} error: {e}", task.id);
                code = EXIT_DOMAIN;
            }
        }
    }

    if let Some(path) = &args.workload.strategy {
        let state = strategy.into_inner().unwrap_or_else(|e| e.into_inner());
        state
            .save(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &args.output {
        let doc = render_journal(&snapshot).map_err(|e| Failure(EXIT_DOMAIN, e.to_string()))?;
        write_file(path, |w| w.write_all(doc.as_bytes()))?;
    }
    Ok(code)
}

fn read_entries(path: &Path) -> Result<Vec<LedgerEntry>, Failure> {
    let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_entries(BufReader::new(file)).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_verify(path: &Path, out: &mut dyn Write) -> CmdResult {
    let entries = read_entries(path)?;
    let report = verify_chain(&entries);
    match (report.first_bad_index, report.reason) {
        (Some(index), Some(reason)) => {
            let _ = writeln!(out, "INVALID at {index}: {reason}");
            Ok(EXIT_DOMAIN)
        }
        _ => {
            let head = entries
                .last()
                .map_or(crate::ledger::GENESIS_HASH, |e| e.entry_hash.as_str());
            let _ = writeln!(out, "VALID {} entries head={head}", entries.len());
            Ok(EXIT_OK)
        }
    }
}

fn cmd_journal(path: &Path, output: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let entries = read_entries(path)?;
    let doc = match render_journal(&entries) {
        Ok(doc) => doc,
        Err(e @ NotesError::ChainInvalid { .. }) => return Err(Failure(EXIT_DOMAIN, e.to_string())),
        Err(e) => return Err(usage(e.to_string())),
    };
    match output {
        Some(path) => write_file(path, |w| w.write_all(doc.as_bytes()))?,
        None => out
            .write_all(doc.as_bytes())
            .map_err(|e| usage(e.to_string()))?,
    }
    Ok(EXIT_OK)
}

/// Whether every timestamp is what the logical clock would have produced.
pub fn is_logical_clock_ledger(entries: &[LedgerEntry]) -> bool {
    entries
        .iter()
        .all(|e| e.timestamp == logical_timestamp(e.seq))
}

fn cmd_replay(path: &Path, args: &WorkloadArgs, out: &mut dyn Write) -> CmdResult {
    let recorded = read_entries(path)?;
    let report = verify_chain(&recorded);
    if let (Some(index), Some(reason)) = (report.first_bad_index, report.reason) {
        let _ = writeln!(out, "INVALID at {index}: {reason}");
        return Ok(EXIT_DOMAIN);
    }
    if !is_logical_clock_ledger(&recorded) {
        return Err(usage("ledger was not recorded with the logical clock; replay needs --clock logical"));
    }
    let prepared = prepare(args)?;
    let mut recorded_tasks = task_ids(&recorded);
    let mut given: Vec<String> = prepared.workload.tasks.iter().map(|t| t.id.clone()).collect();
    recorded_tasks.sort();
    given.sort();
    if recorded_tasks != given {
        return Err(usage(format!(
            "config mismatch: ledger records tasks {recorded_tasks:?}, task files give {given:?}"
        )));
    }
    let result = run_workload_with(
        &prepared.workload,
        Arc::new(LogicalClock::new()),
        &Mutex::new(prepared.strategy),
    )
    .map_err(|e| usage(e.to_string()))?;
    match first_divergence(&recorded, &result.ledger.snapshot()) {
        None => {
            let _ = writeln!(out, "REPLAY MATCH tasks={} entries={}", given.len(), recorded.len());
            Ok(EXIT_OK)
        }
        Some(d) => {
            let _ = writeln!(out, "REPLAY DIVERGED {d}");
            Ok(EXIT_DOMAIN)
        }
    }
}

fn cmd_stress(args: &StressArgs, out: &mut dyn Write) -> CmdResult {
    if args.tasks == 0 || args.subtasks == 0 || args.workers == 0 {
        return Err(usage("--tasks, --subtasks and --workers must all be at least 1"));
    }
    if args.max_steps == 0 {
        return Err(usage("--max-steps must be at least 1"));
    }
    let settings = RunSettings {
        max_steps: args.max_steps,
        max_revisions: DEFAULT_MAX_REVISIONS,
    };
    let report = run_stress(
        args.tasks,
        args.subtasks,
        args.workers,
        args.seed,
        settings,
        clock_for(args.clock),
    )
    .map_err(|e| usage(e.to_string()))?;
    let _ = writeln!(out, "{}", report.line());
    if let Some(path) = &args.ledger {
        let snapshot = report.ledger.snapshot();
        write_file(path, |w| export(&snapshot, w))?;
    }
    if !report.chain_valid {
        let _ = writeln!(out, "INVALID chain after stress run");
        return Ok(EXIT_DOMAIN);
    }
    Ok(if report.all_completed { EXIT_OK } else { EXIT_DOMAIN })
}
