//! Whole-run helpers shared by the CLI and the test suites: running a
//! workload against a fresh ledger, projecting per-task transcripts, and the
//! synthetic stress workload.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde_json::{json, Map};

use crate::executor::ReflexRule;
use crate::ledger::{task_ids, Clock, EntryKind, Ledger, LedgerEntry, LogicalClock, Payload, Phase};
use crate::planner::RulePlanner;
use crate::simenv::EnvConfig;
use crate::task_model::{SubgoalSpec, Task};
use crate::worker::{run_concurrent, PoolConfig, RunSettings, StrategyState, TaskReport, WorkerError};

/// A complete, reproducible description of a run.
#[derive(Debug, Clone)]
pub struct Workload {
    pub tasks: Vec<Task>,
    pub rules: Vec<ReflexRule>,
    pub env: EnvConfig,
    pub settings: RunSettings,
    pub workers: usize,
}

impl Workload {
    pub fn new(tasks: Vec<Task>) -> Self {
        Workload {
            tasks,
            rules: Vec::new(),
            env: EnvConfig::default(),
            settings: RunSettings::default(),
            workers: 1,
        }
    }
}

pub struct RunResult {
    pub ledger: Ledger,
    pub reports: Vec<Result<TaskReport, WorkerError>>,
}

impl RunResult {
    pub fn all_completed(&self) -> bool {
        self.reports
            .iter()
            .all(|r| matches!(r, Ok(rep) if rep.final_phase == Phase::Completed))
    }
}

/// Runs `workload` into a new ledger driven by `clock`, fusing feedback into
/// `strategy`.
pub fn run_workload_with(
    workload: &Workload,
    clock: Arc<dyn Clock>,
    strategy: &Mutex<StrategyState>,
) -> Result<RunResult, WorkerError> {
    let ledger = Ledger::new(clock);
    let planner = RulePlanner::new(workload.settings.max_steps);
    let reports = run_concurrent(
        &workload.tasks,
        workload.workers,
        &PoolConfig {
            ledger: &ledger,
            reasoner: &planner,
            rules: &workload.rules,
            env: &workload.env,
            strategy,
            settings: workload.settings,
        },
    )?;
    Ok(RunResult { ledger, reports })
}

/// Logical clock, fresh default strategy.
pub fn run_workload(workload: &Workload) -> Result<RunResult, WorkerError> {
    run_workload_with(
        workload,
        Arc::new(LogicalClock::new()),
        &Mutex::new(StrategyState::default()),
    )
}

/// The entries of `task_id` reduced to kind and payload, in seq order.
pub fn projected_transcript<E: AsRef<LedgerEntry>>(
    entries: &[E],
    task_id: &str,
) -> Vec<(EntryKind, Payload)> {
    entries
        .iter()
        .map(AsRef::as_ref)
        .filter(|e| e.task_id == task_id)
        .map(|e| (e.kind, e.payload.clone()))
        .collect()
}

/// One line per entry: `<kind> <canonical payload>`.
pub fn transcript_text<E: AsRef<LedgerEntry>>(entries: &[E], task_id: &str) -> String {
    projected_transcript(entries, task_id)
        .into_iter()
        .map(|(kind, payload)| format!("{kind} {}\n", serde_json::Value::Object(payload)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub task_id: String,
    /// Seq of the first differing entry in the expected ledger, if it has one.
    pub expected_seq: Option<u64>,
    pub expected_kind: Option<EntryKind>,
    pub actual_kind: Option<EntryKind>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |k: Option<EntryKind>| k.map_or("end".to_string(), |k| k.to_string());
        write!(
            f,
            "task={} index={} expected={} actual={}",
            self.task_id,
            self.expected_seq.map_or("end".to_string(), |s| s.to_string()),
            opt(self.expected_kind),
            opt(self.actual_kind)
        )
    }
}

/// First point where the per-task projected transcripts differ, taking tasks
/// in the expected ledger's order of first appearance.
pub fn first_divergence<A: AsRef<LedgerEntry>, B: AsRef<LedgerEntry>>(
    expected: &[A],
    actual: &[B],
) -> Option<Divergence> {
    let mut tasks = task_ids(expected);
    for t in task_ids(actual) {
        if !tasks.contains(&t) {
            tasks.push(t);
        }
    }
    for task_id in tasks {
        let want: Vec<&LedgerEntry> = expected
            .iter()
            .map(AsRef::as_ref)
            .filter(|e| e.task_id == task_id)
            .collect();
        let got: Vec<&LedgerEntry> = actual
            .iter()
            .map(AsRef::as_ref)
            .filter(|e| e.task_id == task_id)
            .collect();
        for i in 0..want.len().max(got.len()) {
            let (w, g) = (want.get(i), got.get(i));
            let same = match (w, g) {
                (Some(w), Some(g)) => w.kind == g.kind && w.payload == g.payload,
                _ => false,
            };
            if !same {
                return Some(Divergence {
                    task_id,
                    expected_seq: w.map(|e| e.seq),
                    expected_kind: w.map(|e| e.kind),
                    actual_kind: g.map(|e| e.kind),
                });
            }
        }
    }
    None
}

/// `n` tasks of `m` chained calc subtasks each.
pub fn stress_tasks(n: usize, m: usize, seed: u64) -> Vec<Task> {
    let factor = seed % 97 + 1;
    (0..n)
        .map(|i| Task {
            id: format!("stress-{i:05}"),
            description: format!("synthetic chained calculation {i}"),
            subgoals: (1..=m)
                .map(|j| {
                    let mut args = Map::new();
                    args.insert("expr".into(), json!(format!("{i}+{j}*{factor}")));
                    SubgoalSpec {
                        id: format!("c{j}"),
                        description: format!("compute partial sum {j}"),
                        tool_hint: Some("calc".into()),
                        args,
                        depends_on: if j == 1 { vec![] } else { vec![format!("c{}", j - 1)] },
                        fallback_tool: None,
                    }
                })
                .collect(),
            success_note: "all partial sums computed".into(),
        })
        .collect()
}

#[derive(Debug)]
pub struct StressReport {
    pub tasks: usize,
    pub subtasks: usize,
    pub workers: usize,
    pub entries: usize,
    pub wall_ms: u128,
    pub throughput: f64,
    pub all_completed: bool,
    pub chain_valid: bool,
    pub ledger: Ledger,
}

impl StressReport {
    pub fn line(&self) -> String {
        format!(
            "STRESS tasks={} subtasks={} workers={} entries={} wall_ms={} throughput={:.1}",
            self.tasks, self.subtasks, self.workers, self.entries, self.wall_ms, self.throughput
        )
    }
}

pub fn run_stress(
    n: usize,
    m: usize,
    workers: usize,
    seed: u64,
    settings: RunSettings,
    clock: Arc<dyn Clock>,
) -> Result<StressReport, WorkerError> {
    let mut workload = Workload::new(stress_tasks(n, m, seed));
    workload.env = EnvConfig::with_seed(seed);
    workload.settings = settings;
    workload.workers = workers;
    let started = Instant::now();
    let result = run_workload_with(&workload, clock, &Mutex::new(StrategyState::default()))?;
    let elapsed = started.elapsed();
    let subtasks = n * m;
    let secs = elapsed.as_secs_f64().max(1e-9);
    let chain_valid = result.ledger.verify().valid;
    Ok(StressReport {
        tasks: n,
        subtasks,
        workers,
        entries: result.ledger.len(),
        wall_ms: elapsed.as_millis(),
        throughput: subtasks as f64 / secs,
        all_completed: result.all_completed(),
        chain_valid,
        ledger: result.ledger,
    })
}
