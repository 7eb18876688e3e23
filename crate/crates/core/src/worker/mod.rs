//! Task lifecycle: plan, dispatch ready subtasks, fuse feedback, revise or
//! abort on failure. [`run_concurrent`] drives a pool of workers over a
//! shared ledger.
//!
//! Every task plans and fuses against its own copy of the strategy the run
//! started with, so a task's ledger transcript does not depend on which
//! other tasks finished first. The shared strategy still receives every
//! feedback record, one locked read-modify-write each, and is what the next
//! run starts from.

mod pool;
mod strategy;

use std::sync::{Mutex, PoisonError};

use serde_json::{json, Value};

use crate::executor::{execute_subtask, ExecError, LedgerRecorder, ReflexRule, SubtaskOutcome};
use crate::ledger::{Draft, EntryKind, Ledger, LedgerError, Payload, Phase};
use crate::planner::{FailureContext, PlanError, Reasoner, RevisionOutcome};
use crate::simenv::{EnvError, Environment};
use crate::task_model::{ready_set, topological_order, Plan, SubtaskStatus, Task, ValidationError};

pub use pool::{run_concurrent, PoolConfig};
pub use strategy::{
    fuse_feedback, FeedbackRecord, FusionUpdate, StrategyFileError, StrategyState, DEFAULT_ALPHA,
    PRIOR_STEP_ESTIMATE, PRIOR_SUCCESS_RATE,
};

pub const DEFAULT_MAX_REVISIONS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorkerError {
    #[error("task validation failed: {0}")]
    ValidationFailed(String),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("executor: {0}")]
    Executor(#[from] ExecError),
    #[error("environment: {0}")]
    Environment(#[from] EnvError),
    #[error("at least one worker is required")]
    NoWorkers,
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error("worker thread panicked while running `{0}`")]
    Panicked(String),
}

impl From<ValidationError> for WorkerError {
    fn from(e: ValidationError) -> Self {
        WorkerError::ValidationFailed(e.to_string())
    }
}

impl From<PlanError> for WorkerError {
    fn from(e: PlanError) -> Self {
        WorkerError::ValidationFailed(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSettings {
    pub max_steps: u32,
    pub max_revisions: u32,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            max_steps: crate::executor::DEFAULT_MAX_STEPS,
            max_revisions: DEFAULT_MAX_REVISIONS,
        }
    }
}

/// Everything a worker needs besides its own environment.
pub struct RunDeps<'a> {
    pub ledger: &'a Ledger,
    pub reasoner: &'a dyn Reasoner,
    pub rules: &'a [ReflexRule],
    /// Strategy every task of this run plans from.
    pub baseline: &'a StrategyState,
    /// Strategy accumulating all feedback of the run.
    pub shared: &'a Mutex<StrategyState>,
    pub settings: RunSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskReport {
    pub task_id: String,
    /// `Completed` or `Aborted`.
    pub final_phase: Phase,
    pub plan_versions: u32,
    pub outcomes: Vec<SubtaskOutcome>,
    pub entries_appended: u64,
    pub steps_taken: u64,
    pub reflexes_fired: u64,
}

impl TaskReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{} {} steps={} reflexes={} versions={}",
            self.task_id, self.final_phase, self.steps_taken, self.reflexes_fired, self.plan_versions
        )
    }
}

fn object(value: Value) -> Payload {
    match value {
        Value::Object(map) => map,
        _ => unreachable!("json! object literal"),
    }
}

pub fn plan_payload(plan: &Plan) -> Payload {
    let subtasks: Vec<Value> = plan
        .subtasks
        .iter()
        .map(|s| {
            json!({
                "id": s.id,
                "description": s.description,
                "tool": s.tool,
                "depends_on": s.depends_on,
                "estimated_steps": s.estimated_steps,
            })
        })
        .collect();
    object(json!({"plan_version": plan.version, "subtasks": subtasks}))
}

struct TaskLog<'a> {
    ledger: &'a Ledger,
    worker_id: &'a str,
    task_id: &'a str,
    appended: u64,
}

impl TaskLog<'_> {
    fn append(&mut self, kind: EntryKind, payload: Value) -> Result<(), WorkerError> {
        self.append_payload(kind, object(payload))
    }

    fn append_payload(&mut self, kind: EntryKind, payload: Payload) -> Result<(), WorkerError> {
        self.ledger
            .append(Draft::new(self.worker_id, self.task_id, kind, payload))?;
        self.appended += 1;
        Ok(())
    }
}

/// Runs one task to completion or abortion, recording every event.
pub fn run_task(
    task: &Task,
    worker_id: &str,
    env: &mut Environment,
    deps: &RunDeps<'_>,
) -> Result<TaskReport, WorkerError> {
    let settings = deps.settings;
    let mut log = TaskLog {
        ledger: deps.ledger,
        worker_id,
        task_id: &task.id,
        appended: 0,
    };
    log.append(EntryKind::TaskReceived, json!({"description": task.description}))?;

    task.validate()?;
    let mut strategy = deps.baseline.clone();
    let mut plan = deps
        .reasoner
        .propose_plan(task, &strategy, &env.tool_names())?;
    log.append_payload(EntryKind::PlanCreated, plan_payload(&plan))?;

    let mut report = TaskReport {
        task_id: task.id.clone(),
        final_phase: Phase::Aborted,
        plan_versions: plan.version,
        outcomes: Vec::new(),
        entries_appended: 0,
        steps_taken: 0,
        reflexes_fired: 0,
    };
    let mut revisions = 0u32;
    let mut abort_reason: Option<String> = None;

    'rounds: loop {
        let ready = ready_set(&plan);
        if ready.is_empty() {
            break;
        }
        let order: Vec<String> = topological_order(&plan)
            .into_iter()
            .filter(|id| ready.contains(id))
            .collect();
        for id in order {
            let subtask = {
                let st = plan.subtask_mut(&id).expect("ready ids come from the plan");
                st.transition(SubtaskStatus::Ready).expect("pending subtask");
                st.transition(SubtaskStatus::Running).expect("ready subtask");
                st.clone()
            };
            let mut recorder = LedgerRecorder::new(deps.ledger, worker_id, &task.id);
            let outcome = execute_subtask(&subtask, env, deps.rules, settings.max_steps, &mut recorder);
            log.appended += recorder.appended;
            let outcome = outcome?;
            plan.subtask_mut(&id)
                .expect("subtask exists")
                .transition(outcome.status)
                .expect("running subtask");
            report.steps_taken += u64::from(outcome.steps_used);
            report.reflexes_fired += u64::from(outcome.reflexes_fired);

            let feedback = FeedbackRecord {
                subtask_id: id.clone(),
                tool: subtask.tool.clone(),
                success: outcome.is_done(),
                planned_steps: subtask.estimated_steps,
                actual_steps: outcome.steps_used.max(1),
            };
            let update = strategy.fuse(&feedback, settings.max_steps);
            deps.shared
                .lock()
                .unwrap_or_else(PoisonError::into_inner)
                .fuse(&feedback, settings.max_steps);
            log.append_payload(EntryKind::FeedbackFused, update.payload(&feedback))?;

            let failed = !outcome.is_done();
            let failure = FailureContext {
                subtask_id: id.clone(),
                error_class: outcome.last_error_class.clone(),
                steps_used: outcome.steps_used.max(1),
                reflexes_fired: outcome.reflexes_fired,
            };
            let reason = outcome.reason.clone();
            report.outcomes.push(outcome);
            if !failed {
                continue;
            }
            if reason == crate::executor::REASON_LEDGER_UNAVAILABLE {
                return Err(WorkerError::Ledger(LedgerError::LedgerSealed));
            }
            if revisions >= settings.max_revisions {
                abort_reason = Some(format!(
                    "revision limit ({}) reached after {id} failed",
                    settings.max_revisions
                ));
                break 'rounds;
            }
            match deps.reasoner.propose_revision(&plan, &failure, &strategy)? {
                RevisionOutcome::RevisedPlan {
                    plan: revised,
                    changed_subtasks,
                    reason,
                } => {
                    revisions += 1;
                    log.append(
                        EntryKind::PlanRevised,
                        json!({
                            "plan_version": revised.version,
                            "reason": reason,
                            "changed_subtasks": changed_subtasks,
                        }),
                    )?;
                    plan = revised;
                    report.plan_versions = plan.version;
                    continue 'rounds;
                }
                RevisionOutcome::AbortTask(reason) => {
                    abort_reason = Some(reason);
                    break 'rounds;
                }
            }
        }
    }

    if abort_reason.is_none() && plan.all_done() {
        log.append(EntryKind::TaskCompleted, json!({}))?;
        report.final_phase = Phase::Completed;
    } else {
        for st in plan.subtasks.iter_mut() {
            if st.status == SubtaskStatus::Pending {
                st.status = SubtaskStatus::Skipped;
            }
        }
        let reason = abort_reason.unwrap_or_else(|| "no runnable subtasks remain".into());
        log.append(EntryKind::TaskAborted, json!({"reason": reason}))?;
        report.final_phase = Phase::Aborted;
    }
    report.entries_appended = log.appended;
    Ok(report)
}
