use std::collections::BTreeMap;

use serde_json::Value;

use super::entry::{EntryKind, LedgerEntry};
use super::LedgerError;
use crate::task_model::SubtaskStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Received,
    Planned,
    Executing,
    Completed,
    Aborted,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Received => "Received",
            Phase::Planned => "Planned",
            Phase::Executing => "Executing",
            Phase::Completed => "Completed",
            Phase::Aborted => "Aborted",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub steps_taken: u64,
    pub reflexes_fired: u64,
    pub revisions: u64,
}

/// Work state of one task, as reconstructed from the ledger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkStateView {
    pub task_id: String,
    pub phase: Phase,
    pub plan_version: Option<u64>,
    pub subtask_statuses: BTreeMap<String, SubtaskStatus>,
    pub counters: WorkCounters,
}

impl WorkStateView {
    fn new(task_id: &str) -> Self {
        WorkStateView {
            task_id: task_id.to_string(),
            phase: Phase::Received,
            plan_version: None,
            subtask_statuses: BTreeMap::new(),
            counters: WorkCounters::default(),
        }
    }

    /// Applies one entry of this task.
    fn apply(&mut self, entry: &LedgerEntry) {
        let subtask = entry.payload_str("subtask_id").map(str::to_string);
        match entry.kind {
            EntryKind::TaskReceived => self.phase = Phase::Received,
            EntryKind::PlanCreated => {
                self.phase = Phase::Planned;
                self.plan_version = entry.payload_u64("plan_version");
                if let Some(Value::Array(subtasks)) = entry.payload.get("subtasks") {
                    for st in subtasks {
                        if let Some(id) = st.get("id").and_then(Value::as_str) {
                            self.subtask_statuses
                                .insert(id.to_string(), SubtaskStatus::Pending);
                        }
                    }
                }
            }
            EntryKind::PlanRevised => {
                self.plan_version = entry.payload_u64("plan_version");
                self.counters.revisions += 1;
                if let Some(Value::Array(ids)) = entry.payload.get("changed_subtasks") {
                    for id in ids.iter().filter_map(Value::as_str) {
                        self.subtask_statuses
                            .insert(id.to_string(), SubtaskStatus::Pending);
                    }
                }
            }
            EntryKind::ActionDispatched => {
                if self.phase == Phase::Planned {
                    self.phase = Phase::Executing;
                }
                self.counters.steps_taken += 1;
                if let Some(id) = subtask {
                    self.subtask_statuses.insert(id, SubtaskStatus::Running);
                }
            }
            EntryKind::ReflexTriggered => self.counters.reflexes_fired += 1,
            EntryKind::SubtaskCompleted => {
                if let Some(id) = subtask {
                    self.subtask_statuses.insert(id, SubtaskStatus::Done);
                }
            }
            EntryKind::SubtaskFailed => {
                if let Some(id) = subtask {
                    self.subtask_statuses.insert(id, SubtaskStatus::Failed);
                }
            }
            EntryKind::TaskCompleted => self.phase = Phase::Completed,
            EntryKind::TaskAborted => self.phase = Phase::Aborted,
            EntryKind::ThoughtRecorded
            | EntryKind::ObservationRecorded
            | EntryKind::FeedbackFused => {}
        }
    }
}

/// Folds every entry carrying `task_id`, in seq order.
pub fn reconstruct_state<E: AsRef<LedgerEntry>>(
    entries: &[E],
    task_id: &str,
) -> Result<WorkStateView, LedgerError> {
    let mut view: Option<WorkStateView> = None;
    for entry in entries.iter().map(AsRef::as_ref) {
        if entry.task_id == task_id {
            view.get_or_insert_with(|| WorkStateView::new(task_id))
                .apply(entry);
        }
    }
    view.ok_or_else(|| LedgerError::TaskNotFound(task_id.to_string()))
}

/// Task ids in order of first appearance.
pub fn task_ids<E: AsRef<LedgerEntry>>(entries: &[E]) -> Vec<String> {
    let mut seen = Vec::<String>::new();
    for entry in entries.iter().map(AsRef::as_ref) {
        if !seen.contains(&entry.task_id) {
            seen.push(entry.task_id.clone());
        }
    }
    seen
}
