//! Work journals: a fixed-template Markdown rendering of a verified ledger.
//!
//! Layout: an H1 title, then one H2 section per task in order of first
//! appearance, each with `Plan`, `Execution`, `Feedback` and `Outcome` H3
//! subsections. Every thought, action, observation and reflex entry shows up
//! on a line naming its subtask and step.

use std::fmt::Write as _;

use serde_json::Value;

use crate::ledger::{reconstruct_state, task_ids, verify_chain, EntryKind, LedgerEntry, Phase, Violation};

pub const JOURNAL_EXTENSION: &str = "journal.md";
pub const JOURNAL_TITLE: &str = "# Work Journal";
pub const NO_TASKS_LINE: &str = "No tasks recorded.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NotesError {
    #[error("refusing to render: chain invalid at index {index} ({reason})")]
    ChainInvalid { index: usize, reason: Violation },
    #[error("task `{0}` not found in ledger")]
    TaskNotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSummary {
    pub task_id: String,
    pub phase: Phase,
    pub plan_versions: u64,
    pub subtasks_done: u64,
    pub subtasks_failed: u64,
    pub steps_total: u64,
    pub reflexes_total: u64,
}

pub fn summarize_task<E: AsRef<LedgerEntry>>(
    entries: &[E],
    task_id: &str,
) -> Result<TaskSummary, NotesError> {
    let view = reconstruct_state(entries, task_id)
        .map_err(|_| NotesError::TaskNotFound(task_id.to_string()))?;
    let mut summary = TaskSummary {
        task_id: task_id.to_string(),
        phase: view.phase,
        plan_versions: view.plan_version.unwrap_or(0),
        subtasks_done: 0,
        subtasks_failed: 0,
        steps_total: 0,
        reflexes_total: 0,
    };
    for entry in entries.iter().map(AsRef::as_ref).filter(|e| e.task_id == task_id) {
        match entry.kind {
            EntryKind::SubtaskCompleted => summary.subtasks_done += 1,
            EntryKind::SubtaskFailed => summary.subtasks_failed += 1,
            EntryKind::ActionDispatched => summary.steps_total += 1,
            EntryKind::ReflexTriggered => summary.reflexes_total += 1,
            _ => {}
        }
    }
    Ok(summary)
}

/// Renders the journal of a ledger. Refuses chains that do not verify.
pub fn render_journal<E: AsRef<LedgerEntry>>(entries: &[E]) -> Result<String, NotesError> {
    let report = verify_chain(entries);
    if let (Some(index), Some(reason)) = (report.first_bad_index, report.reason) {
        return Err(NotesError::ChainInvalid { index, reason });
    }
    let entries: Vec<&LedgerEntry> = entries.iter().map(AsRef::as_ref).collect();

    let mut doc = String::new();
    doc.push_str(JOURNAL_TITLE);
    doc.push_str("\n\n");
    let head = entries.last().map_or(crate::ledger::GENESIS_HASH, |e| e.entry_hash.as_str());
    let _ = writeln!(doc, "Ledger: {} entries, head `{head}`.", entries.len());
    let tasks = task_ids(&entries);
    if tasks.is_empty() {
        doc.push('\n');
        doc.push_str(NO_TASKS_LINE);
        doc.push('\n');
        return Ok(doc);
    }
    for task_id in tasks {
        let own: Vec<&LedgerEntry> = entries.iter().copied().filter(|e| e.task_id == task_id).collect();
        render_task(&mut doc, &task_id, &own);
    }
    Ok(doc)
}

fn text(entry: &LedgerEntry, key: &str) -> String {
    match entry.payload.get(key) {
        Some(Value::String(s)) => inline(s),
        Some(other) => other.to_string(),
        None => "?".into(),
    }
}

fn number(entry: &LedgerEntry, key: &str) -> String {
    entry
        .payload
        .get(key)
        .and_then(Value::as_f64)
        .map_or_else(|| "?".into(), |v| format!("{v:.4}"))
}

/// Keeps one record on one line.
fn inline(s: &str) -> String {
    s.replace('\r', "\\r").replace('\n', "\\n")
}

#[derive(Default)]
struct PendingStep {
    subtask: String,
    step: String,
    thought: Option<String>,
    action: Option<String>,
}

impl PendingStep {
    fn line(&self, observation: Option<String>) -> String {
        format!(
            "- `{}` step {}: Thought: {} → Action: {} → Observation: {}\n",
            self.subtask,
            self.step,
            self.thought.as_deref().unwrap_or("(none)"),
            self.action.as_deref().unwrap_or("(none)"),
            observation.as_deref().unwrap_or("(none)"),
        )
    }
}

fn render_task(doc: &mut String, task_id: &str, entries: &[&LedgerEntry]) {
    let phase = reconstruct_state(entries, task_id)
        .map(|v| v.phase)
        .unwrap_or(Phase::Received);
    let _ = write!(doc, "\n## Task `{task_id}`: {phase}\n\n");
    let description = entries
        .iter()
        .find(|e| e.kind == EntryKind::TaskReceived)
        .map_or_else(|| "?".to_string(), |e| text(e, "description"));
    let _ = writeln!(doc, "Description: {description}");

    doc.push_str("\n### Plan\n\n");
    let mut any_plan = false;
    for entry in entries {
        match entry.kind {
            EntryKind::PlanCreated => {
                any_plan = true;
                let _ = writeln!(doc, "- Version {}:", text(entry, "plan_version"));
                let subtasks = entry.payload.get("subtasks").and_then(Value::as_array);
                for st in subtasks.into_iter().flatten() {
                    let field = |k: &str| match st.get(k) {
                        Some(Value::String(s)) => inline(s),
                        Some(v) => v.to_string(),
                        None => "?".into(),
                    };
                    let deps: Vec<String> = st
                        .get("depends_on")
                        .and_then(Value::as_array)
                        .into_iter()
                        .flatten()
                        .map(|d| format!("`{}`", d.as_str().unwrap_or("?")))
                        .collect();
                    let deps = if deps.is_empty() { "none".to_string() } else { deps.join(", ") };
                    let _ = writeln!(
                        doc,
                        "  - `{}` via `{}`, depends on {deps}, estimated steps {}: {}",
                        field("id"),
                        field("tool"),
                        field("estimated_steps"),
                        field("description"),
                    );
                }
            }
            EntryKind::PlanRevised => {
                any_plan = true;
                let changed: Vec<String> = entry
                    .payload
                    .get("changed_subtasks")
                    .and_then(Value::as_array)
                    .into_iter()
                    .flatten()
                    .map(|d| format!("`{}`", d.as_str().unwrap_or("?")))
                    .collect();
                let _ = writeln!(
                    doc,
                    "- Version {} (revised, changed {}): {}",
                    text(entry, "plan_version"),
                    if changed.is_empty() { "nothing".to_string() } else { changed.join(", ") },
                    text(entry, "reason"),
                );
            }
            _ => {}
        }
    }
    if !any_plan {
        doc.push_str("No plan recorded.\n");
    }

    doc.push_str("\n### Execution\n\n");
    let mut any_exec = false;
    let mut pending: Option<PendingStep> = None;
    let flush = |doc: &mut String, pending: &mut Option<PendingStep>| {
        if let Some(p) = pending.take() {
            doc.push_str(&p.line(None));
        }
    };
    for entry in entries {
        let key = || (text(entry, "subtask_id"), text(entry, "step"));
        match entry.kind {
            EntryKind::ThoughtRecorded => {
                any_exec = true;
                flush(doc, &mut pending);
                let (subtask, step) = key();
                pending = Some(PendingStep {
                    subtask,
                    step,
                    thought: Some(text(entry, "text")),
                    action: None,
                });
            }
            EntryKind::ActionDispatched => {
                any_exec = true;
                let (subtask, step) = key();
                let action = format!(
                    "`{}` {}",
                    text(entry, "tool"),
                    entry.payload.get("args").map_or_else(|| "?".into(), Value::to_string)
                );
                match pending.as_mut() {
                    Some(p) if p.subtask == subtask && p.step == step && p.action.is_none() => {
                        p.action = Some(action)
                    }
                    _ => {
                        flush(doc, &mut pending);
                        pending = Some(PendingStep {
                            subtask,
                            step,
                            thought: None,
                            action: Some(action),
                        });
                    }
                }
            }
            EntryKind::ObservationRecorded => {
                any_exec = true;
                let (subtask, step) = key();
                let ok = entry.payload.get("ok").and_then(Value::as_bool);
                let observation = match ok {
                    Some(true) => format!("ok, output \"{}\"", text(entry, "output")),
                    _ => format!(
                        "failed [{}], output \"{}\"",
                        text(entry, "error_class"),
                        text(entry, "output")
                    ),
                };
                let current = match pending.take() {
                    Some(p) if p.subtask == subtask && p.step == step => p,
                    other => {
                        if let Some(p) = other {
                            doc.push_str(&p.line(None));
                        }
                        PendingStep {
                            subtask,
                            step,
                            ..Default::default()
                        }
                    }
                };
                doc.push_str(&current.line(Some(observation)));
            }
            EntryKind::ReflexTriggered => {
                any_exec = true;
                flush(doc, &mut pending);
                let (subtask, step) = key();
                let _ = writeln!(
                    doc,
                    "  - Reflex `{}` after `{subtask}` step {step}: {}",
                    text(entry, "rule_id"),
                    text(entry, "reflex"),
                );
            }
            EntryKind::SubtaskCompleted => {
                any_exec = true;
                flush(doc, &mut pending);
                let _ = writeln!(
                    doc,
                    "- `{}` completed after {} step(s).",
                    text(entry, "subtask_id"),
                    text(entry, "steps_used"),
                );
            }
            EntryKind::SubtaskFailed => {
                any_exec = true;
                flush(doc, &mut pending);
                let _ = writeln!(
                    doc,
                    "- `{}` failed after {} step(s): {}.",
                    text(entry, "subtask_id"),
                    text(entry, "steps_used"),
                    text(entry, "reason"),
                );
            }
            _ => {}
        }
    }
    flush(doc, &mut pending);
    if !any_exec {
        doc.push_str("No steps recorded.\n");
    }

    doc.push_str("\n### Feedback\n\n");
    let mut any_feedback = false;
    for entry in entries.iter().filter(|e| e.kind == EntryKind::FeedbackFused) {
        any_feedback = true;
        let _ = writeln!(
            doc,
            "- `{}` via `{}`: success rate {} → {}, step estimate {} → {}",
            text(entry, "subtask_id"),
            text(entry, "tool"),
            number(entry, "old_rate"),
            number(entry, "new_rate"),
            number(entry, "old_estimate"),
            number(entry, "new_estimate"),
        );
    }
    if !any_feedback {
        doc.push_str("No feedback recorded.\n");
    }

    doc.push_str("\n### Outcome\n\n");
    let outcome = match entries.iter().rev().find(|e| {
        matches!(e.kind, EntryKind::TaskCompleted | EntryKind::TaskAborted)
    }) {
        Some(e) if e.kind == EntryKind::TaskCompleted => "Completed.".to_string(),
        Some(e) => format!("Aborted: {}.", text(e, "reason")),
        None => format!("In progress ({phase})."),
    };
    doc.push_str(&outcome);
    doc.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Ledger;

    #[test]
    fn empty_ledger_journal() {
        let doc = render_journal(&Ledger::default().snapshot()).unwrap();
        assert_eq!(
            doc,
            format!(
                "# Work Journal\n\nLedger: 0 entries, head `{}`.\n\nNo tasks recorded.\n",
                "0".repeat(64)
            )
        );
    }

    #[test]
    fn unknown_task_summary() {
        assert_eq!(
            summarize_task(&Ledger::default().snapshot(), "x"),
            Err(NotesError::TaskNotFound("x".into()))
        );
    }

    #[test]
    fn newlines_are_escaped() {
        assert_eq!(inline("a\nb"), "a\\nb");
    }
}
