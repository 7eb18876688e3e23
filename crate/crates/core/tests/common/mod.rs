#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::{json, Value};
use workstate::executor::{Reflex, ReflexRule};
use workstate::ledger::{EntryKind, LedgerEntry};
use workstate::runtime::Workload;
use workstate::simenv::EnvConfig;
use workstate::task_model::Task;

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read golden {}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
        Err(format!("{name} differs from golden at {line}"))
    }
}

pub fn task(value: Value) -> Task {
    serde_json::from_value(value).expect("test task")
}

pub fn retry(id: &str, max_retries: u32) -> ReflexRule {
    ReflexRule::new(id, 1, "transient", Reflex::Retry { max_retries })
}

/// Two tasks: `alpha` succeeds cleanly; `beta` burns its retries on a flaky
/// tool, fails, and recovers through a plan revision onto `echo`.
pub fn reference_workload() -> Workload {
    let alpha = task(json!({
        "id": "alpha",
        "description": "price a delivery route",
        "subgoals": [
            {"id": "s1", "description": "compute route cost", "args": {"expr": "2*(3+4)"}},
            {"id": "s2", "description": "store the route cost", "depends_on": ["s1"],
             "args": {"op": "put", "k": "route", "v": "14"}}
        ],
        "success_note": "route priced and stored"
    }));
    let beta = task(json!({
        "id": "beta",
        "description": "collect the upstream report",
        "subgoals": [
            {"id": "s1", "description": "pull upstream report", "tool_hint": "flaky",
             "fallback_tool": "echo", "args": {"text": "report ready"}}
        ],
        "success_note": "report collected"
    }));
    let mut w = Workload::new(vec![alpha, beta]);
    w.rules = vec![retry("r1", 2)];
    w.env = EnvConfig::with_flaky(0, 5);
    w
}

fn flaky_task(fallback: bool) -> Task {
    let mut goal = json!({"id": "s1", "description": "pull upstream report", "tool_hint": "flaky",
                          "args": {"text": "report ready"}});
    if fallback {
        goal["fallback_tool"] = json!("echo");
    }
    task(json!({"id": "gamma", "description": "collect a report", "subgoals": [goal]}))
}

/// flaky(fail_count=2) absorbed by a Retry{3} reflex.
pub fn reflex_workload() -> Workload {
    let mut w = Workload::new(vec![flaky_task(false)]);
    w.rules = vec![retry("r1", 3)];
    w.env = EnvConfig::with_flaky(0, 2);
    w
}

/// The same task with no reflexes, recovered by replanning onto `echo`.
pub fn replan_workload() -> Workload {
    let mut w = Workload::new(vec![flaky_task(true)]);
    w.env = EnvConfig::with_flaky(0, 2);
    w
}

pub fn count_kind<E: AsRef<LedgerEntry>>(entries: &[E], kind: EntryKind) -> usize {
    entries.iter().filter(|e| e.as_ref().kind == kind).count()
}

/// (actions, observations, max_steps-independent) per subtask attempt; an
/// attempt ends at SubtaskCompleted or SubtaskFailed.
pub fn attempt_counts<E: AsRef<LedgerEntry>>(entries: &[E], task_id: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut actions, mut observations) = (0, 0);
    for e in entries.iter().map(AsRef::as_ref).filter(|e| e.task_id == task_id) {
        match e.kind {
            EntryKind::ActionDispatched => actions += 1,
            EntryKind::ObservationRecorded => observations += 1,
            EntryKind::SubtaskCompleted | EntryKind::SubtaskFailed => {
                out.push((actions, observations));
                actions = 0;
                observations = 0;
            }
            _ => {}
        }
    }
    out
}

/// The feedback invariant: one fusion per finished attempt.
pub fn feedback_balanced<E: AsRef<LedgerEntry>>(entries: &[E]) -> bool {
    count_kind(entries, EntryKind::FeedbackFused)
        == count_kind(entries, EntryKind::SubtaskCompleted) + count_kind(entries, EntryKind::SubtaskFailed)
}
