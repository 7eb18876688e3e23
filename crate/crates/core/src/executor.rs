//! Bounded thought → action → observation loop for one subtask.
//!
//! After a failed observation the executor consults its reflex rules before
//! taking another step. A reflex can retry the same action, swap the tool,
//! patch the arguments or give up on the subtask; it never touches the plan.
//! Each step, reflex and the final outcome are reported through a
//! [`Recorder`], whose event type only admits the six executor entry kinds.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ledger::{Draft, EntryKind, Ledger, LedgerError, Payload};
use crate::simenv::{Args, Environment, ToolResult};
use crate::task_model::{Subtask, SubtaskStatus};

pub const DEFAULT_MAX_STEPS: u32 = 8;
pub const REFLEX_EXTENSION: &str = "reflex.json";
pub const WILDCARD: &str = "*";

pub const REASON_BUDGET_EXHAUSTED: &str = "step budget exhausted";
pub const REASON_LEDGER_UNAVAILABLE: &str = "ledger unavailable";

/// Micro-strategy fired on a failed observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Reflex {
    Retry { max_retries: u32 },
    SubstituteTool { tool: String },
    AdjustArgs { patch: Map<String, Value> },
    AbortSubtask,
}

impl Reflex {
    fn label(&self, retries_used: u32) -> String {
        match self {
            Reflex::Retry { max_retries } => format!("retry {retries_used}/{max_retries}"),
            Reflex::SubstituteTool { tool } => format!("substitute_tool {tool}"),
            Reflex::AdjustArgs { patch } => {
                format!("adjust_args {}", Value::Object(patch.clone()))
            }
            Reflex::AbortSubtask => "abort_subtask".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflexRule {
    pub id: String,
    /// Lower fires first.
    pub priority: i64,
    /// Exact error class, or `"*"` for any.
    pub trigger: String,
    pub reflex: Reflex,
}

impl ReflexRule {
    pub fn new(id: impl Into<String>, priority: i64, trigger: impl Into<String>, reflex: Reflex) -> Self {
        ReflexRule {
            id: id.into(),
            priority,
            trigger: trigger.into(),
            reflex,
        }
    }

    pub fn matches(&self, error_class: &str) -> bool {
        self.trigger == WILDCARD || self.trigger == error_class
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("cannot read rule file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse rule file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate reflex rule id `{0}`")]
    DuplicateId(String),
    #[error("rule `{0}`: max_retries must be at least 1")]
    ZeroRetries(String),
    #[error("rule `{0}`: empty trigger")]
    EmptyTrigger(String),
}

pub fn validate_rules(rules: &[ReflexRule]) -> Result<(), RulesError> {
    let mut seen = BTreeSet::new();
    for rule in rules {
        if !seen.insert(rule.id.as_str()) {
            return Err(RulesError::DuplicateId(rule.id.clone()));
        }
        if rule.trigger.is_empty() {
            return Err(RulesError::EmptyTrigger(rule.id.clone()));
        }
        if matches!(rule.reflex, Reflex::Retry { max_retries: 0 }) {
            return Err(RulesError::ZeroRetries(rule.id.clone()));
        }
    }
    Ok(())
}

pub fn parse_rules(text: &str) -> Result<Vec<ReflexRule>, RulesError> {
    let rules: Vec<ReflexRule> = serde_json::from_str(text)?;
    validate_rules(&rules)?;
    Ok(rules)
}

/// Reads a `.reflex.json` file.
pub fn load_rules(path: &Path) -> Result<Vec<ReflexRule>, RulesError> {
    parse_rules(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub ok: bool,
    pub output: String,
    pub error_class: String,
}

impl From<ToolResult> for Observation {
    fn from(r: ToolResult) -> Self {
        Observation {
            ok: r.ok,
            output: r.output,
            error_class: r.error_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub tool: String,
    pub args: Args,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReActStep {
    pub step: u32,
    pub thought: String,
    pub action: Action,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtaskOutcome {
    pub subtask_id: String,
    /// `Done` or `Failed`.
    pub status: SubtaskStatus,
    pub steps_used: u32,
    pub reflexes_fired: u32,
    /// Empty when `Done`.
    pub reason: String,
    /// Error class of the last failed observation, if any.
    pub last_error_class: String,
    pub transcript: Vec<ReActStep>,
}

impl SubtaskOutcome {
    pub fn is_done(&self) -> bool {
        self.status == SubtaskStatus::Done
    }
}

/// Events the executor may record. Nothing else can reach the ledger from here.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecutorEvent {
    Thought { subtask_id: String, step: u32, text: String },
    Action { subtask_id: String, step: u32, tool: String, args: Args },
    Observation { subtask_id: String, step: u32, observation: Observation },
    Reflex { subtask_id: String, step: u32, rule_id: String, reflex: String },
    Completed { subtask_id: String, steps_used: u32 },
    Failed { subtask_id: String, steps_used: u32, reason: String },
}

impl ExecutorEvent {
    pub fn kind(&self) -> EntryKind {
        match self {
            ExecutorEvent::Thought { .. } => EntryKind::ThoughtRecorded,
            ExecutorEvent::Action { .. } => EntryKind::ActionDispatched,
            ExecutorEvent::Observation { .. } => EntryKind::ObservationRecorded,
            ExecutorEvent::Reflex { .. } => EntryKind::ReflexTriggered,
            ExecutorEvent::Completed { .. } => EntryKind::SubtaskCompleted,
            ExecutorEvent::Failed { .. } => EntryKind::SubtaskFailed,
        }
    }

    pub fn payload(&self) -> Payload {
        let value = match self {
            ExecutorEvent::Thought { subtask_id, step, text } => {
                json!({"subtask_id": subtask_id, "step": step, "text": text})
            }
            ExecutorEvent::Action { subtask_id, step, tool, args } => {
                json!({"subtask_id": subtask_id, "step": step, "tool": tool, "args": args})
            }
            ExecutorEvent::Observation { subtask_id, step, observation } => json!({
                "subtask_id": subtask_id,
                "step": step,
                "ok": observation.ok,
                "output": observation.output,
                "error_class": observation.error_class,
            }),
            ExecutorEvent::Reflex { subtask_id, step, rule_id, reflex } => {
                json!({"subtask_id": subtask_id, "step": step, "rule_id": rule_id, "reflex": reflex})
            }
            ExecutorEvent::Completed { subtask_id, steps_used } => {
                json!({"subtask_id": subtask_id, "steps_used": steps_used, "reason": ""})
            }
            ExecutorEvent::Failed { subtask_id, steps_used, reason } => {
                json!({"subtask_id": subtask_id, "steps_used": steps_used, "reason": reason})
            }
        };
        match value {
            Value::Object(map) => map,
            _ => unreachable!("json! object literal"),
        }
    }
}

/// Sink for executor events.
pub trait Recorder {
    fn record(&mut self, event: ExecutorEvent) -> Result<(), LedgerError>;
}

impl Recorder for Vec<ExecutorEvent> {
    fn record(&mut self, event: ExecutorEvent) -> Result<(), LedgerError> {
        self.push(event);
        Ok(())
    }
}

/// Appends executor events to a ledger under a fixed worker and task.
pub struct LedgerRecorder<'a> {
    pub ledger: &'a Ledger,
    pub worker_id: &'a str,
    pub task_id: &'a str,
    pub appended: u64,
}

impl<'a> LedgerRecorder<'a> {
    pub fn new(ledger: &'a Ledger, worker_id: &'a str, task_id: &'a str) -> Self {
        LedgerRecorder {
            ledger,
            worker_id,
            task_id,
            appended: 0,
        }
    }
}

impl Recorder for LedgerRecorder<'_> {
    fn record(&mut self, event: ExecutorEvent) -> Result<(), LedgerError> {
        self.ledger.append(Draft::new(
            self.worker_id,
            self.task_id,
            event.kind(),
            event.payload(),
        ))?;
        self.appended += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("tool `{0}` is not registered")]
    UnregisteredTool(String),
    #[error("max_steps must be at least 1")]
    ZeroBudget,
}

/// Highest-precedence rule that matches `observation` and still has budget.
///
/// Precedence is ascending priority, then ascending id.
pub fn apply_reflex<'r>(
    observation: &Observation,
    rules: &'r [ReflexRule],
    retries_so_far: &BTreeMap<String, u32>,
) -> Option<&'r ReflexRule> {
    rules
        .iter()
        .filter(|rule| rule.matches(&observation.error_class))
        .filter(|rule| match rule.reflex {
            Reflex::Retry { max_retries } => {
                retries_so_far.get(&rule.id).copied().unwrap_or(0) < max_retries
            }
            _ => true,
        })
        .min_by(|a, b| a.priority.cmp(&b.priority).then_with(|| a.id.cmp(&b.id)))
}

pub fn thought_text(step: u32, tool: &str, description: &str, annotation: Option<&str>) -> String {
    match annotation {
        Some(note) => format!("step {step}: invoking {tool} for {description} [{note}]"),
        None => format!("step {step}: invoking {tool} for {description}"),
    }
}

/// Runs one attempt of `subtask`.
pub fn execute_subtask(
    subtask: &Subtask,
    env: &mut Environment,
    rules: &[ReflexRule],
    max_steps: u32,
    recorder: &mut dyn Recorder,
) -> Result<SubtaskOutcome, ExecError> {
    if max_steps == 0 {
        return Err(ExecError::ZeroBudget);
    }
    if !env.has_tool(&subtask.tool) {
        return Err(ExecError::UnregisteredTool(subtask.tool.clone()));
    }

    let id = subtask.id.clone();
    let mut outcome = SubtaskOutcome {
        subtask_id: id.clone(),
        status: SubtaskStatus::Failed,
        steps_used: 0,
        reflexes_fired: 0,
        reason: String::new(),
        last_error_class: String::new(),
        transcript: Vec::new(),
    };
    let mut tool = subtask.tool.clone();
    let mut args = subtask.args.clone();
    let mut annotation: Option<String> = None;
    let mut retries: BTreeMap<String, u32> = BTreeMap::new();

    macro_rules! record {
        ($event:expr) => {
            if recorder.record($event).is_err() {
                outcome.status = SubtaskStatus::Failed;
                outcome.reason = REASON_LEDGER_UNAVAILABLE.into();
                return Ok(outcome);
            }
        };
    }

    for step in 1..=max_steps {
        outcome.steps_used = step;
        let thought = thought_text(step, &tool, &subtask.description, annotation.as_deref());
        record!(ExecutorEvent::Thought {
            subtask_id: id.clone(),
            step,
            text: thought.clone(),
        });
        record!(ExecutorEvent::Action {
            subtask_id: id.clone(),
            step,
            tool: tool.clone(),
            args: args.clone(),
        });
        let result = env
            .invoke(&tool, &args)
            .unwrap_or_else(|e| ToolResult::failure("unknown_tool", e.to_string()));
        let observation = Observation::from(result);
        record!(ExecutorEvent::Observation {
            subtask_id: id.clone(),
            step,
            observation: observation.clone(),
        });
        outcome.transcript.push(ReActStep {
            step,
            thought,
            action: Action {
                tool: tool.clone(),
                args: args.clone(),
            },
            observation: observation.clone(),
        });

        if observation.ok {
            record!(ExecutorEvent::Completed {
                subtask_id: id.clone(),
                steps_used: step,
            });
            outcome.status = SubtaskStatus::Done;
            return Ok(outcome);
        }
        outcome.last_error_class = observation.error_class.clone();

        let failure_reason = if step == max_steps {
            Some(REASON_BUDGET_EXHAUSTED.to_string())
        } else {
            match apply_reflex(&observation, rules, &retries) {
                None => Some(format!("no reflex for error class {}", observation.error_class)),
                Some(rule) => {
                    outcome.reflexes_fired += 1;
                    let used = match rule.reflex {
                        Reflex::Retry { .. } => {
                            let n = retries.entry(rule.id.clone()).or_insert(0);
                            *n += 1;
                            *n
                        }
                        _ => 0,
                    };
                    let label = rule.reflex.label(used);
                    record!(ExecutorEvent::Reflex {
                        subtask_id: id.clone(),
                        step,
                        rule_id: rule.id.clone(),
                        reflex: label.clone(),
                    });
                    annotation = Some(format!("reflex {}: {label}", rule.id));
                    match &rule.reflex {
                        Reflex::Retry { .. } => None,
                        Reflex::SubstituteTool { tool: other } => {
                            tool = other.clone();
                            None
                        }
                        Reflex::AdjustArgs { patch } => {
                            for (k, v) in patch {
                                args.insert(k.clone(), v.clone());
                            }
                            None
                        }
                        Reflex::AbortSubtask => Some(format!("aborted by reflex {}", rule.id)),
                    }
                }
            }
        };

        if let Some(reason) = failure_reason {
            record!(ExecutorEvent::Failed {
                subtask_id: id.clone(),
                steps_used: step,
                reason: reason.clone(),
            });
            outcome.reason = reason;
            return Ok(outcome);
        }
    }
    unreachable!("the last step always terminates the loop")
}
