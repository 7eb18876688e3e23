//! Plan synthesis and revision.
//!
//! [`Reasoner`] is the contract the worker plans through; [`RulePlanner`] is
//! the deterministic implementation used by the runtime. It copies the
//! task's subgoal DAG verbatim, binds each subgoal to a tool, and on failure
//! either rebinds the failed subtask to its declared fallback or gives up.

use std::collections::BTreeSet;

use crate::task_model::{validate_plan, Plan, Subtask, SubtaskStatus, Task, ValidationError};
use crate::worker::StrategyState;

pub const DEFAULT_STEP_ESTIMATE: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("unknown subtask `{0}`")]
    UnknownSubtask(String),
    #[error("subtask `{0}` has not failed")]
    NotFailed(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Context of the failure that triggered a revision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureContext {
    pub subtask_id: String,
    pub error_class: String,
    pub steps_used: u32,
    pub reflexes_fired: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RevisionOutcome {
    RevisedPlan {
        plan: Plan,
        changed_subtasks: Vec<String>,
        reason: String,
    },
    AbortTask(String),
}

/// Planning contract. Implementations must be deterministic in their inputs.
pub trait Reasoner: Send + Sync {
    fn propose_plan(
        &self,
        task: &Task,
        strategy: &StrategyState,
        tools: &BTreeSet<String>,
    ) -> Result<Plan, PlanError>;

    fn propose_revision(
        &self,
        plan: &Plan,
        failure: &FailureContext,
        strategy: &StrategyState,
    ) -> Result<RevisionOutcome, PlanError>;
}

/// Keyword binding for subgoals without a tool hint.
pub fn bind_tool(description: &str) -> &'static str {
    let text = description.to_lowercase();
    if ["compute", "calculate"].iter().any(|k| text.contains(k)) {
        "calc"
    } else if ["store", "save", "fetch"].iter().any(|k| text.contains(k)) {
        "kvstore"
    } else {
        "echo"
    }
}

/// `clamp(round_half_even(estimate), 1, max_steps)`, or the default when the
/// strategy has no estimate for `tool`.
pub fn estimated_steps(strategy: &StrategyState, tool: &str, max_steps: u32) -> u32 {
    let max_steps = max_steps.max(1);
    match strategy.step_estimate(tool) {
        Some(estimate) => (estimate.round_ties_even() as i64).clamp(1, i64::from(max_steps)) as u32,
        None => DEFAULT_STEP_ESTIMATE.clamp(1, max_steps),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RulePlanner {
    pub max_steps: u32,
}

impl RulePlanner {
    pub fn new(max_steps: u32) -> Self {
        RulePlanner { max_steps }
    }

    /// Version-1 plan with one subtask per subgoal.
    pub fn plan(
        &self,
        task: &Task,
        strategy: &StrategyState,
        tools: &BTreeSet<String>,
    ) -> Result<Plan, PlanError> {
        let known = |name: &str| -> Result<(), PlanError> {
            if tools.contains(name) {
                Ok(())
            } else {
                Err(PlanError::UnknownTool(name.to_string()))
            }
        };
        let mut subtasks = Vec::with_capacity(task.subgoals.len());
        for goal in &task.subgoals {
            let tool = match &goal.tool_hint {
                Some(hint) => {
                    known(hint)?;
                    hint.clone()
                }
                None => bind_tool(&goal.description).to_string(),
            };
            if let Some(fallback) = &goal.fallback_tool {
                known(fallback)?;
            }
            subtasks.push(Subtask {
                id: goal.id.clone(),
                description: goal.description.clone(),
                estimated_steps: estimated_steps(strategy, &tool, self.max_steps),
                tool,
                args: goal.args.clone(),
                depends_on: goal.depends_on.clone(),
                status: SubtaskStatus::Pending,
                fallback_tool: goal.fallback_tool.clone(),
            });
        }
        let plan = Plan {
            task_id: task.id.clone(),
            version: 1,
            subtasks,
        };
        validate_plan(&plan)?;
        Ok(plan)
    }

    /// Rebinds the failed subtask to its fallback tool, or aborts.
    pub fn revise(
        &self,
        plan: &Plan,
        failure: &FailureContext,
        strategy: &StrategyState,
    ) -> Result<RevisionOutcome, PlanError> {
        let id = &failure.subtask_id;
        let failed = plan
            .subtask(id)
            .ok_or_else(|| PlanError::UnknownSubtask(id.clone()))?;
        if failed.status != SubtaskStatus::Failed {
            return Err(PlanError::NotFailed(id.clone()));
        }
        let Some(fallback) = failed.fallback_tool.clone() else {
            return Ok(RevisionOutcome::AbortTask(format!("no fallback for {id}")));
        };
        let reason = format!(
            "{id} failed ({}) after {} step(s); rebound {} -> {fallback}",
            failure.error_class, failure.steps_used, failed.tool
        );
        let mut revised = plan.clone();
        revised.version += 1;
        let target = revised.subtask_mut(id).expect("checked above");
        target.estimated_steps = estimated_steps(strategy, &fallback, self.max_steps);
        target.tool = fallback;
        target.fallback_tool = None;
        target.status = SubtaskStatus::Pending;
        validate_plan(&revised)?;
        Ok(RevisionOutcome::RevisedPlan {
            plan: revised,
            changed_subtasks: vec![id.clone()],
            reason,
        })
    }
}

impl Reasoner for RulePlanner {
    fn propose_plan(
        &self,
        task: &Task,
        strategy: &StrategyState,
        tools: &BTreeSet<String>,
    ) -> Result<Plan, PlanError> {
        self.plan(task, strategy, tools)
    }

    fn propose_revision(
        &self,
        plan: &Plan,
        failure: &FailureContext,
        strategy: &StrategyState,
    ) -> Result<RevisionOutcome, PlanError> {
        self.revise(plan, failure, strategy)
    }
}
