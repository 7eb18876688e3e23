//! Tasks, plans and the dependency DAG between subtasks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const TASK_EXTENSION: &str = "task.json";

/// Decomposition hint for one subgoal of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgoalSpec {
    pub id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_hint: Option<String>,
    #[serde(default)]
    pub args: Map<String, Value>,
    #[serde(default)]
    pub depends_on: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_tool: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub description: String,
    pub subgoals: Vec<SubgoalSpec>,
    #[serde(default)]
    pub success_note: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TaskFileError {
    #[error("cannot read task file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse task file {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid task in {path}: {source}")]
    Invalid {
        path: String,
        source: ValidationError,
    },
}

impl Task {
    pub fn from_json(text: &str) -> serde_json::Result<Task> {
        serde_json::from_str(text)
    }

    /// Reads and validates a `.task.json` file.
    pub fn load(path: &Path) -> Result<Task, TaskFileError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| TaskFileError::Io {
            path: display.clone(),
            source,
        })?;
        let task = Task::from_json(&text).map_err(|source| TaskFileError::Parse {
            path: display.clone(),
            source,
        })?;
        task.validate().map_err(|source| TaskFileError::Invalid {
            path: display,
            source,
        })?;
        Ok(task)
    }

    /// Checks id, subgoal uniqueness, dependency resolution and acyclicity.
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.is_empty() {
            return Err(ValidationError::EmptyTaskId);
        }
        let nodes: Vec<(&str, &[String])> = self
            .subgoals
            .iter()
            .map(|s| (s.id.as_str(), s.depends_on.as_slice()))
            .collect();
        validate_graph(&nodes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubtaskStatus {
    Pending,
    Ready,
    Running,
    Done,
    Failed,
    Skipped,
}

impl SubtaskStatus {
    /// Whether `self -> next` is an edge of the status automaton.
    pub fn can_transition(self, next: SubtaskStatus) -> bool {
        use SubtaskStatus::*;
        matches!(
            (self, next),
            (Pending, Ready) | (Ready, Running) | (Running, Done) | (Running, Failed) | (Pending, Skipped)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal status transition {from:?} -> {to:?}")]
pub struct IllegalTransition {
    pub from: SubtaskStatus,
    pub to: SubtaskStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtask {
    pub id: String,
    pub description: String,
    pub tool: String,
    pub args: Map<String, Value>,
    pub depends_on: Vec<String>,
    pub estimated_steps: u32,
    pub status: SubtaskStatus,
    /// Tool to rebind to if this subtask fails; consumed by the first revision.
    pub fallback_tool: Option<String>,
}

impl Subtask {
    pub fn transition(&mut self, next: SubtaskStatus) -> Result<(), IllegalTransition> {
        if self.status.can_transition(next) {
            self.status = next;
            Ok(())
        } else {
            Err(IllegalTransition {
                from: self.status,
                to: next,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub task_id: String,
    pub version: u32,
    pub subtasks: Vec<Subtask>,
}

impl Plan {
    pub fn subtask(&self, id: &str) -> Option<&Subtask> {
        self.subtasks.iter().find(|s| s.id == id)
    }

    pub fn subtask_mut(&mut self, id: &str) -> Option<&mut Subtask> {
        self.subtasks.iter_mut().find(|s| s.id == id)
    }

    pub fn all_done(&self) -> bool {
        self.subtasks.iter().all(|s| s.status == SubtaskStatus::Done)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("task id is empty")]
    EmptyTaskId,
    #[error("plan has no subtasks")]
    EmptyPlan,
    #[error("duplicate subtask id `{0}`")]
    DuplicateId(String),
    #[error("subtask `{0}` depends on unknown id `{1}`")]
    UnknownDependency(String, String),
    #[error("dependency cycle {0:?}")]
    CyclicDependency(Vec<String>),
    #[error("subtask `{0}` has estimated_steps < 1")]
    ZeroEstimate(String),
}

pub fn validate_plan(plan: &Plan) -> Result<(), ValidationError> {
    let nodes: Vec<(&str, &[String])> = plan
        .subtasks
        .iter()
        .map(|s| (s.id.as_str(), s.depends_on.as_slice()))
        .collect();
    validate_graph(&nodes)?;
    match plan.subtasks.iter().find(|s| s.estimated_steps < 1) {
        Some(s) => Err(ValidationError::ZeroEstimate(s.id.clone())),
        None => Ok(()),
    }
}

fn validate_graph(nodes: &[(&str, &[String])]) -> Result<(), ValidationError> {
    if nodes.is_empty() {
        return Err(ValidationError::EmptyPlan);
    }
    let mut deps: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, depends_on) in nodes {
        let mut sorted: Vec<&str> = depends_on.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        if deps.insert(id, sorted).is_some() {
            return Err(ValidationError::DuplicateId(id.to_string()));
        }
    }
    for (id, depends_on) in nodes {
        if let Some(missing) = depends_on.iter().find(|d| !deps.contains_key(d.as_str())) {
            return Err(ValidationError::UnknownDependency(
                id.to_string(),
                missing.clone(),
            ));
        }
    }
    match find_cycle(&deps) {
        Some(cycle) => Err(ValidationError::CyclicDependency(cycle)),
        None => Ok(()),
    }
}

/// Depth-first search along `depends_on` edges, visiting ids in lexicographic
/// order. Returns the first cycle found, starting at the node it re-enters.
fn find_cycle(deps: &BTreeMap<&str, Vec<&str>>) -> Option<Vec<String>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        OnStack,
        Finished,
    }
    let mut marks: BTreeMap<&str, Mark> = deps.keys().map(|k| (*k, Mark::Fresh)).collect();

    for &root in deps.keys() {
        if marks[root] != Mark::Fresh {
            continue;
        }
        // (node, index of next dependency to visit)
        let mut stack: Vec<(&str, usize)> = vec![(root, 0)];
        marks.insert(root, Mark::OnStack);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let edges = &deps[node];
            if *next == edges.len() {
                marks.insert(node, Mark::Finished);
                stack.pop();
                continue;
            }
            let dep = edges[*next];
            *next += 1;
            match marks[dep] {
                Mark::Fresh => {
                    marks.insert(dep, Mark::OnStack);
                    stack.push((dep, 0));
                }
                Mark::OnStack => {
                    let start = stack.iter().position(|(n, _)| *n == dep).unwrap_or(0);
                    return Some(stack[start..].iter().map(|(n, _)| n.to_string()).collect());
                }
                Mark::Finished => {}
            }
        }
    }
    None
}

/// Pending subtasks whose dependencies are all Done.
///
/// A subtask with any Failed or Skipped dependency is blocked and never ready.
pub fn ready_set(plan: &Plan) -> BTreeSet<String> {
    let status: BTreeMap<&str, SubtaskStatus> = plan
        .subtasks
        .iter()
        .map(|s| (s.id.as_str(), s.status))
        .collect();
    plan.subtasks
        .iter()
        .filter(|s| s.status == SubtaskStatus::Pending)
        .filter(|s| {
            s.depends_on
                .iter()
                .all(|d| status.get(d.as_str()) == Some(&SubtaskStatus::Done))
        })
        .map(|s| s.id.clone())
        .collect()
}

/// Kahn's algorithm, always taking the lexicographically smallest available id.
///
/// The result is the lexicographically least topological order.
pub fn topological_order(plan: &Plan) -> Vec<String> {
    let mut indegree: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dependents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for st in &plan.subtasks {
        indegree.insert(st.id.as_str(), st.depends_on.len());
        for dep in &st.depends_on {
            dependents.entry(dep.as_str()).or_default().push(st.id.as_str());
        }
    }
    let mut available: BTreeSet<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(id, _)| *id)
        .collect();
    let mut order = Vec::with_capacity(plan.subtasks.len());
    while let Some(id) = available.pop_first() {
        order.push(id.to_string());
        for dependent in dependents.get(id).into_iter().flatten() {
            let d = indegree.get_mut(dependent).expect("dependent is a subtask");
            *d -= 1;
            if *d == 0 {
                available.insert(dependent);
            }
        }
    }
    order
}
