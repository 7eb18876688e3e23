//! Feedback fusion: moving-average tool statistics the planner consults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::ledger::Payload;

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const PRIOR_SUCCESS_RATE: f64 = 0.8;
pub const PRIOR_STEP_ESTIMATE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyState {
    pub tool_success_rate: BTreeMap<String, f64>,
    pub tool_step_estimate: BTreeMap<String, f64>,
    pub alpha: f64,
    /// Feedback records fused so far.
    #[serde(default)]
    pub updates: u64,
}

impl Default for StrategyState {
    fn default() -> Self {
        StrategyState::with_alpha(DEFAULT_ALPHA)
    }
}

/// What one finished subtask attempt tells the strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackRecord {
    pub subtask_id: String,
    pub tool: String,
    pub success: bool,
    pub planned_steps: u32,
    pub actual_steps: u32,
}

/// Before/after values of one fusion, as recorded in a `FeedbackFused` entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionUpdate {
    pub old_rate: f64,
    pub new_rate: f64,
    pub old_estimate: f64,
    pub new_estimate: f64,
}

impl FusionUpdate {
    pub fn payload(&self, fb: &FeedbackRecord) -> Payload {
        let value = json!({
            "subtask_id": fb.subtask_id,
            "tool": fb.tool,
            "old_rate": self.old_rate,
            "new_rate": self.new_rate,
            "old_estimate": self.old_estimate,
            "new_estimate": self.new_estimate,
        });
        match value {
            serde_json::Value::Object(map) => map,
            _ => unreachable!("json! object literal"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StrategyFileError {
    #[error("cannot read strategy file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse strategy file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("strategy alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
}

impl StrategyState {
    /// # Panics
    /// If `alpha` is outside the open interval (0, 1).
    pub fn with_alpha(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
        StrategyState {
            tool_success_rate: BTreeMap::new(),
            tool_step_estimate: BTreeMap::new(),
            alpha,
            updates: 0,
        }
    }

    pub fn success_rate(&self, tool: &str) -> Option<f64> {
        self.tool_success_rate.get(tool).copied()
    }

    pub fn step_estimate(&self, tool: &str) -> Option<f64> {
        self.tool_step_estimate.get(tool).copied()
    }

    /// Folds one feedback record into the statistics of `fb.tool`.
    ///
    /// Unseen tools start from the priors (rate 0.8, estimate 3.0).
    pub fn fuse(&mut self, fb: &FeedbackRecord, max_steps: u32) -> FusionUpdate {
        let a = self.alpha;
        let old_rate = self.success_rate(&fb.tool).unwrap_or(PRIOR_SUCCESS_RATE);
        let old_estimate = self.step_estimate(&fb.tool).unwrap_or(PRIOR_STEP_ESTIMATE);
        let outcome = if fb.success { 1.0 } else { 0.0 };
        let new_rate = ((1.0 - a) * old_rate + a * outcome).clamp(0.0, 1.0);
        let upper = f64::from(max_steps.max(1));
        let new_estimate = ((1.0 - a) * old_estimate + a * f64::from(fb.actual_steps)).clamp(1.0, upper);
        self.tool_success_rate.insert(fb.tool.clone(), new_rate);
        self.tool_step_estimate.insert(fb.tool.clone(), new_estimate);
        self.updates += 1;
        FusionUpdate {
            old_rate,
            new_rate,
            old_estimate,
            new_estimate,
        }
    }

    pub fn load(path: &Path) -> Result<Self, StrategyFileError> {
        let text = std::fs::read_to_string(path)?;
        let state: StrategyState = serde_json::from_str(&text)?;
        if !(state.alpha > 0.0 && state.alpha < 1.0) {
            return Err(StrategyFileError::BadAlpha(state.alpha));
        }
        Ok(state)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}

/// Pure form of [`StrategyState::fuse`].
pub fn fuse_feedback(
    strategy: &StrategyState,
    fb: &FeedbackRecord,
    max_steps: u32,
) -> (StrategyState, FusionUpdate) {
    let mut next = strategy.clone();
    let update = next.fuse(fb, max_steps);
    (next, update)
}
