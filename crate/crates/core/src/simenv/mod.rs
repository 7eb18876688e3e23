//! Deterministic, resettable tool environment.
//!
//! Every worker owns one [`Environment`]. Built-in tools are `calc`,
//! `kvstore`, `echo` and `flaky`; further tools can be registered while the
//! environment is being built, after which the registry is fixed.

mod calc;
mod tools;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use calc::{calc_eval, evaluate, format_ratio, CalcError, Ratio, MAX_FRACTION_DIGITS};
pub use tools::{Args, Calc, Echo, Flaky, KvStore, Tool, ToolResult};

pub const ENV_EXTENSION: &str = "env.json";
pub const DEFAULT_FLAKY_ERROR: &str = "transient";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("bad environment config: {0}")]
    BadConfig(String),
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlakyConfig {
    /// When absent, derived from the seed (see [`EnvConfig::flaky_fail_count`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_count: Option<i64>,
    #[serde(default = "default_error_class")]
    pub error_class: String,
}

fn default_error_class() -> String {
    DEFAULT_FLAKY_ERROR.into()
}

impl Default for FlakyConfig {
    fn default() -> Self {
        FlakyConfig {
            fail_count: None,
            error_class: default_error_class(),
        }
    }
}

/// Contents of a `.env.json` file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub flaky: FlakyConfig,
}

impl EnvConfig {
    pub fn with_seed(seed: u64) -> Self {
        EnvConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn with_flaky(seed: u64, fail_count: i64) -> Self {
        EnvConfig {
            seed,
            flaky: FlakyConfig {
                fail_count: Some(fail_count),
                ..Default::default()
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EnvError::BadConfig(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| EnvError::BadConfig(format!("{}: {e}", path.display())))
    }

    /// Failures before `flaky` first succeeds: the configured count, or
    /// `seed % 4` when none is configured.
    pub fn flaky_fail_count(&self) -> Result<u64, EnvError> {
        match self.flaky.fail_count {
            Some(n) if n < 0 => Err(EnvError::BadConfig(format!(
                "flaky.fail_count must be non-negative, got {n}"
            ))),
            Some(n) => Ok(n as u64),
            None => Ok(self.seed % 4),
        }
    }
}

/// Registry of tools plus their mutable state.
pub struct Environment {
    seed: u64,
    tools: BTreeMap<String, Box<dyn Tool>>,
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment")
            .field("seed", &self.seed)
            .field("tools", &self.tools.keys().collect::<Vec<_>>())
            .finish()
    }
}

/// Builds an environment with the four built-in tools.
pub fn make_env(config: &EnvConfig) -> Result<Environment, EnvError> {
    EnvironmentBuilder::new(config)?.build()
}

pub struct EnvironmentBuilder {
    seed: u64,
    tools: Vec<Box<dyn Tool>>,
}

impl EnvironmentBuilder {
    pub fn new(config: &EnvConfig) -> Result<Self, EnvError> {
        let fail_count = config.flaky_fail_count()?;
        Ok(EnvironmentBuilder {
            seed: config.seed,
            tools: vec![
                Box::new(Calc),
                Box::new(KvStore::default()),
                Box::new(Echo),
                Box::new(Flaky::new("flaky", fail_count, config.flaky.error_class.clone())),
            ],
        })
    }

    pub fn tool(mut self, tool: Box<dyn Tool>) -> Self {
        self.tools.push(tool);
        self
    }

    pub fn build(self) -> Result<Environment, EnvError> {
        let mut tools = BTreeMap::new();
        for tool in self.tools {
            let name = tool.name().to_string();
            if name.is_empty() {
                return Err(EnvError::BadConfig("tool with empty name".into()));
            }
            if tools.insert(name.clone(), tool).is_some() {
                return Err(EnvError::BadConfig(format!("duplicate tool name `{name}`")));
            }
        }
        Ok(Environment {
            seed: self.seed,
            tools,
        })
    }
}

impl Environment {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn has_tool(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn tool_names(&self) -> BTreeSet<String> {
        self.tools.keys().cloned().collect()
    }

    pub fn describe(&self, name: &str) -> Option<String> {
        self.tools.get(name).map(|t| t.describe())
    }

    pub fn invoke(&mut self, name: &str, args: &Args) -> Result<ToolResult, EnvError> {
        self.tools
            .get_mut(name)
            .map(|tool| tool.invoke(args))
            .ok_or_else(|| EnvError::UnknownTool(name.to_string()))
    }

    /// Zeroes invocation counters and empties stores; the seed is kept.
    pub fn reset(&mut self) {
        for tool in self.tools.values_mut() {
            tool.reset();
        }
    }
}
