use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::calc::calc_eval;

pub type Args = Map<String, Value>;

/// Outcome of one tool invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolResult {
    pub ok: bool,
    pub output: String,
    /// Empty iff `ok`.
    pub error_class: String,
    pub cost: u64,
}

impl ToolResult {
    pub fn success(output: impl Into<String>) -> Self {
        ToolResult {
            ok: true,
            output: output.into(),
            error_class: String::new(),
            cost: 1,
        }
    }

    /// A failure. An empty `error_class` is replaced by `"error"`.
    pub fn failure(error_class: impl Into<String>, output: impl Into<String>) -> Self {
        let mut error_class = error_class.into();
        if error_class.is_empty() {
            error_class = "error".into();
        }
        ToolResult {
            ok: false,
            output: output.into(),
            error_class,
            cost: 1,
        }
    }
}

/// A tool the executor can dispatch actions to.
///
/// `invoke` must be a deterministic function of the environment seed, the
/// tool's own invocation history since the last `reset`, and `args`.
pub trait Tool: Send {
    fn name(&self) -> &str;
    fn describe(&self) -> String;
    fn invoke(&mut self, args: &Args) -> ToolResult;
    /// Returns the tool to its freshly constructed state.
    fn reset(&mut self) {}
}

/// String view of an argument; non-string values use their JSON text.
pub(crate) fn arg_text(args: &Args, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| args.get(*k)).map(|v| match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    })
}

pub struct Calc;

impl Tool for Calc {
    fn name(&self) -> &str {
        "calc"
    }

    fn describe(&self) -> String {
        "evaluates an arithmetic expression (`expr`) over decimals with + - * / and parentheses"
            .into()
    }

    fn invoke(&mut self, args: &Args) -> ToolResult {
        let Some(expr) = arg_text(args, &["expr"]) else {
            return ToolResult::failure("bad_args", "missing `expr`");
        };
        match calc_eval(&expr) {
            Ok(value) => ToolResult::success(value),
            Err(err) => ToolResult::failure(err.error_class(), err.to_string()),
        }
    }
}

#[derive(Default)]
pub struct KvStore {
    data: BTreeMap<String, String>,
}

impl KvStore {
    pub fn contents(&self) -> &BTreeMap<String, String> {
        &self.data
    }
}

impl Tool for KvStore {
    fn name(&self) -> &str {
        "kvstore"
    }

    fn describe(&self) -> String {
        "key-value store: op=put with k/v, or op=get with k".into()
    }

    fn invoke(&mut self, args: &Args) -> ToolResult {
        let op = arg_text(args, &["op"]).unwrap_or_default();
        let Some(key) = arg_text(args, &["k", "key"]) else {
            return ToolResult::failure("bad_args", "missing key `k`");
        };
        match op.as_str() {
            "put" => {
                let Some(value) = arg_text(args, &["v", "value"]) else {
                    return ToolResult::failure("bad_args", "missing value `v`");
                };
                self.data.insert(key.clone(), value);
                ToolResult::success(format!("stored {key}"))
            }
            "get" => match self.data.get(&key) {
                Some(v) => ToolResult::success(v.clone()),
                None => ToolResult::failure("not_found", format!("no value for {key}")),
            },
            other => ToolResult::failure("bad_args", format!("unknown op `{other}`")),
        }
    }

    fn reset(&mut self) {
        self.data.clear();
    }
}

pub struct Echo;

impl Tool for Echo {
    fn name(&self) -> &str {
        "echo"
    }

    fn describe(&self) -> String {
        "returns its `text` argument".into()
    }

    fn invoke(&mut self, args: &Args) -> ToolResult {
        match arg_text(args, &["text"]) {
            Some(text) => ToolResult::success(text),
            None => ToolResult::failure("bad_args", "missing `text`"),
        }
    }
}

/// Fails its first `fail_count` invocations after construction or reset,
/// then succeeds with `args.text` (or `"ok"`).
pub struct Flaky {
    name: String,
    fail_count: u64,
    error_class: String,
    invocations: u64,
}

impl Flaky {
    pub fn new(name: impl Into<String>, fail_count: u64, error_class: impl Into<String>) -> Self {
        Flaky {
            name: name.into(),
            fail_count,
            error_class: error_class.into(),
            invocations: 0,
        }
    }

    pub fn fail_count(&self) -> u64 {
        self.fail_count
    }

    pub fn invocations(&self) -> u64 {
        self.invocations
    }
}

impl Tool for Flaky {
    fn name(&self) -> &str {
        &self.name
    }

    fn describe(&self) -> String {
        format!(
            "fails the first {} invocations with `{}`, then echoes `text`",
            self.fail_count, self.error_class
        )
    }

    fn invoke(&mut self, args: &Args) -> ToolResult {
        self.invocations += 1;
        if self.invocations <= self.fail_count {
            ToolResult::failure(
                self.error_class.clone(),
                format!("invocation {} failed", self.invocations),
            )
        } else {
            ToolResult::success(arg_text(args, &["text"]).unwrap_or_else(|| "ok".into()))
        }
    }

    fn reset(&mut self) {
        self.invocations = 0;
    }
}
