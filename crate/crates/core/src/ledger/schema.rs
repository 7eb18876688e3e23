//! Fixed payload schema per entry kind.
//!
//! Every payload must carry exactly the keys listed for its kind, with values
//! of the listed shape. Strings documented as "string-or-empty" are plain
//! strings here; emptiness is a value, not an absence.

use serde_json::Value;

use super::entry::{EntryKind, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FieldType {
    Int,
    Number,
    Bool,
    Str,
    StrList,
    Map,
    SubtaskList,
}

impl FieldType {
    fn matches(self, value: &Value) -> bool {
        match self {
            FieldType::Int => value.is_u64() || value.is_i64(),
            FieldType::Number => value.is_number(),
            FieldType::Bool => value.is_boolean(),
            FieldType::Str => value.is_string(),
            FieldType::StrList => value
                .as_array()
                .is_some_and(|items| items.iter().all(Value::is_string)),
            FieldType::Map => value.is_object(),
            FieldType::SubtaskList => value.as_array().is_some_and(|items| {
                items.iter().all(|item| {
                    item.as_object().is_some_and(|obj| {
                        SUBTASK_FIELDS.len() == obj.len()
                            && SUBTASK_FIELDS
                                .iter()
                                .all(|(k, t)| obj.get(*k).is_some_and(|v| t.matches(v)))
                    })
                })
            }),
        }
    }

    fn name(self) -> &'static str {
        match self {
            FieldType::Int => "integer",
            FieldType::Number => "number",
            FieldType::Bool => "boolean",
            FieldType::Str => "string",
            FieldType::StrList => "list of strings",
            FieldType::Map => "map",
            FieldType::SubtaskList => "list of subtask records",
        }
    }
}

const SUBTASK_FIELDS: &[(&str, FieldType)] = &[
    ("id", FieldType::Str),
    ("description", FieldType::Str),
    ("tool", FieldType::Str),
    ("depends_on", FieldType::StrList),
    ("estimated_steps", FieldType::Int),
];

pub(crate) fn fields_for(kind: EntryKind) -> &'static [(&'static str, FieldType)] {
    use FieldType::*;
    match kind {
        EntryKind::TaskReceived => &[("description", Str)],
        EntryKind::PlanCreated => &[("plan_version", Int), ("subtasks", SubtaskList)],
        EntryKind::PlanRevised => &[
            ("plan_version", Int),
            ("reason", Str),
            ("changed_subtasks", StrList),
        ],
        EntryKind::ThoughtRecorded => &[("subtask_id", Str), ("step", Int), ("text", Str)],
        EntryKind::ActionDispatched => &[
            ("subtask_id", Str),
            ("step", Int),
            ("tool", Str),
            ("args", Map),
        ],
        EntryKind::ObservationRecorded => &[
            ("subtask_id", Str),
            ("step", Int),
            ("ok", Bool),
            ("output", Str),
            ("error_class", Str),
        ],
        EntryKind::ReflexTriggered => &[
            ("subtask_id", Str),
            ("step", Int),
            ("rule_id", Str),
            ("reflex", Str),
        ],
        EntryKind::SubtaskCompleted | EntryKind::SubtaskFailed => &[
            ("subtask_id", Str),
            ("steps_used", Int),
            ("reason", Str),
        ],
        EntryKind::FeedbackFused => &[
            ("subtask_id", Str),
            ("tool", Str),
            ("old_rate", Number),
            ("new_rate", Number),
            ("old_estimate", Number),
            ("new_estimate", Number),
        ],
        EntryKind::TaskCompleted => &[],
        EntryKind::TaskAborted => &[("reason", Str)],
    }
}

/// Checks `payload` against the schema of `kind`, describing the first problem.
pub fn check_payload(kind: EntryKind, payload: &Payload) -> Result<(), String> {
    let fields = fields_for(kind);
    for (key, ty) in fields {
        match payload.get(*key) {
            None => return Err(format!("{kind} payload missing required field `{key}`")),
            Some(v) if !ty.matches(v) => {
                return Err(format!("{kind} field `{key}` must be a {}", ty.name()))
            }
            Some(_) => {}
        }
    }
    if let Some(extra) = payload.keys().find(|k| !fields.iter().any(|(f, _)| f == k)) {
        return Err(format!("{kind} payload has unexpected field `{extra}`"));
    }
    Ok(())
}
