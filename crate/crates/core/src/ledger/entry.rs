use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Payload of a ledger entry. Keys serialize in sorted order.
pub type Payload = Map<String, Value>;

/// The `prev_hash` of entry 0.
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

/// Kinds of cognitive events the ledger records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntryKind {
    TaskReceived,
    PlanCreated,
    PlanRevised,
    ThoughtRecorded,
    ActionDispatched,
    ObservationRecorded,
    ReflexTriggered,
    SubtaskCompleted,
    SubtaskFailed,
    FeedbackFused,
    TaskCompleted,
    TaskAborted,
}

impl EntryKind {
    pub const ALL: [EntryKind; 12] = [
        EntryKind::TaskReceived,
        EntryKind::PlanCreated,
        EntryKind::PlanRevised,
        EntryKind::ThoughtRecorded,
        EntryKind::ActionDispatched,
        EntryKind::ObservationRecorded,
        EntryKind::ReflexTriggered,
        EntryKind::SubtaskCompleted,
        EntryKind::SubtaskFailed,
        EntryKind::FeedbackFused,
        EntryKind::TaskCompleted,
        EntryKind::TaskAborted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::TaskReceived => "TaskReceived",
            EntryKind::PlanCreated => "PlanCreated",
            EntryKind::PlanRevised => "PlanRevised",
            EntryKind::ThoughtRecorded => "ThoughtRecorded",
            EntryKind::ActionDispatched => "ActionDispatched",
            EntryKind::ObservationRecorded => "ObservationRecorded",
            EntryKind::ReflexTriggered => "ReflexTriggered",
            EntryKind::SubtaskCompleted => "SubtaskCompleted",
            EntryKind::SubtaskFailed => "SubtaskFailed",
            EntryKind::FeedbackFused => "FeedbackFused",
            EntryKind::TaskCompleted => "TaskCompleted",
            EntryKind::TaskAborted => "TaskAborted",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownKind(pub String);

impl FromStr for EntryKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntryKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

/// An entry before it is sealed into the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Draft {
    pub worker_id: String,
    pub task_id: String,
    pub kind: EntryKind,
    pub payload: Payload,
}

impl Draft {
    pub fn new(
        worker_id: impl Into<String>,
        task_id: impl Into<String>,
        kind: EntryKind,
        payload: Payload,
    ) -> Self {
        Draft {
            worker_id: worker_id.into(),
            task_id: task_id.into(),
            kind,
            payload,
        }
    }
}

/// One sealed, hash-chained record.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub seq: u64,
    pub timestamp: String,
    pub worker_id: String,
    pub task_id: String,
    pub kind: EntryKind,
    pub payload: Payload,
    pub prev_hash: String,
    pub entry_hash: String,
}

impl LedgerEntry {
    /// Canonical text of the seven hash-covered fields.
    pub fn hashed_form(&self) -> String {
        let mut obj = self.covered_fields();
        obj.remove("entry_hash");
        Value::Object(obj).to_string()
    }

    /// Canonical text of the full record, as written to a ledger file.
    pub fn canonical_line(&self) -> String {
        let mut obj = self.covered_fields();
        obj.insert("entry_hash".into(), Value::String(self.entry_hash.clone()));
        Value::Object(obj).to_string()
    }

    /// Recomputes the digest of the hash-covered fields.
    pub fn compute_hash(&self) -> String {
        sha256_hex(self.hashed_form().as_bytes())
    }

    pub fn payload_str(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn payload_u64(&self, key: &str) -> Option<u64> {
        self.payload.get(key).and_then(Value::as_u64)
    }

    fn covered_fields(&self) -> Map<String, Value> {
        let mut obj = Map::new();
        obj.insert("seq".into(), Value::from(self.seq));
        obj.insert("timestamp".into(), Value::String(self.timestamp.clone()));
        obj.insert("worker_id".into(), Value::String(self.worker_id.clone()));
        obj.insert("task_id".into(), Value::String(self.task_id.clone()));
        obj.insert("kind".into(), Value::String(self.kind.as_str().into()));
        obj.insert("payload".into(), Value::Object(self.payload.clone()));
        obj.insert("prev_hash".into(), Value::String(self.prev_hash.clone()));
        obj
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
