//! The work state ledger: an append-only, SHA-256 hash-chained record of
//! every cognitive event of a run.
//!
//! Each [`LedgerEntry`] commits to its predecessor through `prev_hash`, so
//! editing, dropping or reordering any record is caught by [`verify_chain`].
//! Entries carry a payload whose shape is fixed per [`EntryKind`]; appends
//! with a non-conforming payload are rejected.

mod chain;
mod clock;
mod entry;
mod io;
mod schema;
mod state;

pub use chain::{verify_chain, Ledger, VerificationReport, Violation};
pub use clock::{format_timestamp, logical_timestamp, Clock, LogicalClock, WallClock};
pub use entry::{Draft, EntryKind, LedgerEntry, Payload, UnknownKind, GENESIS_HASH};
pub use io::{export, import, parse_entries, parse_line, LEDGER_EXTENSION};
pub use schema::check_payload;
pub use state::{reconstruct_state, task_ids, Phase, WorkCounters, WorkStateView};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("ledger is sealed")]
    LedgerSealed,
    #[error("task `{0}` not found in ledger")]
    TaskNotFound(String),
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("chain invalid at index {index}: {reason}")]
    ChainInvalid { index: usize, reason: Violation },
    #[error("i/o error: {0}")]
    Io(String),
}
