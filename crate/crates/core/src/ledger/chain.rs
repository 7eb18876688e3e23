use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use super::clock::{format_timestamp, Clock, LogicalClock};
use super::entry::{sha256_hex, Draft, LedgerEntry, GENESIS_HASH};
use super::schema::check_payload;
use super::LedgerError;

/// Append-only, hash-chained ledger shared by every worker of a run.
///
/// Appends are serialized by one lock, so the order in which they take it is
/// the total order of the chain. Readers copy out a prefix of `Arc`s and
/// never block appenders for longer than that copy.
pub struct Ledger {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
}

struct Inner {
    entries: Vec<Arc<LedgerEntry>>,
    sealed: bool,
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::new(Arc::new(LogicalClock::new()))
    }
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.lock();
        f.debug_struct("Ledger")
            .field("len", &inner.entries.len())
            .field("sealed", &inner.sealed)
            .finish()
    }
}

impl Ledger {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Ledger {
            inner: Mutex::new(Inner {
                entries: Vec::new(),
                sealed: false,
            }),
            clock,
        }
    }

    /// Wraps already-sealed entries. Callers are expected to have verified them.
    pub(crate) fn from_entries(entries: Vec<LedgerEntry>, clock: Arc<dyn Clock>) -> Self {
        Ledger {
            inner: Mutex::new(Inner {
                entries: entries.into_iter().map(Arc::new).collect(),
                sealed: false,
            }),
            clock,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // entries are only pushed after they are fully built, so a poisoned
        // lock still guards a well-formed chain
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn append(&self, draft: Draft) -> Result<Arc<LedgerEntry>, LedgerError> {
        check_payload(draft.kind, &draft.payload).map_err(LedgerError::SchemaViolation)?;
        let mut inner = self.lock();
        if inner.sealed {
            return Err(LedgerError::LedgerSealed);
        }
        let prev_hash = inner
            .entries
            .last()
            .map_or_else(|| GENESIS_HASH.to_string(), |e| e.entry_hash.clone());
        let mut entry = LedgerEntry {
            seq: inner.entries.len() as u64,
            timestamp: format_timestamp(self.clock.now()),
            worker_id: draft.worker_id,
            task_id: draft.task_id,
            kind: draft.kind,
            payload: draft.payload,
            prev_hash,
            entry_hash: String::new(),
        };
        entry.entry_hash = entry.compute_hash();
        let entry = Arc::new(entry);
        inner.entries.push(Arc::clone(&entry));
        Ok(entry)
    }

    /// Refuses all further appends.
    pub fn close(&self) {
        self.lock().sealed = true;
    }

    pub fn is_sealed(&self) -> bool {
        self.lock().sealed
    }

    pub fn len(&self) -> usize {
        self.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn head_hash(&self) -> String {
        self.lock()
            .entries
            .last()
            .map_or_else(|| GENESIS_HASH.to_string(), |e| e.entry_hash.clone())
    }

    /// Consistent prefix of the chain as of this call.
    pub fn snapshot(&self) -> Vec<Arc<LedgerEntry>> {
        self.lock().entries.clone()
    }

    /// Owned copies of every entry, in seq order.
    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.snapshot().iter().map(|e| LedgerEntry::clone(e)).collect()
    }

    pub fn verify(&self) -> VerificationReport {
        verify_chain(&self.snapshot())
    }
}

/// Why a chain failed verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// `seq` differs from the entry's position.
    SeqMismatch,
    /// `prev_hash` does not equal the previous entry's `entry_hash`.
    BrokenLink,
    /// Recomputed digest differs from the stored `entry_hash`.
    HashMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::SeqMismatch => "SeqMismatch",
            Violation::BrokenLink => "BrokenLink",
            Violation::HashMismatch => "HashMismatch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub valid: bool,
    pub entries: usize,
    pub first_bad_index: Option<usize>,
    pub reason: Option<Violation>,
}

impl VerificationReport {
    fn ok(entries: usize) -> Self {
        VerificationReport {
            valid: true,
            entries,
            first_bad_index: None,
            reason: None,
        }
    }

    fn bad(entries: usize, index: usize, reason: Violation) -> Self {
        VerificationReport {
            valid: false,
            entries,
            first_bad_index: Some(index),
            reason: Some(reason),
        }
    }
}

/// Checks seq contiguity, hash links and every entry digest, stopping at the
/// first violation.
pub fn verify_chain<E: AsRef<LedgerEntry>>(entries: &[E]) -> VerificationReport {
    let mut expected_prev = GENESIS_HASH;
    for (index, entry) in entries.iter().enumerate() {
        let entry = entry.as_ref();
        if entry.seq != index as u64 {
            return VerificationReport::bad(entries.len(), index, Violation::SeqMismatch);
        }
        if entry.prev_hash != expected_prev {
            return VerificationReport::bad(entries.len(), index, Violation::BrokenLink);
        }
        if sha256_hex(entry.hashed_form().as_bytes()) != entry.entry_hash {
            return VerificationReport::bad(entries.len(), index, Violation::HashMismatch);
        }
        expected_prev = &entry.entry_hash;
    }
    VerificationReport::ok(entries.len())
}

impl AsRef<LedgerEntry> for LedgerEntry {
    fn as_ref(&self) -> &LedgerEntry {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{EntryKind, Payload};
    use serde_json::json;

    fn received(task: &str) -> Draft {
        let mut payload = Payload::new();
        payload.insert("description".into(), json!("do it"));
        Draft::new("w0", task, EntryKind::TaskReceived, payload)
    }

    #[test]
    fn genesis_and_link() {
        let ledger = Ledger::default();
        let first = ledger.append(received("t")).unwrap();
        assert_eq!(first.seq, 0);
        assert_eq!(first.prev_hash, "0".repeat(64));
        let second = ledger.append(received("t")).unwrap();
        assert_eq!(second.seq, 1);
        assert_eq!(second.prev_hash, first.entry_hash);
        assert_ne!(first.entry_hash, second.entry_hash);
        assert_eq!(ledger.head_hash(), second.entry_hash);
    }

    #[test]
    fn empty_ledger_verifies() {
        let ledger = Ledger::default();
        assert!(ledger.verify().valid);
        assert_eq!(ledger.head_hash(), GENESIS_HASH);
    }

    #[test]
    fn hundred_appends_verify() {
        let ledger = Ledger::default();
        for _ in 0..100 {
            ledger.append(received("t")).unwrap();
        }
        let report = ledger.verify();
        assert!(report.valid);
        assert_eq!(report.entries, 100);
    }

    #[test]
    fn mutated_payload_is_reported_at_its_index() {
        let ledger = Ledger::default();
        for _ in 0..10 {
            ledger.append(received("t")).unwrap();
        }
        let mut entries = ledger.entries();
        entries[5]
            .payload
            .insert("description".into(), json!("do iu"));
        let report = verify_chain(&entries);
        assert!(!report.valid);
        assert_eq!(report.first_bad_index, Some(5));
        assert_eq!(report.reason, Some(Violation::HashMismatch));
    }

    #[test]
    fn seq_gap_and_broken_link_are_distinguished() {
        let ledger = Ledger::default();
        for _ in 0..4 {
            ledger.append(received("t")).unwrap();
        }
        let mut entries = ledger.entries();
        entries.remove(2);
        let report = verify_chain(&entries);
        assert_eq!(report.first_bad_index, Some(2));
        assert_eq!(report.reason, Some(Violation::SeqMismatch));

        let mut entries = ledger.entries();
        entries[3].prev_hash = "f".repeat(64);
        assert_eq!(verify_chain(&entries).reason, Some(Violation::BrokenLink));
    }

    #[test]
    fn schema_violation_and_sealed_ledger_are_errors() {
        let ledger = Ledger::default();
        let bad = Draft::new("w0", "t", EntryKind::TaskReceived, Payload::new());
        assert!(matches!(
            ledger.append(bad),
            Err(LedgerError::SchemaViolation(_))
        ));
        assert!(ledger.is_empty());
        ledger.close();
        assert!(matches!(
            ledger.append(received("t")),
            Err(LedgerError::LedgerSealed)
        ));
    }
}
