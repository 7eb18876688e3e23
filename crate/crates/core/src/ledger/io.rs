//! Line-delimited ledger files (`.wsl.jsonl`).

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde_json::Value;

use super::chain::{verify_chain, Ledger};
use super::clock::LogicalClock;
use super::entry::{EntryKind, LedgerEntry};
use super::LedgerError;

pub const LEDGER_EXTENSION: &str = "wsl.jsonl";

/// Writes one canonical record per line.
pub fn export<W: Write>(entries: &[Arc<LedgerEntry>], mut sink: W) -> std::io::Result<()> {
    for entry in entries {
        sink.write_all(entry.canonical_line().as_bytes())?;
        sink.write_all(b"\n")?;
    }
    sink.flush()
}

/// Reads and verifies a ledger. The returned ledger continues with a logical
/// clock positioned after the last imported entry.
pub fn import<R: BufRead>(source: R) -> Result<Ledger, LedgerError> {
    let entries = parse_entries(source)?;
    let report = verify_chain(&entries);
    if let (Some(index), Some(reason)) = (report.first_bad_index, report.reason) {
        return Err(LedgerError::ChainInvalid { index, reason });
    }
    let next_tick = entries.len() as u64;
    Ok(Ledger::from_entries(
        entries,
        Arc::new(LogicalClock::starting_at(next_tick)),
    ))
}

/// Parses records without verifying the chain.
pub fn parse_entries<R: BufRead>(mut source: R) -> Result<Vec<LedgerEntry>, LedgerError> {
    let mut entries = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let read = source
            .read_until(b'\n', &mut buf)
            .map_err(|e| LedgerError::Io(e.to_string()))?;
        if read == 0 {
            break;
        }
        line_no += 1;
        if buf.last() != Some(&b'\n') {
            return Err(parse_err(line_no, "truncated record (missing newline)"));
        }
        buf.pop();
        let text = std::str::from_utf8(&buf).map_err(|_| parse_err(line_no, "invalid UTF-8"))?;
        entries.push(parse_line(text).map_err(|msg| parse_err(line_no, &msg))?);
    }
    Ok(entries)
}

fn parse_err(line: usize, message: &str) -> LedgerError {
    LedgerError::ParseError {
        line,
        message: message.to_string(),
    }
}

/// Parses one canonical record.
pub fn parse_line(text: &str) -> Result<LedgerEntry, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let Value::Object(mut obj) = value else {
        return Err("record is not an object".into());
    };
    let mut take_str = |key: &str| -> Result<String, String> {
        match obj.remove(key) {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(format!("field `{key}` must be a string")),
            None => Err(format!("missing field `{key}`")),
        }
    };
    let timestamp = take_str("timestamp")?;
    let worker_id = take_str("worker_id")?;
    let task_id = take_str("task_id")?;
    let kind_name = take_str("kind")?;
    let prev_hash = take_str("prev_hash")?;
    let entry_hash = take_str("entry_hash")?;
    let kind: EntryKind = kind_name
        .parse()
        .map_err(|_| format!("unknown entry kind `{kind_name}`"))?;
    let seq = match obj.remove("seq") {
        Some(v) => v.as_u64().ok_or("field `seq` must be a non-negative integer")?,
        None => return Err("missing field `seq`".into()),
    };
    let payload = match obj.remove("payload") {
        Some(Value::Object(map)) => map,
        Some(_) => return Err("field `payload` must be an object".into()),
        None => return Err("missing field `payload`".into()),
    };
    if let Some(extra) = obj.keys().next() {
        return Err(format!("unexpected field `{extra}`"));
    }
    let entry = LedgerEntry {
        seq,
        timestamp,
        worker_id,
        task_id,
        kind,
        payload,
        prev_hash,
        entry_hash,
    };
    // one encoding per record, so equal values cannot hide an edit
    if entry.canonical_line() != text {
        return Err("record is not in canonical form".into());
    }
    Ok(entry)
}
