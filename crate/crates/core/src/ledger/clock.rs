use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, TimeDelta, Utc};

/// Source of entry timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

/// Renders an instant the way ledger entries store it.
pub fn format_timestamp(instant: DateTime<Utc>) -> String {
    instant.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

/// Timestamp the logical clock yields on its `tick`-th reading.
pub fn logical_timestamp(tick: u64) -> String {
    let delta = TimeDelta::milliseconds(i64::try_from(tick).unwrap_or(i64::MAX));
    format_timestamp(DateTime::UNIX_EPOCH + delta)
}

/// Counter clock: the n-th reading is the Unix epoch plus n milliseconds.
#[derive(Debug, Default)]
pub struct LogicalClock {
    ticks: AtomicU64,
}

impl LogicalClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(tick: u64) -> Self {
        LogicalClock {
            ticks: AtomicU64::new(tick),
        }
    }
}

impl Clock for LogicalClock {
    fn now(&self) -> DateTime<Utc> {
        let tick = self.ticks.fetch_add(1, Ordering::SeqCst);
        DateTime::UNIX_EPOCH + TimeDelta::milliseconds(tick as i64)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct WallClock;

impl Clock for WallClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}
