//! A work-state-centric agent runtime.
//!
//! Workers turn a [`task_model::Task`] into a [`task_model::Plan`], execute
//! each subtask through a bounded thought → action → observation loop over
//! the tools of a [`simenv::Environment`], and record every step in a
//! hash-chained [`ledger::Ledger`]. The ledger can be verified, replayed and
//! rendered into a Markdown work journal with [`notes::render_journal`].
//!
//! ```
//! use workstate::runtime::{run_workload, Workload};
//! use workstate::task_model::Task;
//!
//! let task = Task::from_json(r#"{
//!     "id": "sum",
//!     "description": "add two numbers",
//!     "subgoals": [{"id": "s1", "description": "compute the sum", "args": {"expr": "2+3"}}]
//! }"#).unwrap();
//! let run = run_workload(&Workload::new(vec![task])).unwrap();
//! assert!(run.all_completed());
//! assert!(run.ledger.verify().valid);
//! ```

pub mod cli;
pub mod executor;
pub mod ledger;
pub mod notes;
pub mod planner;
pub mod runtime;
pub mod simenv;
pub mod task_model;
pub mod worker;

// Book chapters compile and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ledger.md")]
    mod ledger {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/react.md")]
    mod react {}
    #[doc = include_str!("../../../book/src/feedback.md")]
    mod feedback {}
    #[doc = include_str!("../../../book/src/journal.md")]
    mod journal {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
