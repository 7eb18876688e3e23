use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, PoisonError};
use std::thread;

use super::{run_task, RunDeps, RunSettings, StrategyState, TaskReport, WorkerError};
use crate::executor::ReflexRule;
use crate::ledger::Ledger;
use crate::planner::Reasoner;
use crate::simenv::{make_env, EnvConfig};
use crate::task_model::Task;

/// Configuration shared by all workers of a run.
pub struct PoolConfig<'a> {
    pub ledger: &'a Ledger,
    pub reasoner: &'a dyn Reasoner,
    pub rules: &'a [ReflexRule],
    pub env: &'a EnvConfig,
    pub strategy: &'a Mutex<StrategyState>,
    pub settings: RunSettings,
}

/// Runs every task exactly once on a pool of `n_workers` threads.
///
/// Workers pull tasks from a shared cursor in submission order. Each worker
/// owns an environment that is reset before every task. Reports come back in
/// submission order; a failing task never affects the others.
pub fn run_concurrent(
    tasks: &[Task],
    n_workers: usize,
    config: &PoolConfig<'_>,
) -> Result<Vec<Result<TaskReport, WorkerError>>, WorkerError> {
    if n_workers == 0 {
        return Err(WorkerError::NoWorkers);
    }
    let mut ids = BTreeSet::new();
    for task in tasks {
        if !ids.insert(task.id.as_str()) {
            return Err(WorkerError::DuplicateTask(task.id.clone()));
        }
    }
    // surface config errors before any thread starts
    make_env(config.env)?;

    let baseline = config
        .strategy
        .lock()
        .unwrap_or_else(PoisonError::into_inner)
        .clone();
    let deps = RunDeps {
        ledger: config.ledger,
        reasoner: config.reasoner,
        rules: config.rules,
        baseline: &baseline,
        shared: config.strategy,
        settings: config.settings,
    };
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<TaskReport, WorkerError>>>> =
        tasks.iter().map(|_| Mutex::new(None)).collect();

    thread::scope(|scope| {
        for w in 0..n_workers.min(tasks.len().max(1)) {
            let (deps, next, results) = (&deps, &next, &results);
            scope.spawn(move || {
                let worker_id = format!("w{w}");
                let mut env = make_env(config.env).expect("validated above");
                loop {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    let Some(task) = tasks.get(index) else { break };
                    env.reset();
                    let result = catch_unwind(AssertUnwindSafe(|| {
                        run_task(task, &worker_id, &mut env, deps)
                    }))
                    .unwrap_or_else(|_| Err(WorkerError::Panicked(task.id.clone())));
                    *results[index].lock().unwrap_or_else(PoisonError::into_inner) = Some(result);
                }
            });
        }
    });

    Ok(results
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap_or_else(PoisonError::into_inner)
                .expect("every task is claimed by a worker")
        })
        .collect())
}
