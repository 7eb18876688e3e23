//! Acceptance suite. Prints one `ACCEPTANCE [n] <name>: PASS|FAIL (<detail>)`
//! line per criterion and exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use workstate::executor::{Reflex, ReflexRule};
use workstate::ledger::{
    export, parse_entries, verify_chain, Draft, EntryKind, Ledger, LedgerEntry, LogicalClock,
    Payload,
};
use workstate::notes::render_journal;
use workstate::runtime::{run_stress, run_workload, transcript_text, Workload};
use workstate::simenv::{make_env, EnvConfig};
use workstate::task_model::{topological_order, Plan, Subtask, SubtaskStatus};
use workstate::worker::{fuse_feedback, FeedbackRecord, RunSettings, StrategyState};

use common::*;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

/// Ledgers produced by the criteria, audited for the feedback invariant.
static AUDIT: Mutex<Vec<(String, bool)>> = Mutex::new(Vec::new());

fn audit<E: AsRef<LedgerEntry>>(label: &str, entries: &[E]) -> bool {
    let ok = feedback_balanced(entries);
    AUDIT.lock().unwrap().push((label.to_string(), ok));
    ok
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn payload(v: Value) -> Payload {
    match v {
        Value::Object(map) => map,
        _ => unreachable!(),
    }
}

fn thought(worker: &str, step: u64) -> Draft {
    Draft::new(
        worker,
        "t",
        EntryKind::ThoughtRecorded,
        payload(json!({"subtask_id": "s", "step": step, "text": format!("thought {step}")})),
    )
}

// 1 ---------------------------------------------------------------------------

fn flip_string_bit(s: &mut String, rng: &mut ChaCha8Rng) {
    let mut bytes = std::mem::take(s).into_bytes();
    let i = rng.gen_range(0..bytes.len());
    // low seven bits keep ASCII text valid UTF-8
    bytes[i] ^= 1 << rng.gen_range(0..7);
    *s = String::from_utf8(bytes).expect("ascii stays utf-8");
}

fn tamper(entry: &mut LedgerEntry, rng: &mut ChaCha8Rng) -> &'static str {
    match rng.gen_range(0..7) {
        0 => {
            entry.seq ^= 1 << rng.gen_range(0..64);
            "seq"
        }
        1 => {
            flip_string_bit(&mut entry.timestamp, rng);
            "timestamp"
        }
        2 => {
            flip_string_bit(&mut entry.worker_id, rng);
            "worker_id"
        }
        3 => {
            flip_string_bit(&mut entry.task_id, rng);
            "task_id"
        }
        4 => {
            if rng.gen_bool(0.5) {
                let step = entry.payload["step"].as_u64().unwrap();
                entry.payload.insert("step".into(), json!(step ^ (1 << rng.gen_range(0..63))));
            } else {
                let mut text = entry.payload["text"].as_str().unwrap().to_string();
                flip_string_bit(&mut text, rng);
                entry.payload.insert("text".into(), json!(text));
            }
            "payload"
        }
        5 => {
            flip_string_bit(&mut entry.prev_hash, rng);
            "prev_hash"
        }
        _ => {
            flip_string_bit(&mut entry.entry_hash, rng);
            "entry_hash"
        }
    }
}

fn chain_integrity() -> Outcome {
    let ledger = Ledger::default();
    for i in 0..10_000u64 {
        ledger.append(thought(&format!("w{}", i % 8), i)).map_err(|e| e.to_string())?;
    }
    let entries = ledger.entries();
    let started = Instant::now();
    let report = verify_chain(&entries);
    let elapsed = started.elapsed();
    ensure(report.valid && report.entries == 10_000, || format!("fresh chain invalid: {report:?}"))?;
    ensure(elapsed < Duration::from_secs(1), || format!("verify took {elapsed:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x1ed6e5);
    let mut detected = 0;
    let mut fields = BTreeSet::new();
    for _ in 0..100 {
        let mut copy = entries.clone();
        let index = rng.gen_range(0..copy.len());
        fields.insert(tamper(&mut copy[index], &mut rng));
        let r = verify_chain(&copy);
        if !r.valid && r.first_bad_index.is_some_and(|b| b <= index) {
            detected += 1;
        }
    }
    ensure(detected == 100, || format!("in-memory tamperings detected {detected}/100"))?;

    // the same experiment on the exported file: a flip either stops the parser
    // or is flagged by verification at or before its line
    let mut bytes = Vec::new();
    export(&ledger.snapshot(), &mut bytes).map_err(|e| e.to_string())?;
    let mut file_detected = 0;
    let mut by_parser = 0;
    for _ in 0..100 {
        let mut copy = bytes.clone();
        let pos = rng.gen_range(0..copy.len());
        let line = copy[..pos].iter().filter(|b| **b == b'\n').count();
        copy[pos] ^= 1 << rng.gen_range(0..8);
        match parse_entries(copy.as_slice()) {
            Err(_) => {
                by_parser += 1;
                file_detected += 1;
            }
            Ok(parsed) => {
                let r = verify_chain(&parsed);
                if !r.valid && r.first_bad_index.is_some_and(|b| b <= line) {
                    file_detected += 1;
                }
            }
        }
    }
    ensure(file_detected == 100, || format!("file tamperings detected {file_detected}/100"))?;
    Ok(format!(
        "verify 10000 entries in {:.1} ms; 100/100 in-memory flips over {} fields; 100/100 file flips ({by_parser} rejected by parser)",
        elapsed.as_secs_f64() * 1e3,
        fields.len()
    ))
}

// 2 ---------------------------------------------------------------------------

fn concurrent_appends() -> Outcome {
    const WORKERS: usize = 8;
    const PER_WORKER: u64 = 1_000;
    for trial in 0..20 {
        let ledger = Ledger::default();
        std::thread::scope(|s| {
            for w in 0..WORKERS {
                let ledger = &ledger;
                s.spawn(move || {
                    let id = format!("w{w}");
                    for i in 0..PER_WORKER {
                        ledger.append(thought(&id, i)).expect("append");
                    }
                });
            }
        });
        let entries = ledger.snapshot();
        ensure(entries.len() == 8_000, || format!("trial {trial}: {} entries", entries.len()))?;
        let seqs: Vec<u64> = entries.iter().map(|e| e.seq).collect();
        ensure(seqs == (0..8_000).collect::<Vec<_>>(), || format!("trial {trial}: seq gap"))?;
        ensure(ledger.verify().valid, || format!("trial {trial}: chain invalid"))?;
        let mut next = [0u64; WORKERS];
        for e in &entries {
            let w: usize = e.worker_id[1..].parse().unwrap();
            let step = e.payload_u64("step").unwrap();
            ensure(step == next[w], || format!("trial {trial}: {} out of order", e.worker_id))?;
            next[w] += 1;
        }
    }
    Ok("20/20 trials: 8000 entries, contiguous seq, valid chain, per-worker order kept".into())
}

// 3 ---------------------------------------------------------------------------

fn samples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../samples")
}

fn workstate(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_workstate"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned()))
}

fn replay_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = samples();
    let route = s.join("route.task.json");
    let report = s.join("report.task.json");
    let rules = s.join("retry.reflex.json");
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    let base = [route.to_str().unwrap(), report.to_str().unwrap(), "--rules", rules.to_str().unwrap()];
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let (ledger, journal) = (path(&format!("{run}.wsl.jsonl")), path(&format!("{run}.journal.md")));
        let mut args = vec!["run", "--clock", "logical", "--seed", "3", "--ledger", &ledger, "-o", &journal];
        args.extend(base);
        let (code, _) = workstate(&args)?;
        ensure(code == 0, || format!("run {run} exited {code}"))?;
        let l = std::fs::read(&ledger).map_err(|e| e.to_string())?;
        let j = std::fs::read(&journal).map_err(|e| e.to_string())?;
        outputs.push((l, j));
    }
    ensure(outputs[0].0 == outputs[1].0, || "ledger files differ".into())?;
    ensure(outputs[0].1 == outputs[1].1, || "journals differ".into())?;
    let parsed = parse_entries(outputs[0].0.as_slice()).map_err(|e| e.to_string())?;
    audit("replay run", &parsed);

    let ledger = path("a.wsl.jsonl");
    let mut args = vec!["replay", ledger.as_str(), "--seed", "3"];
    args.extend(base);
    let (code, line) = workstate(&args)?;
    ensure(code == 0, || format!("replay exited {code}: {line}"))?;
    let mut args = vec!["replay", ledger.as_str(), "--seed", "1"];
    args.extend(base);
    let (diverged, line2) = workstate(&args)?;
    ensure(diverged == 2, || format!("changed-seed replay exited {diverged}"))?;
    Ok(format!(
        "{} ledger bytes and journal identical; replay exit 0; seed change exit 2 ({})",
        outputs[0].0.len(),
        line2.trim()
    ))
}

// 4 ---------------------------------------------------------------------------

fn random_rules(rng: &mut ChaCha8Rng) -> Vec<ReflexRule> {
    let mut rules = Vec::new();
    for (i, trigger) in ["transient", "*", "transient", "parse"].iter().enumerate() {
        if rng.gen_bool(0.5) {
            let reflex = match rng.gen_range(0..4) {
                0 => Reflex::Retry { max_retries: rng.gen_range(1..5) },
                1 => Reflex::SubstituteTool { tool: "echo".into() },
                2 => Reflex::AdjustArgs { patch: payload(json!({"expr": "1+1"})) },
                _ => Reflex::AbortSubtask,
            };
            rules.push(ReflexRule::new(format!("r{i}"), rng.gen_range(0..3), *trigger, reflex));
        }
    }
    rules
}

fn react_budget() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut attempts = 0;
    let mut max_seen = 0;
    for n in 0..200 {
        let max_steps: u32 = rng.gen_range(1..=8);
        let fail_count: i64 = rng.gen_range(0..=10);
        let tool = if rng.gen_bool(0.8) { "flaky" } else { "calc" };
        let mut goal = json!({"id": "s1", "description": "generated", "tool_hint": tool,
                              "args": {"text": "t", "expr": if rng.gen_bool(0.5) { "1+" } else { "2*3" }}});
        match rng.gen_range(0..3) {
            0 => goal["fallback_tool"] = json!("echo"),
            1 => goal["fallback_tool"] = json!("flaky"),
            _ => {}
        }
        let mut w = Workload::new(vec![task(json!({"id": format!("g{n:03}"), "description": "generated",
                                                   "subgoals": [goal]}))]);
        w.env = EnvConfig::with_flaky(n, fail_count);
        w.rules = random_rules(&mut rng);
        w.settings = RunSettings { max_steps, ..RunSettings::default() };
        let run = run_workload(&w).map_err(|e| e.to_string())?;
        let entries = run.ledger.snapshot();
        audit("react budget", &entries);
        let counts = attempt_counts(&entries, &format!("g{n:03}"));
        ensure(!counts.is_empty(), || format!("g{n:03}: no attempt recorded"))?;
        for (actions, observations) in counts {
            attempts += 1;
            max_seen = max_seen.max(actions);
            ensure(
                (1..=max_steps as usize).contains(&actions) && actions == observations,
                || format!("g{n:03}: {actions} actions, {observations} observations, max_steps {max_steps}"),
            )?;
        }
    }
    Ok(format!("200 subtasks, {attempts} attempts, 0 violations, longest attempt {max_seen} steps"))
}

// 5 ---------------------------------------------------------------------------

fn reflex_vs_replan() -> Outcome {
    let reflex = run_workload(&reflex_workload()).map_err(|e| e.to_string())?;
    let replan = run_workload(&replan_workload()).map_err(|e| e.to_string())?;
    audit("reflex", &reflex.ledger.snapshot());
    audit("replan", &replan.ledger.snapshot());
    let a = reflex.reports[0].as_ref().map_err(|e| e.to_string())?;
    let b = replan.reports[0].as_ref().map_err(|e| e.to_string())?;
    ensure(
        a.final_phase.as_str() == "Completed" && a.plan_versions == 1 && a.reflexes_fired == 2,
        || format!("reflex run: {}", a.summary_line()),
    )?;
    ensure(
        b.final_phase.as_str() == "Completed" && b.plan_versions == 2 && b.reflexes_fired == 0,
        || format!("replan run: {}", b.summary_line()),
    )?;
    check_golden("reflex_retry.transcript", &transcript_text(&reflex.ledger.snapshot(), "gamma"))?;
    check_golden("fallback_replan.transcript", &transcript_text(&replan.ledger.snapshot(), "gamma"))?;
    Ok("reflex: versions=1 reflexes=2; replan: versions=2 reflexes=0; both transcripts match".into())
}

// 6 ---------------------------------------------------------------------------

fn ffc_arithmetic() -> Outcome {
    let closed = 1.0 - 0.7f64.powi(20) * 0.2;
    let mut state = StrategyState::default();
    for i in 0..20 {
        let fb = FeedbackRecord {
            subtask_id: format!("s{i}"),
            tool: "calc".into(),
            success: true,
            planned_steps: 3,
            actual_steps: 1,
        };
        state = fuse_feedback(&state, &fb, 8).0;
    }
    let direct = state.success_rate("calc").unwrap();
    ensure((direct - closed).abs() < 1e-9, || format!("fusion gives {direct}, closed form {closed}"))?;

    let goals: Vec<Value> = (0..20)
        .map(|i| json!({"id": format!("s{i:02}"), "description": "compute", "args": {"expr": format!("{i}*2")}}))
        .collect();
    let run = run_workload(&Workload::new(vec![task(json!({"id": "ffc", "description": "twenty sums",
                                                           "subgoals": goals}))]))
    .map_err(|e| e.to_string())?;
    let entries = run.ledger.snapshot();
    audit("ffc", &entries);
    let last = entries
        .iter()
        .rev()
        .find(|e| e.kind == EntryKind::FeedbackFused)
        .ok_or("no FeedbackFused entry")?;
    let recorded = last.payload["new_rate"].as_f64().unwrap();
    ensure((recorded - closed).abs() < 1e-9, || format!("ledger records {recorded}, closed form {closed}"))?;

    let audits = AUDIT.lock().unwrap();
    let bad: Vec<&String> = audits.iter().filter(|(_, ok)| !ok).map(|(l, _)| l).collect();
    ensure(bad.is_empty(), || format!("feedback count unbalanced in {bad:?}"))?;
    Ok(format!(
        "rate {direct:.12} (|err| {:.1e}); ledger {recorded:.12}; feedback balanced on {} ledgers",
        (direct - closed).abs(),
        audits.len()
    ))
}

// 7 ---------------------------------------------------------------------------

type Projection = HashMap<String, Vec<(EntryKind, Payload)>>;

fn project<E: AsRef<LedgerEntry>>(entries: &[E]) -> Projection {
    let mut map: Projection = HashMap::new();
    for e in entries.iter().map(AsRef::as_ref) {
        map.entry(e.task_id.clone()).or_default().push((e.kind, e.payload.clone()));
    }
    map
}

fn scalability_stress() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ledger = dir.path().join("stress.wsl.jsonl");
    let started = Instant::now();
    let (code, line) = workstate(&[
        "stress", "--tasks", "1000", "--subtasks", "5", "--workers", "8", "--seed", "0",
        "--ledger", ledger.to_str().unwrap(),
    ])?;
    let elapsed = started.elapsed();
    ensure(code == 0, || format!("stress exited {code}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("stress took {elapsed:?}"))?;
    let file = std::fs::File::open(&ledger).map_err(|e| e.to_string())?;
    let entries = parse_entries(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    let completed = count_kind(&entries, EntryKind::SubtaskCompleted);
    ensure(completed == 5_000, || format!("{completed} SubtaskCompleted"))?;
    ensure(verify_chain(&entries).valid, || "stress chain invalid".into())?;
    audit("stress W=8", &entries);

    let solo = run_stress(1000, 5, 1, 0, RunSettings::default(), Arc::new(LogicalClock::new()))
        .map_err(|e| e.to_string())?;
    let solo_entries = solo.ledger.snapshot();
    audit("stress W=1", &solo_entries);
    let (many, one) = (project(&entries), project(&solo_entries));
    ensure(many.len() == 1000 && one.len() == 1000, || "task count mismatch".into())?;
    let differing = one.iter().filter(|(id, t)| many.get(*id) != Some(t)).count();
    ensure(differing == 0, || format!("{differing} task transcripts differ from W=1"))?;
    Ok(format!("{:.2} s wall; {}; transcripts equal W=1", elapsed.as_secs_f64(), line.trim()))
}

// 8 ---------------------------------------------------------------------------

fn golden_journal() -> Outcome {
    let run = run_workload(&reference_workload()).map_err(|e| e.to_string())?;
    let entries = run.ledger.snapshot();
    audit("reference", &entries);
    let doc = render_journal(&entries).map_err(|e| e.to_string())?;
    check_golden("reference.journal.md", &doc)?;

    let mut scanned = 0;
    for task_id in ["alpha", "beta"] {
        let section = doc
            .split(&format!("## Task `{task_id}`"))
            .nth(1)
            .and_then(|s| s.split("\n## Task").next())
            .ok_or_else(|| format!("no section for {task_id}"))?;
        let lines: Vec<&str> = section.lines().collect();
        // each entry must be matched by a distinct line of the right shape
        let mut used = vec![false; lines.len()];
        for e in entries.iter().filter(|e| e.task_id == task_id) {
            let (sid, step) = (e.payload_str("subtask_id"), e.payload_u64("step"));
            let marker = match e.kind {
                EntryKind::ThoughtRecorded => "Thought: ",
                EntryKind::ActionDispatched => "Action: ",
                EntryKind::ObservationRecorded => "Observation: ",
                EntryKind::ReflexTriggered => "Reflex ",
                _ => continue,
            };
            scanned += 1;
            let key = format!("`{}` step {}", sid.unwrap_or("?"), step.unwrap_or(0));
            let found = lines.iter().enumerate().position(|(i, l)| {
                l.contains(&key) && l.contains(marker) && (e.kind != EntryKind::ReflexTriggered || !used[i])
            });
            match found {
                Some(i) => {
                    if e.kind == EntryKind::ReflexTriggered {
                        used[i] = true;
                    }
                }
                None => return Err(format!("{task_id}: {} at {key} missing", e.kind)),
            }
        }
    }
    Ok(format!("byte-identical to golden ({} bytes); {scanned} step entries scanned, 0 omissions", doc.len()))
}

// 9 ---------------------------------------------------------------------------

fn dag_plan(n: usize, edges: &[(usize, usize)], labels: &[char]) -> Plan {
    let subtasks = (0..n)
        .map(|k| Subtask {
            id: labels[k].to_string(),
            description: String::new(),
            tool: "echo".into(),
            args: Map::new(),
            depends_on: edges
                .iter()
                .filter(|(_, to)| *to == k)
                .map(|(from, _)| labels[*from].to_string())
                .collect(),
            estimated_steps: 1,
            status: SubtaskStatus::Pending,
            fallback_tool: None,
        })
        .collect();
    Plan { task_id: "dag".into(), version: 1, subtasks }
}

fn respects(order: &[String], plan: &Plan) -> bool {
    let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    order.len() == plan.subtasks.len()
        && pos.len() == order.len()
        && plan.subtasks.iter().all(|s| {
            pos.get(s.id.as_str()).is_some_and(|me| {
                s.depends_on.iter().all(|d| pos.get(d.as_str()).is_some_and(|p| p < me))
            })
        })
}

fn next_permutation(v: &mut [String]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else { return false };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// First valid order in lexicographic enumeration of all permutations.
fn least_order(plan: &Plan) -> Option<Vec<String>> {
    let mut perm: Vec<String> = plan.subtasks.iter().map(|s| s.id.clone()).collect();
    perm.sort();
    loop {
        if respects(&perm, plan) {
            return Some(perm);
        }
        if !next_permutation(&mut perm) {
            return None;
        }
    }
}

fn dag_oracle() -> Outcome {
    let alphabet: Vec<char> = "abcdefgh".chars().collect();
    let mut instances: Vec<Plan> = Vec::new();
    for n in 1..=4 {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, p)| *p).collect();
            let forward: Vec<char> = alphabet[..n].to_vec();
            let backward: Vec<char> = forward.iter().rev().copied().collect();
            instances.push(dag_plan(n, &edges, &forward));
            instances.push(dag_plan(n, &edges, &backward));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 5..=8 {
        for _ in 0..100 {
            let density = rng.gen_range(0.1..0.6);
            let edges: Vec<_> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|_| rng.gen_bool(density))
                .collect();
            let mut labels = alphabet[..n].to_vec();
            for i in (1..n).rev() {
                labels.swap(i, rng.gen_range(0..=i));
            }
            let mut plan = dag_plan(n, &edges, &labels);
            let len = plan.subtasks.len();
            for i in (1..len).rev() {
                plan.subtasks.swap(i, rng.gen_range(0..=i));
            }
            instances.push(plan);
        }
    }
    for (k, plan) in instances.iter().enumerate() {
        let got = topological_order(plan);
        ensure(respects(&got, plan), || format!("instance {k}: {got:?} is not a topological order"))?;
        let least = least_order(plan).ok_or_else(|| format!("instance {k}: no order"))?;
        ensure(got == least, || format!("instance {k}: got {got:?}, least {least:?}"))?;
    }
    Ok(format!("{} DAGs with 1-8 nodes: valid and lexicographically least", instances.len()))
}

// 10 --------------------------------------------------------------------------

#[derive(Clone)]
enum Expr {
    Leaf(i64),
    Bin(char, Box<Expr>, Box<Expr>),
}

fn prec(op: char) -> u8 {
    if op == '+' || op == '-' { 1 } else { 2 }
}

fn render_min(e: &Expr) -> String {
    match e {
        Expr::Leaf(v) => v.to_string(),
        Expr::Bin(op, l, r) => {
            let wrap = |child: &Expr, right: bool| {
                let text = render_min(child);
                match child {
                    Expr::Bin(c, _, _)
                        if prec(*c) < prec(*op) || (right && prec(*c) == prec(*op) && (*op == '-' || *op == '/')) =>
                    {
                        format!("({text})")
                    }
                    _ => text,
                }
            };
            format!("{}{op}{}", wrap(l, false), wrap(r, true))
        }
    }
}

fn render_full(e: &Expr) -> String {
    match e {
        Expr::Leaf(v) => v.to_string(),
        Expr::Bin(op, l, r) => format!("({} {op} {})", render_full(l), render_full(r)),
    }
}

fn eval(e: &Expr) -> Option<BigRational> {
    match e {
        Expr::Leaf(v) => Some(BigRational::from_integer(BigInt::from(*v))),
        Expr::Bin(op, l, r) => {
            let (a, b) = (eval(l)?, eval(r)?);
            match op {
                '+' => Some(a + b),
                '-' => Some(a - b),
                '*' => Some(a * b),
                _ if b.is_zero() => None,
                _ => Some(a / b),
            }
        }
    }
}

/// Half-even at twelve fractional digits, trailing zeros stripped, no `-0`.
fn oracle_format(v: &BigRational) -> String {
    let scale = BigInt::from(10u64.pow(12));
    let mag = v.abs() * BigRational::from_integer(scale.clone());
    let floor = mag.floor().to_integer();
    let frac = mag - BigRational::from_integer(floor.clone());
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let odd = (&floor % BigInt::from(2)) == BigInt::from(1);
    let units = if frac > half || (frac == half && odd) { floor + 1 } else { floor };
    let int_part = &units / &scale;
    let mut digits = format!("{:012}", &units % &scale);
    while digits.ends_with('0') {
        digits.pop();
    }
    let sign = if v.is_negative() && !units.is_zero() { "-" } else { "" };
    if digits.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{digits}")
    }
}

fn trees(depth: u32) -> Vec<Expr> {
    let leaves: Vec<Expr> = [0, 1, 2, 7].into_iter().map(Expr::Leaf).collect();
    if depth == 1 {
        return leaves;
    }
    let smaller = trees(depth - 1);
    let mut out = leaves;
    for op in ['+', '-', '*', '/'] {
        for l in &smaller {
            for r in &smaller {
                out.push(Expr::Bin(op, Box::new(l.clone()), Box::new(r.clone())));
            }
        }
    }
    out
}

fn calc_oracle() -> Outcome {
    let mut env = make_env(&EnvConfig::default()).map_err(|e| e.to_string())?;
    let all = trees(3);
    let (mut matched, mut div_zero) = (0, 0);
    for e in &all {
        let expected = eval(e);
        for text in [render_min(e), render_full(e)] {
            let args = payload(json!({"expr": text}));
            let result = catch_unwind(AssertUnwindSafe(|| env.invoke("calc", &args)))
                .map_err(|_| format!("calc panicked on {text}"))?
                .map_err(|err| err.to_string())?;
            match &expected {
                Some(v) => {
                    let want = oracle_format(v);
                    ensure(result.ok && result.output == want, || {
                        format!("{text}: calc gave {:?}/{}, oracle {want}", result.output, result.error_class)
                    })?;
                    matched += 1;
                }
                None => {
                    ensure(!result.ok && result.error_class == "math", || {
                        format!("{text}: expected math error, got {:?}", result.error_class)
                    })?;
                    div_zero += 1;
                }
            }
        }
    }
    Ok(format!(
        "{} trees x 2 renderings: {matched} outputs match, {div_zero} divisions by zero give math",
        all.len()
    ))
}

// -----------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "chain integrity", chain_integrity),
        (2, "concurrent-append linearizability", concurrent_appends),
        (3, "replay determinism", replay_determinism),
        (4, "ReAct budget", react_budget),
        (5, "reflex vs replan separation", reflex_vs_replan),
        (7, "scalability stress", scalability_stress),
        (8, "golden journal", golden_journal),
        (9, "DAG oracle", dag_oracle),
        (10, "calc oracle", calc_oracle),
        // last, so it can audit every ledger above
        (6, "feedback fusion arithmetic", ffc_arithmetic),
    ];
    let mut results = Vec::new();
    for (n, name, check) in criteria {
        let outcome = catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        results.push((n, name, outcome));
    }
    results.sort_by_key(|(n, _, _)| *n);
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("ACCEPTANCE [{n}] {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("ACCEPTANCE [{n}] {name}: FAIL ({detail})");
            }
        }
    }
    println!("ACCEPTANCE summary: {}/{} passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
