//! Batch evaluation: loads a task corpus, runs each task through the full
//! pipeline with per-task isolation, and reduces the outcomes to the
//! benchmark metrics table.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use wavecrew_phy::solvers::SweepResult;
use wavecrew_phy::{GainMap, ScenarioConfig};

use crate::agents::{
    AgentError, BackendConfig, BackendMode, ChatBackend, LiveBackend, ScriptedBackend,
};
use crate::memory::{Stage, SystemMemory};
use crate::orchestrator::{
    run_task, OrchestratorConfig, TaskOutcome, TaskRuntime, TaskSpec, TaskStatus,
};
use crate::tools::{SearchBackend, WorkspaceManager};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("corpus parse failed at line {line}, column {column}: {reason}")]
    CorpusParse {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("duplicate task id {task_id:?} in corpus")]
    DuplicateTaskId { task_id: String },
    #[error("no outcomes to summarize")]
    EmptyLedger,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusTask {
    pub task_id: String,
    pub query: String,
    #[serde(default)]
    pub domain_tags: Vec<String>,
    /// Fixture-set directory (relative to the fixtures root) holding the
    /// scripted turns and the offline paper corpus for this task.
    pub fixtures_ref: String,
}

impl CorpusTask {
    pub fn to_spec(&self) -> TaskSpec {
        TaskSpec {
            task_id: self.task_id.clone(),
            query: self.query.clone(),
            domain_tags: self.domain_tags.clone(),
            scenario_override: None,
        }
    }
}

/// Reads a corpus file: a JSON array of tasks with unique ids.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusTask>, HarnessError> {
    let raw = std::fs::read_to_string(path)?;
    let tasks: Vec<CorpusTask> =
        serde_json::from_str(&raw).map_err(|e| HarnessError::CorpusParse {
            line: e.line(),
            column: e.column(),
            reason: e.to_string(),
        })?;
    let mut seen = BTreeSet::new();
    for task in &tasks {
        if !seen.insert(task.task_id.as_str()) {
            return Err(HarnessError::DuplicateTaskId {
                task_id: task.task_id.clone(),
            });
        }
    }
    Ok(tasks)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunLedgerEntry {
    pub task_id: String,
    pub outcome: TaskOutcome,
}

/// Shared configuration for a batch run. Per-task state (memory, workspace,
/// backend) is constructed fresh inside each worker.
pub struct BatchSetup {
    pub orchestrator: OrchestratorConfig,
    pub backend: BackendConfig,
    pub fixtures_root: PathBuf,
    pub out_dir: PathBuf,
    pub scenario: ScenarioConfig,
    pub sandbox_timeout: Duration,
}

pub fn make_backend(
    cfg: &BackendConfig,
    set_dir: &Path,
) -> Result<Box<dyn ChatBackend>, AgentError> {
    cfg.validate()?;
    Ok(match cfg.mode {
        BackendMode::Scripted => Box::new(ScriptedBackend::new(set_dir.join("turns"))),
        BackendMode::Live => Box::new(LiveBackend::new(cfg.clone())?),
    })
}

/// Runs every task, fanning out over at most `parallelism` worker threads.
/// Results come back in corpus order; per-task setup failures become
/// `Aborted` outcomes so one bad task cannot sink the batch.
pub fn run_corpus(
    tasks: &[CorpusTask],
    setup: &BatchSetup,
    parallelism: usize,
) -> Vec<RunLedgerEntry> {
    let n = tasks.len();
    let slots: Vec<Mutex<Option<RunLedgerEntry>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let workers = parallelism.max(1).min(n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let ix = cursor.fetch_add(1, Ordering::Relaxed);
                if ix >= n {
                    break;
                }
                let entry = run_one(&tasks[ix], setup);
                *slots[ix].lock().unwrap() = Some(entry);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap()
                .expect("every slot filled by a worker")
        })
        .collect()
}

fn run_one(task: &CorpusTask, setup: &BatchSetup) -> RunLedgerEntry {
    let outcome = try_run(task, setup).unwrap_or_else(|reason| TaskOutcome {
        status: TaskStatus::Aborted {
            stage: Stage::Query,
            reason,
        },
        attempts_used: 0,
        final_score: None,
        formulation_flag: false,
        generated_flag: false,
        executed_flag: false,
        first_try_flag: false,
    });
    RunLedgerEntry {
        task_id: task.task_id.clone(),
        outcome,
    }
}

fn try_run(task: &CorpusTask, setup: &BatchSetup) -> Result<TaskOutcome, String> {
    let task_dir = setup.out_dir.join(&task.task_id);
    std::fs::create_dir_all(&task_dir)
        .map_err(|e| format!("create {}: {e}", task_dir.display()))?;
    let mut memory =
        SystemMemory::create(task_dir.join("ledger.jsonl")).map_err(|e| e.to_string())?;
    let workspaces = WorkspaceManager::new(task_dir.join("work"));
    let set_dir = setup.fixtures_root.join(&task.fixtures_ref);
    let mut backend = make_backend(&setup.backend, &set_dir).map_err(|e| e.to_string())?;
    let search = SearchBackend::Offline {
        corpus_dir: set_dir.join("papers"),
    };
    let outcome = {
        let mut rt = TaskRuntime {
            backend: backend.as_mut(),
            search: &search,
            workspaces: &workspaces,
            memory: &mut memory,
            scenario: setup.scenario.clone(),
            sandbox_timeout: setup.sandbox_timeout,
            max_react_steps: setup.backend.max_react_steps,
        };
        run_task(&task.to_spec(), &setup.orchestrator, &mut rt)
    };
    memory
        .write_canonical(&task_dir.join("ledger.canonical.jsonl"))
        .map_err(|e| e.to_string())?;
    let mut pretty = serde_json::to_string_pretty(&outcome).expect("outcome serializes");
    pretty.push('\n');
    std::fs::write(task_dir.join("outcome.json"), pretty).map_err(|e| e.to_string())?;
    Ok(outcome)
}

pub fn write_run_ledger(entries: &[RunLedgerEntry], path: &Path) -> std::io::Result<()> {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateStat {
    pub numerator: u32,
    pub denominator: u32,
}

impl RateStat {
    pub fn fraction(self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            f64::from(self.numerator) / f64::from(self.denominator)
        }
    }

    /// Table cell: "72.00% (18/25)".
    pub fn cell(self) -> String {
        format!(
            "{:.2}% ({}/{})",
            100.0 * self.fraction(),
            self.numerator,
            self.denominator
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub formulation: RateStat,
    pub generation: RateStat,
    pub execution: RateStat,
    pub solved: RateStat,
    pub first_try: RateStat,
    pub avg_attempts: f64,
}

pub const METRIC_LABELS: [&str; 6] = [
    "Problem Formulation Rate",
    "Code Generation Rate",
    "Code Execution Rate",
    "Solution Solved Rate",
    "1st-Try Success Rate",
    "Avg. Attempt Times",
];

pub fn compute_metrics(entries: &[RunLedgerEntry]) -> Result<CorpusMetrics, HarnessError> {
    if entries.is_empty() {
        return Err(HarnessError::EmptyLedger);
    }
    let n = entries.len() as u32;
    let count = |f: fn(&TaskOutcome) -> bool| RateStat {
        numerator: entries.iter().filter(|e| f(&e.outcome)).count() as u32,
        denominator: n,
    };
    let total_attempts: u32 = entries.iter().map(|e| e.outcome.attempts_used).sum();
    Ok(CorpusMetrics {
        formulation: count(|o| o.formulation_flag),
        generation: count(|o| o.generated_flag),
        execution: count(|o| o.executed_flag),
        solved: count(TaskOutcome::is_solved),
        first_try: count(|o| o.first_try_flag),
        avg_attempts: f64::from(total_attempts) / f64::from(n),
    })
}

pub fn render_table(metrics: &CorpusMetrics) -> String {
    let cells = [
        metrics.formulation.cell(),
        metrics.generation.cell(),
        metrics.execution.cell(),
        metrics.solved.cell(),
        metrics.first_try.cell(),
        format!("{:.2}", metrics.avg_attempts),
    ];
    let width = METRIC_LABELS.iter().map(|l| l.len()).max().unwrap();
    let mut out = format!("{:<width$}  Value\n", "Metric");
    for (label, cell) in METRIC_LABELS.iter().zip(cells) {
        out.push_str(&format!("{label:<width$}  {cell}\n"));
    }
    out
}

pub enum Report<'a> {
    Metrics(&'a CorpusMetrics),
    Sweep(&'a SweepResult),
    GainMap(&'a GainMap),
}

/// Writes the report's files under `out_dir` and returns their paths.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    match report {
        Report::Metrics(metrics) => {
            let text_path = out_dir.join("metrics.txt");
            std::fs::write(&text_path, render_table(metrics))?;
            let json_path = out_dir.join("metrics.json");
            let mut pretty = serde_json::to_string_pretty(metrics).expect("metrics serialize");
            pretty.push('\n');
            std::fs::write(&json_path, pretty)?;
            Ok(vec![text_path, json_path])
        }
        Report::Sweep(sweep) => {
            let path = out_dir.join("sweep.csv");
            let mut file = std::fs::File::create(&path)?;
            sweep.write_csv(&mut file)?;
            Ok(vec![path])
        }
        Report::GainMap(map) => {
            let path = out_dir.join("gain_map.csv");
            let mut file = std::fs::File::create(&path)?;
            map.write_csv(&mut file)?;
            Ok(vec![path])
        }
    }
}
