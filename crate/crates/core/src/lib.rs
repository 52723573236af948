//! Multi-agent pipeline for wireless network optimization tasks.
//!
//! A task travels through four stages: knowledge acquisition against a paper
//! corpus, plan formulation under instructor review, dataset preparation with
//! rule-based checks, and simulation generation judged by physical-feasibility
//! scoring with error-handling and validity feedback branches. Every artifact
//! lands in an append-only system memory backed by a JSONL ledger, and a
//! batch harness reduces corpus runs to the benchmark metrics table.

pub mod agents;
pub mod harness;
pub mod memory;
pub mod orchestrator;
pub mod tools;
pub mod validation;

pub use agents::{AgentError, AgentRole, BackendConfig, BackendMode, ChatBackend, PromptStrategy};
pub use harness::{
    compute_metrics, load_corpus, run_corpus, BatchSetup, CorpusMetrics, CorpusTask, HarnessError,
    RunLedgerEntry,
};
pub use memory::{MemoryError, MemoryRecord, Stage, SystemMemory};
pub use orchestrator::{
    run_task, OrchestratorConfig, TaskOutcome, TaskRuntime, TaskSpec, TaskStatus,
};
pub use tools::{SearchBackend, ToolError, WorkspaceManager};
pub use validation::{FeedbackBranch, ScoreReport, ValidationError};
