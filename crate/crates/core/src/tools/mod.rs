//! External-world actions: literature search with an offline fixture corpus,
//! relevance ranking, workspace management, and the sandboxed executor.

mod rank;
mod sandbox;
mod search;
mod workspace;

pub use rank::{extract_terms, rank_papers, RankedHit};
pub use sandbox::{execute_sandbox, ExecutionResult, ExitClass};
pub use search::{search_literature, OnlineSearchConfig, PaperHit, SearchBackend};
pub use workspace::{Workspace, WorkspaceManager};

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("search unavailable: {reason}")]
    SearchUnavailable { reason: String },
    #[error("search query must be non-empty")]
    EmptyQuery,
    #[error("task id {task_id:?} is not filesystem-safe")]
    UnsafeTaskId { task_id: String },
    #[error("filesystem operation failed: {0}")]
    FilesystemError(#[source] std::io::Error),
}
