//! Per-task sandbox workspaces with archived prior runs.

use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};

use super::ToolError;

#[derive(Clone, Debug)]
pub struct Workspace {
    pub task_id: String,
    pub root: PathBuf,
    pub created: String,
}

pub struct WorkspaceManager {
    base: PathBuf,
}

fn fs_safe(task_id: &str) -> bool {
    let mut chars = task_id.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphanumeric() => {}
        _ => return false,
    }
    task_id
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl WorkspaceManager {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into() }
    }

    pub fn base(&self) -> &Path {
        &self.base
    }

    /// Creates a fresh empty root `<base>/<task_id>-NNN`. Earlier roots for
    /// the same task stay in place as an archive; the suffix never reuses.
    pub fn init_workspace(&self, task_id: &str) -> Result<Workspace, ToolError> {
        if !fs_safe(task_id) {
            return Err(ToolError::UnsafeTaskId {
                task_id: task_id.to_string(),
            });
        }
        std::fs::create_dir_all(&self.base).map_err(ToolError::FilesystemError)?;
        let prefix = format!("{task_id}-");
        let mut next = 0u32;
        for entry in std::fs::read_dir(&self.base).map_err(ToolError::FilesystemError)? {
            let entry = entry.map_err(ToolError::FilesystemError)?;
            let name = entry.file_name();
            if let Some(n) = name
                .to_string_lossy()
                .strip_prefix(&prefix)
                .and_then(|s| s.parse::<u32>().ok())
            {
                next = next.max(n + 1);
            }
        }
        loop {
            let root = self.base.join(format!("{task_id}-{next:03}"));
            match std::fs::create_dir(&root) {
                Ok(()) => {
                    return Ok(Workspace {
                        task_id: task_id.to_string(),
                        root,
                        created: Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => next += 1,
                Err(e) => return Err(ToolError::FilesystemError(e)),
            }
        }
    }
}
