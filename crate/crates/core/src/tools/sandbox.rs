//! Sandboxed subprocess execution: own working directory, full output
//! capture, wall-clock timeout with process-group kill, artifact diffing.

use std::collections::BTreeSet;
use std::io::Read;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::workspace::Workspace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitClass {
    Success,
    NonzeroExit(i32),
    Timeout,
    LaunchError,
}

impl ExitClass {
    pub fn label(self) -> &'static str {
        match self {
            ExitClass::Success => "success",
            ExitClass::NonzeroExit(_) => "nonzero_exit",
            ExitClass::Timeout => "timeout",
            ExitClass::LaunchError => "launch_error",
        }
    }

    pub fn code(self) -> Option<i32> {
        match self {
            ExitClass::NonzeroExit(code) => Some(code),
            ExitClass::Success => Some(0),
            _ => None,
        }
    }

    pub fn is_success(self) -> bool {
        self == ExitClass::Success
    }
}

#[derive(Clone, Debug)]
pub struct ExecutionResult {
    pub exit_class: ExitClass,
    pub stdout: String,
    pub stderr: String,
    pub wall_time_s: f64,
    /// Files created under the workspace root during the run, relative paths.
    pub artifacts: Vec<String>,
}

impl ExecutionResult {
    /// Ledger payload form for `exec_result` records.
    pub fn payload(&self) -> Value {
        json!({
            "exit_class": self.exit_class.label(),
            "exit_code": self.exit_class.code(),
            "stdout": self.stdout,
            "stderr": self.stderr,
            "wall_time_s": self.wall_time_s,
            "artifacts": self.artifacts,
        })
    }
}

fn snapshot(root: &Path) -> BTreeSet<String> {
    walkdir::WalkDir::new(root)
        .min_depth(1)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter_map(|e| {
            e.path()
                .strip_prefix(root)
                .ok()
                .map(|p| p.to_string_lossy().into_owned())
        })
        .collect()
}

fn spawn_reader<R: Read + Send + 'static>(mut source: R) -> JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = source.read_to_end(&mut buf);
        buf
    })
}

/// Runs `command` with cwd = workspace root. Never errors: every failure mode
/// lands in `exit_class`. On timeout the whole process group is killed.
/// Rewrites absolute workspace paths in captured output to `.` so interpreter
/// tracebacks stay identical no matter where the workspace lives.
fn scrub_root(mut text: String, root: &std::path::Path) -> String {
    let mut prefixes = vec![root.display().to_string()];
    if let Ok(resolved) = root.canonicalize() {
        let resolved = resolved.display().to_string();
        if !prefixes.contains(&resolved) {
            prefixes.push(resolved);
        }
    }
    for prefix in prefixes {
        if !prefix.is_empty() {
            text = text.replace(&prefix, ".");
        }
    }
    text
}

pub fn execute_sandbox(ws: &Workspace, command: &[String], timeout: Duration) -> ExecutionResult {
    assert!(!command.is_empty(), "command must be non-empty");
    assert!(timeout > Duration::ZERO, "timeout must be positive");
    let start = Instant::now();
    let before = snapshot(&ws.root);
    let mut cmd = Command::new(&command[0]);
    cmd.args(&command[1..])
        .current_dir(&ws.root)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    unsafe {
        cmd.pre_exec(|| {
            libc::setpgid(0, 0);
            Ok(())
        });
    }
    let mut child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) => {
            return ExecutionResult {
                exit_class: ExitClass::LaunchError,
                stdout: String::new(),
                stderr: format!("failed to launch {:?}: {e}", command[0]),
                wall_time_s: start.elapsed().as_secs_f64(),
                artifacts: Vec::new(),
            }
        }
    };
    let stdout_reader = spawn_reader(child.stdout.take().expect("stdout piped"));
    let stderr_reader = spawn_reader(child.stderr.take().expect("stderr piped"));
    let pgid = child.id() as i32;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) | Err(_) => {
                if start.elapsed() >= timeout {
                    unsafe {
                        libc::kill(-pgid, libc::SIGKILL);
                    }
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    };
    let stdout = scrub_root(
        String::from_utf8_lossy(&stdout_reader.join().unwrap_or_default()).into_owned(),
        &ws.root,
    );
    let stderr = scrub_root(
        String::from_utf8_lossy(&stderr_reader.join().unwrap_or_default()).into_owned(),
        &ws.root,
    );
    let exit_class = match status {
        None => ExitClass::Timeout,
        Some(s) if s.success() => ExitClass::Success,
        Some(s) => {
            ExitClass::NonzeroExit(s.code().unwrap_or_else(|| 128 + s.signal().unwrap_or(0)))
        }
    };
    let artifacts = snapshot(&ws.root).difference(&before).cloned().collect();
    ExecutionResult {
        exit_class,
        stdout,
        stderr,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts,
    }
}
