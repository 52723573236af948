//! Append-only System Memory: every artifact any stage produces lands here,
//! written through to a line-delimited ledger file for crash-safe replay.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::AgentRole;

#[derive(Debug, thiserror::Error)]
pub enum MemoryError {
    #[error("storage write failed: {0}")]
    PersistenceFailure(#[source] std::io::Error),
    #[error("ledger line {line}: {reason}")]
    CorruptLedger { line: usize, reason: String },
    #[error("ledger file not found: {path}")]
    MissingFile { path: PathBuf },
    #[error("task_id must be non-empty")]
    EmptyTaskId,
    #[error("unknown record kind {kind:?}")]
    UnknownKind { kind: String },
    #[error("payload for kind {kind:?} invalid: {detail}")]
    PayloadSchema { kind: String, detail: String },
    #[error("stage {attempted:?} precedes already-recorded {floor:?} for task {task_id:?}")]
    StageOrder {
        task_id: String,
        floor: Stage,
        attempted: Stage,
    },
}

/// Pipeline stages in order. `Score` and `Outcome` annotate rather than
/// advance the pipeline and may follow any stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Query,
    Knowledge,
    Plan,
    Data,
    Simulation,
    Score,
    Outcome,
}

impl Stage {
    pub fn pipeline_index(self) -> u8 {
        match self {
            Stage::Query => 0,
            Stage::Knowledge => 1,
            Stage::Plan => 2,
            Stage::Data => 3,
            Stage::Simulation => 4,
            Stage::Score => 5,
            Stage::Outcome => 6,
        }
    }

    pub fn is_annotation(self) -> bool {
        matches!(self, Stage::Score | Stage::Outcome)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MemoryRecord {
    pub task_id: String,
    pub seq: u64,
    pub stage: Stage,
    pub role: AgentRole,
    pub kind: String,
    pub timestamp: String,
    pub payload: Value,
}

#[derive(Clone, Copy, PartialEq)]
enum FieldKind {
    Str,
    Num,
    Bool,
    Arr,
    Obj,
}

use FieldKind::{Arr, Bool, Num, Obj, Str};

/// Required payload fields per record kind. Extra fields are allowed.
const KIND_SCHEMAS: &[(&str, &[(&str, FieldKind)])] = &[
    ("user_query", &[("query", Str), ("domain_tags", Arr)]),
    (
        "agent_exchange",
        &[("strategy", Str), ("prompt", Str), ("response", Str)],
    ),
    (
        "search_call",
        &[("query", Str), ("limit", Num), ("hits", Arr)],
    ),
    ("literature_digest", &[("hits", Arr)]),
    (
        "plan_draft",
        &[
            ("objective", Str),
            ("variables", Str),
            ("constraints", Str),
            ("algorithm_steps", Arr),
            ("baselines", Arr),
            ("evaluation_protocol", Str),
            ("formulation_complete", Bool),
        ],
    ),
    ("plan_review", &[("verdict", Str), ("notes", Str)]),
    (
        "plan_final",
        &[
            ("objective", Str),
            ("variables", Str),
            ("constraints", Str),
            ("algorithm_steps", Arr),
            ("baselines", Arr),
            ("evaluation_protocol", Str),
            ("formulation_complete", Bool),
            ("approved", Bool),
        ],
    ),
    ("data_script", &[("filename", Str), ("script", Str)]),
    (
        "exec_result",
        &[
            ("exit_class", Str),
            ("stdout", Str),
            ("stderr", Str),
            ("wall_time_s", Num),
            ("artifacts", Arr),
        ],
    ),
    ("data_review", &[("passed", Bool), ("checks", Arr)]),
    ("dataset_manifest", &[("manifest", Obj)]),
    (
        "sim_script",
        &[("filename", Str), ("script", Str), ("attempt", Num)],
    ),
    (
        "sim_feedback",
        &[("branch", Str), ("feedback", Str), ("attempt", Num)],
    ),
    (
        "score_report",
        &[
            ("branch", Str),
            ("score", Num),
            ("solved", Bool),
            ("checks", Arr),
            ("attempt", Num),
        ],
    ),
    ("protocol_warning", &[("message", Str)]),
    (
        "outcome",
        &[
            ("status", Str),
            ("attempts_used", Num),
            ("formulation_flag", Bool),
            ("generated_flag", Bool),
            ("executed_flag", Bool),
            ("first_try_flag", Bool),
        ],
    ),
];

fn validate_payload(kind: &str, payload: &Value) -> Result<(), MemoryError> {
    let schema = KIND_SCHEMAS
        .iter()
        .find(|(k, _)| *k == kind)
        .map(|(_, fields)| *fields)
        .ok_or_else(|| MemoryError::UnknownKind {
            kind: kind.to_string(),
        })?;
    let obj = payload
        .as_object()
        .ok_or_else(|| MemoryError::PayloadSchema {
            kind: kind.to_string(),
            detail: "payload must be a JSON object".to_string(),
        })?;
    for (field, want) in schema {
        let value = obj.get(*field).ok_or_else(|| MemoryError::PayloadSchema {
            kind: kind.to_string(),
            detail: format!("missing field {field:?}"),
        })?;
        let ok = match want {
            Str => value.is_string(),
            Num => value.is_number(),
            Bool => value.is_boolean(),
            Arr => value.is_array(),
            Obj => value.is_object(),
        };
        if !ok {
            return Err(MemoryError::PayloadSchema {
                kind: kind.to_string(),
                detail: format!("field {field:?} has the wrong type"),
            });
        }
    }
    Ok(())
}

/// One record as a canonical JSON line: keys sorted, timestamp stripped, and
/// the volatile `wall_time_s` removed from `exec_result` payloads.
pub fn canonical_line(record: &MemoryRecord) -> String {
    let mut value = serde_json::to_value(record).expect("record serializes");
    let obj = value.as_object_mut().expect("record is an object");
    obj.remove("timestamp");
    if record.kind == "exec_result" {
        if let Some(payload) = obj.get_mut("payload").and_then(Value::as_object_mut) {
            payload.remove("wall_time_s");
        }
    }
    value.to_string()
}

#[derive(Debug)]
pub struct SystemMemory {
    records: Vec<MemoryRecord>,
    next_seq: HashMap<String, u64>,
    stage_floor: HashMap<String, u8>,
    path: PathBuf,
    file: File,
}

impl SystemMemory {
    /// Starts an empty ledger at `path`, truncating any existing file.
    pub fn create(path: impl Into<PathBuf>) -> Result<Self, MemoryError> {
        let path = path.into();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(MemoryError::PersistenceFailure)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(MemoryError::PersistenceFailure)?;
        Ok(Self {
            records: Vec::new(),
            next_seq: HashMap::new(),
            stage_floor: HashMap::new(),
            path,
            file,
        })
    }

    /// Replays an existing ledger file, re-validating every line.
    pub fn restore(path: impl Into<PathBuf>) -> Result<Self, MemoryError> {
        let path = path.into();
        let file = File::open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                MemoryError::MissingFile { path: path.clone() }
            } else {
                MemoryError::PersistenceFailure(e)
            }
        })?;
        let mut memory = Self {
            records: Vec::new(),
            next_seq: HashMap::new(),
            stage_floor: HashMap::new(),
            path: path.clone(),
            file: OpenOptions::new()
                .append(true)
                .open(&path)
                .map_err(MemoryError::PersistenceFailure)?,
        };
        for (ix, line) in BufReader::new(file).lines().enumerate() {
            let line_no = ix + 1;
            let corrupt = |reason: String| MemoryError::CorruptLedger {
                line: line_no,
                reason,
            };
            let line = line.map_err(|e| corrupt(e.to_string()))?;
            if line.trim().is_empty() {
                return Err(corrupt("blank line".to_string()));
            }
            let record: MemoryRecord =
                serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            memory.admit(&record).map_err(|e| corrupt(e.to_string()))?;
            memory.push(record);
        }
        Ok(memory)
    }

    /// Checks record invariants against current state without mutating it.
    fn admit(&self, record: &MemoryRecord) -> Result<(), MemoryError> {
        if record.task_id.is_empty() {
            return Err(MemoryError::EmptyTaskId);
        }
        validate_payload(&record.kind, &record.payload)?;
        let expected = self.next_seq.get(&record.task_id).copied().unwrap_or(0);
        if record.seq != expected {
            return Err(MemoryError::CorruptLedger {
                line: 0,
                reason: format!(
                    "task {:?} seq {} where {} expected",
                    record.task_id, record.seq, expected
                ),
            });
        }
        if !record.stage.is_annotation() {
            let floor = self.stage_floor.get(&record.task_id).copied().unwrap_or(0);
            if record.stage.pipeline_index() < floor {
                let floor_stage = [
                    Stage::Query,
                    Stage::Knowledge,
                    Stage::Plan,
                    Stage::Data,
                    Stage::Simulation,
                ][floor as usize];
                return Err(MemoryError::StageOrder {
                    task_id: record.task_id.clone(),
                    floor: floor_stage,
                    attempted: record.stage,
                });
            }
        }
        Ok(())
    }

    fn push(&mut self, record: MemoryRecord) {
        self.next_seq.insert(record.task_id.clone(), record.seq + 1);
        if !record.stage.is_annotation() {
            self.stage_floor
                .insert(record.task_id.clone(), record.stage.pipeline_index());
        }
        self.records.push(record);
    }

    /// Appends one record, durable before return. Returns its seq.
    pub fn append(
        &mut self,
        task_id: &str,
        stage: Stage,
        role: AgentRole,
        kind: &str,
        payload: Value,
    ) -> Result<u64, MemoryError> {
        let record = MemoryRecord {
            task_id: task_id.to_string(),
            seq: self.next_seq.get(task_id).copied().unwrap_or(0),
            stage,
            role,
            kind: kind.to_string(),
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true),
            payload,
        };
        self.admit(&record)?;
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .and_then(|_| self.file.sync_data())
            .map_err(MemoryError::PersistenceFailure)?;
        let seq = record.seq;
        self.push(record);
        Ok(seq)
    }

    /// All records for `task_id` matching the optional filters, in seq order.
    pub fn query(
        &self,
        task_id: &str,
        stage: Option<Stage>,
        kind: Option<&str>,
    ) -> Vec<&MemoryRecord> {
        self.records
            .iter()
            .filter(|r| r.task_id == task_id)
            .filter(|r| stage.is_none_or(|s| r.stage == s))
            .filter(|r| kind.is_none_or(|k| r.kind == k))
            .collect()
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn persistence_path(&self) -> &Path {
        &self.path
    }

    /// Entire ledger in canonical form, one line per record.
    pub fn canonical_dump(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&canonical_line(record));
            out.push('\n');
        }
        out
    }

    pub fn write_canonical(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.canonical_dump())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn mem(dir: &tempfile::TempDir) -> SystemMemory {
        SystemMemory::create(dir.path().join("ledger.jsonl")).unwrap()
    }

    fn warn(msg: &str) -> Value {
        json!({ "message": msg })
    }

    #[test]
    fn seq_is_per_task_and_gapless() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = mem(&dir);
        let a = |m: &mut SystemMemory, task: &str| {
            m.append(
                task,
                Stage::Query,
                AgentRole::Literature,
                "protocol_warning",
                warn("x"),
            )
            .unwrap()
        };
        assert_eq!(a(&mut m, "t1"), 0);
        assert_eq!(a(&mut m, "t1"), 1);
        assert_eq!(a(&mut m, "t2"), 0);
        assert_eq!(a(&mut m, "t1"), 2);
    }

    #[test]
    fn unknown_kind_and_bad_payload_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = mem(&dir);
        let err = m
            .append(
                "t1",
                Stage::Query,
                AgentRole::Literature,
                "mystery",
                json!({}),
            )
            .unwrap_err();
        assert!(matches!(err, MemoryError::UnknownKind { .. }));
        let err = m
            .append(
                "t1",
                Stage::Query,
                AgentRole::Literature,
                "user_query",
                json!({ "query": "q" }),
            )
            .unwrap_err();
        assert!(matches!(err, MemoryError::PayloadSchema { .. }));
        assert!(m.records().is_empty());
    }

    #[test]
    fn stage_cannot_move_backwards_except_annotations() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = mem(&dir);
        m.append(
            "t1",
            Stage::Data,
            AgentRole::Coding,
            "protocol_warning",
            warn("a"),
        )
        .unwrap();
        let err = m
            .append(
                "t1",
                Stage::Plan,
                AgentRole::Planning,
                "protocol_warning",
                warn("b"),
            )
            .unwrap_err();
        assert!(matches!(err, MemoryError::StageOrder { .. }));
        m.append(
            "t1",
            Stage::Score,
            AgentRole::Scoring,
            "protocol_warning",
            warn("c"),
        )
        .unwrap();
        m.append(
            "t1",
            Stage::Data,
            AgentRole::Coding,
            "protocol_warning",
            warn("d"),
        )
        .unwrap();
        m.append(
            "t1",
            Stage::Simulation,
            AgentRole::Coding,
            "protocol_warning",
            warn("e"),
        )
        .unwrap();
    }

    #[test]
    fn empty_task_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = mem(&dir);
        let err = m
            .append(
                "",
                Stage::Query,
                AgentRole::Literature,
                "protocol_warning",
                warn("x"),
            )
            .unwrap_err();
        assert!(matches!(err, MemoryError::EmptyTaskId));
    }

    #[test]
    fn restore_round_trips_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let canonical = {
            let mut m = SystemMemory::create(&path).unwrap();
            m.append(
                "t1",
                Stage::Query,
                AgentRole::Literature,
                "user_query",
                json!({ "query": "maximize sum rate", "domain_tags": ["swipt"] }),
            )
            .unwrap();
            m.append(
                "t1",
                Stage::Knowledge,
                AgentRole::Literature,
                "literature_digest",
                json!({ "hits": [{ "title": "a", "score": 0.5 }] }),
            )
            .unwrap();
            m.canonical_dump()
        };
        let restored = SystemMemory::restore(&path).unwrap();
        assert_eq!(restored.records().len(), 2);
        assert_eq!(restored.canonical_dump(), canonical);
        assert_eq!(
            restored.records()[0].payload["query"],
            json!("maximize sum rate")
        );
    }

    #[test]
    fn restore_reports_corrupt_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        {
            let mut m = SystemMemory::create(&path).unwrap();
            m.append(
                "t1",
                Stage::Query,
                AgentRole::Literature,
                "protocol_warning",
                warn("x"),
            )
            .unwrap();
        }
        let mut raw = std::fs::read_to_string(&path).unwrap();
        raw.push_str("{\"task_id\": \"t1\", truncated");
        std::fs::write(&path, raw).unwrap();
        match SystemMemory::restore(&path).unwrap_err() {
            MemoryError::CorruptLedger { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn restore_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = SystemMemory::restore(dir.path().join("absent.jsonl")).unwrap_err();
        assert!(matches!(err, MemoryError::MissingFile { .. }));
    }

    #[test]
    fn restore_empty_file_is_empty_memory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        std::fs::write(&path, "").unwrap();
        let m = SystemMemory::restore(&path).unwrap();
        assert!(m.records().is_empty());
    }

    #[test]
    fn query_filters_by_stage_and_kind() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = mem(&dir);
        m.append(
            "t1",
            Stage::Query,
            AgentRole::Literature,
            "user_query",
            json!({ "query": "q", "domain_tags": [] }),
        )
        .unwrap();
        m.append(
            "t1",
            Stage::Plan,
            AgentRole::Planning,
            "protocol_warning",
            warn("a"),
        )
        .unwrap();
        m.append(
            "t1",
            Stage::Plan,
            AgentRole::Planning,
            "protocol_warning",
            warn("b"),
        )
        .unwrap();
        assert_eq!(m.query("t1", None, None).len(), 3);
        assert_eq!(m.query("t1", Some(Stage::Plan), None).len(), 2);
        assert_eq!(m.query("t1", None, Some("user_query")).len(), 1);
        assert_eq!(
            m.query("t1", Some(Stage::Query), Some("protocol_warning"))
                .len(),
            0
        );
        assert!(m.query("missing", None, None).is_empty());
        let seqs: Vec<u64> = m.query("t1", None, None).iter().map(|r| r.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2]);
    }

    #[test]
    fn canonical_line_strips_timestamp_and_wall_time() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = mem(&dir);
        m.append(
            "t1",
            Stage::Data,
            AgentRole::Coding,
            "exec_result",
            json!({
                "exit_class": "success",
                "stdout": "",
                "stderr": "",
                "wall_time_s": 0.123,
                "artifacts": ["dataset_manifest.json"],
            }),
        )
        .unwrap();
        let line = canonical_line(&m.records()[0]);
        assert!(!line.contains("timestamp"));
        assert!(!line.contains("wall_time_s"));
        assert!(line.contains("dataset_manifest.json"));
    }
}
