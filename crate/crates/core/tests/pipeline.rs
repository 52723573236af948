//! End-to-end pipeline runs against scripted fixture sets authored on the fly.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::json;

use wavecrew_core::agents::BackendConfig;
use wavecrew_core::harness::{run_corpus, BatchSetup, CorpusTask};
use wavecrew_core::memory::{Stage, SystemMemory};
use wavecrew_core::orchestrator::{OrchestratorConfig, TaskStatus};
use wavecrew_phy::ScenarioConfig;

const TASK_QUERY: &str = "Maximize the downlink sum rate for two information receivers \
while two energy receivers each harvest at least 50 nW under the station power budget \
in a SWIPT system.";

const LIT_TURN_0: &str = "THOUGHT: Prior SWIPT beamforming designs should anchor the plan.\n\
ACTION: search {\"query\": \"swipt beamforming energy harvesting\", \"limit\": 5}\n";

const LIT_TURN_1: &str = "FINAL_ANSWER: Collected the relevant beamforming references.\n";

const PLAN_DRAFT: &str = "Plan follows.\n\n\
OBJECTIVE: Maximize the weighted sum rate across both information receivers.\n\
VARIABLES: Transmit precoding vectors w_1 and w_2 at the base station.\n\
CONSTRAINTS: Total transmit power at most the 43 dBm budget; each energy receiver \
harvests at least 50 nW.\n\
ALGORITHM:\n\
1. Load the channel matrices from the prepared dataset.\n\
2. Design precoders with penalized successive convex approximation.\n\
3. Evaluate sum rate, harvested power, and the power sweep.\n\
BASELINES: zf, wmmse\n\
EVALUATION: Compare the achieved sum rate against both baselines over a 30 to 43 dBm sweep.\n";

const PLAN_DRAFT_INCOMPLETE: &str = "OBJECTIVE: Maximize the weighted sum rate.\n\
VARIABLES: Transmit precoding vectors w_1 and w_2.\n\
ALGORITHM:\n1. Solve the problem.\n";

const REVIEW_APPROVE: &str = "The formulation states the objective, the variables, and \
both constraints.\nVERDICT: APPROVE\n";

const REVIEW_REVISE: &str = "VERDICT: REVISE\nThe draft never states the harvested-energy \
constraint. Add the per-receiver target.\n";

const DATA_SCRIPT_REPLY: &str = r#"Preparing the channel dataset.

```python
import json

manifest = {
    "arrays": [
        {"name": "H", "shape": [3, 4], "count": 2},
        {"name": "G", "shape": [3, 4], "count": 2},
    ],
    "probe": {
        "near_m": 5.0,
        "near_power_w": 2.1e-07,
        "far_m": 20.0,
        "far_power_w": 1.9e-09,
    },
}
with open("dataset_manifest.json", "w") as handle:
    json.dump(manifest, handle, indent=2)
print("dataset ready")
```
"#;

const SIM_GOOD_REPLY: &str = r#"Running the solver and writing results.

```python
import json

results = {
    "rates_bps_hz": [8.42, 7.11],
    "harvested_w": [6.4e-08, 7.9e-08],
    "total_power_w": 19.91,
    "sweep": [
        {"p_dbm": 30.0, "rate": 12.1},
        {"p_dbm": 35.0, "rate": 14.8},
        {"p_dbm": 40.0, "rate": 17.6},
    ],
    "baselines": {"zf_rate": 11.9, "wmmse_rate": 13.4},
}
with open("results.json", "w") as handle:
    json.dump(results, handle, indent=2)
print("simulation complete")
```
"#;

const SIM_BROKEN_REPLY: &str = r#"Running the solver.

```python
import json

def run(:
    pass
```
"#;

const SIM_EH_FAIL_REPLY: &str = r#"Running the solver.

```python
import json

results = {
    "rates_bps_hz": [8.42, 7.11],
    "harvested_w": [3.0e-08, 4.1e-08],
    "total_power_w": 19.91,
}
with open("results.json", "w") as handle:
    json.dump(results, handle, indent=2)
```
"#;

const PAPERS: &str = r#"[
  {
    "title": "Transmit beamforming for simultaneous wireless information and power transfer",
    "abstract": "Joint beamforming maximizing the sum rate of information receivers while meeting harvested energy targets at energy receivers under a transmit power budget.",
    "year": 2023,
    "venue": "IEEE Transactions on Wireless Communications",
    "source_id": "swipt-0001"
  },
  {
    "title": "Energy harvesting receivers in MISO downlinks",
    "abstract": "Rectenna sensitivity and harvested power scaling with array gain in downlink systems.",
    "year": 2021,
    "venue": "IEEE Communications Letters",
    "source_id": "swipt-0002"
  },
  {
    "title": "Weighted MMSE approaches to sum rate maximization",
    "abstract": "The classical WMMSE iteration for multiuser MIMO sum rate problems.",
    "year": 2020,
    "venue": "IEEE Transactions on Signal Processing",
    "source_id": "wmmse-0001"
  }
]
"#;

fn write(set: &Path, rel: &str, content: &str) {
    let path = set.join(rel);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, content).unwrap();
}

fn write_common_turns(set: &Path) {
    write(set, "turns/literature/stage1/iter0.txt", LIT_TURN_0);
    write(set, "turns/literature/stage1/iter1.txt", LIT_TURN_1);
    write(set, "turns/planning/stage2/iter0.txt", PLAN_DRAFT);
    write(
        set,
        "turns/planning_instructor/stage2/iter0.txt",
        REVIEW_APPROVE,
    );
    write(set, "turns/coding/stage3/iter0.txt", DATA_SCRIPT_REPLY);
    write(set, "papers/swipt.json", PAPERS);
}

fn write_happy_set(set: &Path) {
    write_common_turns(set);
    write(set, "turns/coding/stage4/iter0.txt", SIM_GOOD_REPLY);
}

fn write_retry_set(set: &Path) {
    write_common_turns(set);
    write(set, "turns/coding/stage4/iter0.txt", SIM_BROKEN_REPLY);
    write(set, "turns/coding/stage4/iter1.txt", SIM_GOOD_REPLY);
}

fn write_exhaust_set(set: &Path) {
    write_common_turns(set);
    for i in 0..3 {
        write(
            set,
            &format!("turns/coding/stage4/iter{i}.txt"),
            SIM_EH_FAIL_REPLY,
        );
    }
}

fn write_revise_set(set: &Path) {
    write(set, "turns/literature/stage1/iter0.txt", LIT_TURN_0);
    write(set, "turns/literature/stage1/iter1.txt", LIT_TURN_1);
    write(
        set,
        "turns/planning/stage2/iter0.txt",
        PLAN_DRAFT_INCOMPLETE,
    );
    write(
        set,
        "turns/planning_instructor/stage2/iter0.txt",
        REVIEW_REVISE,
    );
    write(set, "turns/planning/stage2/iter1.txt", PLAN_DRAFT);
    write(
        set,
        "turns/planning_instructor/stage2/iter1.txt",
        REVIEW_APPROVE,
    );
    write(set, "turns/coding/stage3/iter0.txt", DATA_SCRIPT_REPLY);
    write(set, "turns/coding/stage4/iter0.txt", SIM_GOOD_REPLY);
    write(set, "papers/swipt.json", PAPERS);
}

fn task(task_id: &str, fixtures_ref: &str) -> CorpusTask {
    CorpusTask {
        task_id: task_id.to_string(),
        query: TASK_QUERY.to_string(),
        domain_tags: vec!["swipt".to_string()],
        fixtures_ref: fixtures_ref.to_string(),
    }
}

fn setup(fixtures_root: &Path, out_dir: &Path) -> BatchSetup {
    BatchSetup {
        orchestrator: OrchestratorConfig::default(),
        backend: BackendConfig::default(),
        fixtures_root: fixtures_root.to_path_buf(),
        out_dir: out_dir.to_path_buf(),
        scenario: ScenarioConfig::default(),
        sandbox_timeout: Duration::from_secs(60),
    }
}

struct Run {
    _dir: tempfile::TempDir,
    out: PathBuf,
}

fn run_set(writer: fn(&Path), task_id: &str) -> (Run, wavecrew_core::orchestrator::TaskOutcome) {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    writer(&fixtures.join("set_a"));
    let out = dir.path().join("out");
    let entries = run_corpus(&[task(task_id, "set_a")], &setup(&fixtures, &out), 1);
    assert_eq!(entries.len(), 1);
    let outcome = entries.into_iter().next().unwrap().outcome;
    (Run { _dir: dir, out }, outcome)
}

#[test]
fn happy_path_solves_on_first_attempt() {
    let (run, outcome) = run_set(write_happy_set, "swipt-base");
    assert_eq!(outcome.status, TaskStatus::Solved);
    assert_eq!(outcome.attempts_used, 1);
    assert_eq!(outcome.final_score, Some(1.0));
    assert!(outcome.formulation_flag);
    assert!(outcome.generated_flag);
    assert!(outcome.executed_flag);
    assert!(outcome.first_try_flag);

    let memory = SystemMemory::restore(run.out.join("swipt-base/ledger.jsonl")).unwrap();
    for (ix, record) in memory.records().iter().enumerate() {
        assert_eq!(record.seq, ix as u64);
        assert_eq!(record.task_id, "swipt-base");
    }
    let kinds: Vec<&str> = memory.records().iter().map(|r| r.kind.as_str()).collect();
    assert_eq!(kinds[0], "user_query");
    assert_eq!(*kinds.last().unwrap(), "outcome");
    for expected in [
        "search_call",
        "literature_digest",
        "plan_draft",
        "plan_review",
        "plan_final",
        "data_script",
        "data_review",
        "dataset_manifest",
        "sim_script",
        "exec_result",
        "score_report",
    ] {
        assert!(kinds.contains(&expected), "missing kind {expected}");
    }
    let reports = memory.query("swipt-base", Some(Stage::Score), Some("score_report"));
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].payload["solved"], json!(true));
    assert_eq!(reports[0].payload["branch"], json!("wireless_validity"));
    let digest = memory.query("swipt-base", None, Some("literature_digest"));
    assert!(!digest[0].payload["hits"].as_array().unwrap().is_empty());

    assert!(run
        .out
        .join("swipt-base/work/swipt-base-000/results.json")
        .exists());
    let outcome_doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run.out.join("swipt-base/outcome.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(outcome_doc["status"], json!("solved"));

    let canonical =
        std::fs::read_to_string(run.out.join("swipt-base/ledger.canonical.jsonl")).unwrap();
    assert_eq!(canonical, memory.canonical_dump());
    assert!(!canonical.contains("timestamp"));
}

#[test]
fn reruns_produce_identical_canonical_ledgers() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    write_happy_set(&fixtures.join("set_a"));
    let tasks = [task("swipt-base", "set_a")];
    let mut dumps = Vec::new();
    for run_ix in 0..2 {
        let out = dir.path().join(format!("out{run_ix}"));
        let entries = run_corpus(&tasks, &setup(&fixtures, &out), 1);
        assert_eq!(entries[0].outcome.status, TaskStatus::Solved);
        dumps.push(std::fs::read_to_string(out.join("swipt-base/ledger.canonical.jsonl")).unwrap());
    }
    assert!(!dumps[0].is_empty());
    assert_eq!(dumps[0], dumps[1]);
}

#[test]
fn crashed_attempt_recovers_on_the_second_try() {
    let (run, outcome) = run_set(write_retry_set, "swipt-retry");
    assert_eq!(outcome.status, TaskStatus::Solved);
    assert_eq!(outcome.attempts_used, 2);
    assert!(!outcome.first_try_flag);
    assert!(outcome.executed_flag);

    let memory = SystemMemory::restore(run.out.join("swipt-retry/ledger.jsonl")).unwrap();
    let reports = memory.query("swipt-retry", Some(Stage::Score), Some("score_report"));
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].payload["branch"], json!("error_handling"));
    assert_eq!(reports[0].payload["solved"], json!(false));
    assert_eq!(reports[0].payload["score"], json!(0.0));
    assert_eq!(reports[1].payload["branch"], json!("wireless_validity"));
    assert_eq!(reports[1].payload["solved"], json!(true));
    assert!(reports[0].seq < reports[1].seq);
    let feedback = memory.query("swipt-retry", None, Some("sim_feedback"));
    assert_eq!(feedback.len(), 1);
    assert_eq!(feedback[0].payload["branch"], json!("error_handling"));
    let checks = reports[0].payload["checks"].as_array().unwrap();
    assert_eq!(checks[0]["check_id"], json!("execution"));
    assert!(checks[0]["detail"]
        .as_str()
        .unwrap()
        .contains("SyntaxError"));
}

#[test]
fn persistent_violations_exhaust_the_attempt_budget() {
    let (run, outcome) = run_set(write_exhaust_set, "swipt-stuck");
    assert_eq!(outcome.status, TaskStatus::Exhausted);
    assert_eq!(outcome.attempts_used, 3);
    assert!(outcome.executed_flag);
    assert!(!outcome.first_try_flag);
    let score = outcome.final_score.unwrap();
    assert!((score - 2.0 / 3.0).abs() < 1e-12);

    let memory = SystemMemory::restore(run.out.join("swipt-stuck/ledger.jsonl")).unwrap();
    let reports = memory.query("swipt-stuck", Some(Stage::Score), Some("score_report"));
    assert_eq!(reports.len(), 3);
    for report in &reports {
        assert_eq!(report.payload["branch"], json!("wireless_validity"));
        assert_eq!(report.payload["solved"], json!(false));
        let eh = report.payload["checks"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["check_id"] == json!("eh_min"))
            .unwrap();
        assert_eq!(eh["passed"], json!(false));
    }
    let feedback = memory.query("swipt-stuck", None, Some("sim_feedback"));
    assert_eq!(feedback.len(), 3);
}

#[test]
fn plan_revision_runs_a_second_review_round() {
    let (run, outcome) = run_set(write_revise_set, "swipt-revise");
    assert_eq!(outcome.status, TaskStatus::Solved);
    assert!(outcome.formulation_flag);

    let memory = SystemMemory::restore(run.out.join("swipt-revise/ledger.jsonl")).unwrap();
    let drafts = memory.query("swipt-revise", None, Some("plan_draft"));
    assert_eq!(drafts.len(), 2);
    assert_eq!(drafts[0].payload["formulation_complete"], json!(false));
    assert_eq!(drafts[1].payload["formulation_complete"], json!(true));
    let reviews = memory.query("swipt-revise", None, Some("plan_review"));
    assert_eq!(reviews.len(), 2);
    assert_eq!(reviews[0].payload["verdict"], json!("revise"));
    assert_eq!(reviews[1].payload["verdict"], json!("approve"));
    let finals = memory.query("swipt-revise", None, Some("plan_final"));
    assert_eq!(finals.len(), 1);
    assert_eq!(finals[0].payload["approved"], json!(true));
}

#[test]
fn missing_fixture_set_aborts_without_sinking_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    write_happy_set(&fixtures.join("set_a"));
    let out = dir.path().join("out");
    let tasks = [task("ok-task", "set_a"), task("broken-task", "set_missing")];
    let entries = run_corpus(&tasks, &setup(&fixtures, &out), 1);
    assert_eq!(entries[0].outcome.status, TaskStatus::Solved);
    match &entries[1].outcome.status {
        TaskStatus::Aborted { stage, reason } => {
            assert_eq!(*stage, Stage::Knowledge);
            assert!(reason.contains("fixture"), "unexpected reason: {reason}");
        }
        other => panic!("expected abort, got {other:?}"),
    }
    assert_eq!(entries[1].outcome.attempts_used, 0);
    let memory = SystemMemory::restore(out.join("broken-task/ledger.jsonl")).unwrap();
    let kinds: Vec<&str> = memory.records().iter().map(|r| r.kind.as_str()).collect();
    assert_eq!(kinds, vec!["user_query", "outcome"]);
}

#[test]
fn parallel_corpus_keeps_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fixtures");
    write_happy_set(&fixtures.join("set_a"));
    let out = dir.path().join("out");
    let tasks = [
        task("alpha", "set_a"),
        task("beta", "set_a"),
        task("gamma", "set_a"),
    ];
    let entries = run_corpus(&tasks, &setup(&fixtures, &out), 3);
    let ids: Vec<&str> = entries.iter().map(|e| e.task_id.as_str()).collect();
    assert_eq!(ids, vec!["alpha", "beta", "gamma"]);
    for entry in &entries {
        assert_eq!(entry.outcome.status, TaskStatus::Solved);
    }
}
