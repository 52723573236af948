//! The four-stage task loop: knowledge acquisition, plan formulation with
//! instructor review, data preparation with rule-based review, and simulation
//! generation with dual feedback branches under an attempt budget.

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wavecrew_phy::ScenarioConfig;

use crate::agents::{
    complete, parse_react, render_prompt, AgentError, AgentMessage, AgentRole, ChatBackend,
    PromptStrategy, ReactDirective,
};
use crate::memory::{Stage, SystemMemory};
use crate::tools::{
    execute_sandbox, extract_terms, rank_papers, search_literature, ExecutionResult, PaperHit,
    RankedHit, SearchBackend, ToolError, Workspace, WorkspaceManager,
};
use crate::validation::{
    aggregate_score, error_report, reward_adapter, run_checks, FeedbackBranch, ScoreReport,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub query: String,
    #[serde(default)]
    pub domain_tags: Vec<String>,
    #[serde(default)]
    pub scenario_override: Option<ScenarioConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    pub max_attempts: u32,
    pub max_plan_reviews: u32,
    pub max_data_reviews: u32,
    /// Extra score gate on top of "all mandatory checks pass"; 0 = inactive.
    pub solve_score_threshold: f64,
    pub use_reward_adapter: bool,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            max_plan_reviews: 3,
            max_data_reviews: 3,
            solve_score_threshold: 0.0,
            use_reward_adapter: false,
        }
    }
}

impl OrchestratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_attempts < 1 || self.max_plan_reviews < 1 || self.max_data_reviews < 1 {
            return Err("all caps must be >= 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.solve_score_threshold) {
            return Err("solve_score_threshold must be in [0, 1]".to_string());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub objective: String,
    pub variables: String,
    pub constraints: String,
    pub algorithm_steps: Vec<String>,
    pub baselines: Vec<String>,
    pub evaluation_protocol: String,
    pub formulation_complete: bool,
}

const PLAN_MARKERS: [&str; 6] = [
    "OBJECTIVE:",
    "VARIABLES:",
    "CONSTRAINTS:",
    "ALGORITHM:",
    "BASELINES:",
    "EVALUATION:",
];

impl PlanDocument {
    /// Parses the labeled blocks out of a draft. Never fails: missing blocks
    /// come back empty and are reflected in `formulation_complete`.
    pub fn parse(text: &str) -> Self {
        let mut blocks: [Vec<&str>; 6] = Default::default();
        let mut current = None;
        for line in text.lines() {
            let trimmed = line.trim();
            if let Some(ix) = PLAN_MARKERS.iter().position(|m| trimmed.starts_with(m)) {
                current = Some(ix);
                let rest = trimmed[PLAN_MARKERS[ix].len()..].trim();
                if !rest.is_empty() {
                    blocks[ix].push(rest);
                }
                continue;
            }
            if let Some(ix) = current {
                if !trimmed.is_empty() {
                    blocks[ix].push(trimmed);
                }
            }
        }
        let text_block = |ix: usize| blocks[ix].join("\n");
        let algorithm_steps = blocks[3].iter().map(|s| s.to_string()).collect();
        let baselines = blocks[4]
            .iter()
            .flat_map(|line| line.split(','))
            .map(|s| s.trim().trim_start_matches("- ").to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let objective = text_block(0);
        let variables = text_block(1);
        let constraints = text_block(2);
        let formulation_complete =
            !objective.is_empty() && !variables.is_empty() && !constraints.is_empty();
        Self {
            objective,
            variables,
            constraints,
            algorithm_steps,
            baselines,
            evaluation_protocol: text_block(5),
            formulation_complete,
        }
    }

    fn payload(&self) -> Value {
        serde_json::to_value(self).expect("plan serializes")
    }

    /// Compact re-rendering for downstream prompts.
    pub fn summary_text(&self) -> String {
        format!(
            "OBJECTIVE: {}\nVARIABLES: {}\nCONSTRAINTS: {}\nALGORITHM:\n{}\nBASELINES: {}\nEVALUATION: {}",
            self.objective,
            self.variables,
            self.constraints,
            self.algorithm_steps.join("\n"),
            self.baselines.join(", "),
            self.evaluation_protocol,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TaskStatus {
    Solved,
    Exhausted,
    Aborted { stage: Stage, reason: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaskOutcome {
    #[serde(flatten)]
    pub status: TaskStatus,
    pub attempts_used: u32,
    pub final_score: Option<f64>,
    pub formulation_flag: bool,
    pub generated_flag: bool,
    pub executed_flag: bool,
    pub first_try_flag: bool,
}

impl TaskOutcome {
    pub fn is_solved(&self) -> bool {
        self.status == TaskStatus::Solved
    }
}

/// Everything a single task run needs. One runtime per task; calls within a
/// task are strictly sequential.
pub struct TaskRuntime<'a> {
    pub backend: &'a mut dyn ChatBackend,
    pub search: &'a SearchBackend,
    pub workspaces: &'a WorkspaceManager,
    pub memory: &'a mut SystemMemory,
    pub scenario: ScenarioConfig,
    pub sandbox_timeout: Duration,
    pub max_react_steps: u32,
}

/// Routes a finished execution to its feedback branch.
pub fn classify_feedback(exec: &ExecutionResult, score: Option<&ScoreReport>) -> FeedbackBranch {
    debug_assert_eq!(score.is_some(), exec.exit_class.is_success());
    if exec.exit_class.is_success() {
        FeedbackBranch::WirelessValidity
    } else {
        FeedbackBranch::ErrorHandling
    }
}

struct StageAbort {
    stage: Stage,
    reason: String,
}

type StageResult<T> = Result<T, StageAbort>;

fn abort(stage: Stage, reason: impl Into<String>) -> StageAbort {
    StageAbort {
        stage,
        reason: reason.into(),
    }
}

fn record(
    rt: &mut TaskRuntime,
    task_id: &str,
    stage: Stage,
    role: AgentRole,
    kind: &str,
    payload: Value,
) -> StageResult<u64> {
    rt.memory
        .append(task_id, stage, role, kind, payload)
        .map_err(|e| abort(stage, format!("memory append failed: {e}")))
}

fn record_warning(
    rt: &mut TaskRuntime,
    task_id: &str,
    stage: Stage,
    role: AgentRole,
    message: &str,
) -> StageResult<()> {
    record(
        rt,
        task_id,
        stage,
        role,
        "protocol_warning",
        json!({ "message": message }),
    )?;
    Ok(())
}

/// One automatic retry on transient backend failure, then abort.
fn complete_with_retry(
    rt: &mut TaskRuntime,
    stage: Stage,
    task_id: &str,
    message: &AgentMessage,
) -> StageResult<String> {
    let mut last = String::new();
    for _ in 0..2 {
        match complete(&mut *rt.backend, message, stage, task_id, &mut *rt.memory) {
            Ok(text) => return Ok(text),
            Err(AgentError::BackendUnavailable { reason }) => last = reason,
            Err(e) => return Err(abort(stage, e.to_string())),
        }
    }
    Err(abort(
        stage,
        format!("backend unavailable after retry: {last}"),
    ))
}

fn prompt_message(
    stage: Stage,
    role: AgentRole,
    strategy: PromptStrategy,
    template_id: &str,
    context: &Value,
) -> StageResult<AgentMessage> {
    let prompt = render_prompt(role, strategy, template_id, context)
        .map_err(|e| abort(stage, e.to_string()))?;
    AgentMessage::new(role, strategy, prompt, vec![]).map_err(|e| abort(stage, e.to_string()))
}

/// Runs the full pipeline for one task and records the outcome. Infallible
/// from the caller's view: failures become `Aborted` outcomes.
pub fn run_task(task: &TaskSpec, config: &OrchestratorConfig, rt: &mut TaskRuntime) -> TaskOutcome {
    let result = drive(task, config, rt);
    let (status, final_score) = match result {
        Ok((report, true)) => (TaskStatus::Solved, report.map(|r| r.score)),
        Ok((report, false)) => (TaskStatus::Exhausted, report.map(|r| r.score)),
        Err(a) => (
            TaskStatus::Aborted {
                stage: a.stage,
                reason: a.reason,
            },
            None,
        ),
    };
    let outcome = build_outcome(task, rt, status, final_score);
    let payload = serde_json::to_value(&outcome).expect("outcome serializes");
    if let Err(e) = rt.memory.append(
        &task.task_id,
        Stage::Outcome,
        AgentRole::Scoring,
        "outcome",
        payload,
    ) {
        eprintln!(
            "warning: failed to record outcome for {}: {e}",
            task.task_id
        );
    }
    outcome
}

/// Outcome flags are derived from ledger facts, never from agent claims.
fn build_outcome(
    task: &TaskSpec,
    rt: &TaskRuntime,
    status: TaskStatus,
    final_score: Option<f64>,
) -> TaskOutcome {
    let records = rt.memory.query(&task.task_id, None, None);
    let first_sim_seq = records
        .iter()
        .find(|r| r.stage == Stage::Simulation)
        .map(|r| r.seq);
    let formulation_flag = records.iter().any(|r| {
        (r.kind == "plan_draft" || r.kind == "plan_final")
            && r.payload
                .get("formulation_complete")
                .and_then(Value::as_bool)
                == Some(true)
            && first_sim_seq.is_none_or(|s| r.seq < s)
    });
    let generated_flag = records.iter().any(|r| r.kind == "sim_script");
    let executed_flag = records.iter().any(|r| {
        r.stage == Stage::Simulation
            && r.kind == "exec_result"
            && r.payload.get("exit_class").and_then(Value::as_str) == Some("success")
    });
    let attempts_used = records.iter().filter(|r| r.kind == "score_report").count() as u32;
    let solved = status == TaskStatus::Solved;
    TaskOutcome {
        status,
        attempts_used,
        final_score,
        formulation_flag,
        generated_flag,
        executed_flag,
        first_try_flag: solved && attempts_used == 1,
    }
}

fn drive(
    task: &TaskSpec,
    config: &OrchestratorConfig,
    rt: &mut TaskRuntime,
) -> StageResult<(Option<ScoreReport>, bool)> {
    if task.query.trim().is_empty() {
        return Err(abort(Stage::Query, "task query is empty"));
    }
    config.validate().map_err(|r| abort(Stage::Query, r))?;
    if !rt.memory.query(&task.task_id, None, None).is_empty() {
        return Err(abort(
            Stage::Query,
            "memory already holds records for this task",
        ));
    }
    let scenario = task
        .scenario_override
        .clone()
        .unwrap_or_else(|| rt.scenario.clone());
    scenario
        .validate()
        .map_err(|e| abort(Stage::Query, e.to_string()))?;
    record(
        rt,
        &task.task_id,
        Stage::Query,
        AgentRole::Literature,
        "user_query",
        json!({ "query": task.query, "domain_tags": task.domain_tags }),
    )?;
    let digest = stage_knowledge(task, rt)?;
    let plan = stage_plan(task, &digest, config, rt)?;
    let ws = rt
        .workspaces
        .init_workspace(&task.task_id)
        .map_err(|e| abort(Stage::Data, e.to_string()))?;
    let manifest = stage_data(task, &plan, &scenario, config, rt, &ws)?;
    stage_sim(task, &plan, &manifest, &scenario, config, rt, &ws)
}

/// Stage I: the Literature agent drives the search tool through ReAct, the
/// collected hits are ranked against query terms, and the top 5 are stored.
fn stage_knowledge(task: &TaskSpec, rt: &mut TaskRuntime) -> StageResult<Vec<RankedHit>> {
    let task_id = &task.task_id;
    let mut terms = extract_terms(&task.query);
    for tag in &task.domain_tags {
        for term in extract_terms(tag) {
            if !terms.contains(&term) {
                terms.push(term);
            }
        }
    }
    let context = json!({ "query": task.query, "tags": task.domain_tags.join(", ") });
    let opening = render_prompt(
        AgentRole::Literature,
        PromptStrategy::ReAct,
        "knowledge_search",
        &context,
    )
    .map_err(|e| abort(Stage::Knowledge, e.to_string()))?;
    let mut transcript = opening;
    let mut collected: Vec<PaperHit> = Vec::new();
    let mut finished = false;
    for _ in 0..rt.max_react_steps {
        let message = AgentMessage::new(
            AgentRole::Literature,
            PromptStrategy::ReAct,
            transcript.clone(),
            vec![],
        )
        .map_err(|e| abort(Stage::Knowledge, e.to_string()))?;
        let reply = complete_with_retry(rt, Stage::Knowledge, task_id, &message)?;
        transcript.push('\n');
        transcript.push_str(&reply);
        let directives = match parse_react(&reply, &["search"]) {
            Ok(d) => d,
            Err(e) => {
                record_warning(
                    rt,
                    task_id,
                    Stage::Knowledge,
                    AgentRole::Literature,
                    &format!("unusable literature turn: {e}"),
                )?;
                break;
            }
        };
        for directive in directives {
            match directive {
                ReactDirective::Thought(_) => {}
                ReactDirective::Action { args, .. } => {
                    let query = args
                        .get("query")
                        .and_then(Value::as_str)
                        .unwrap_or(&task.query)
                        .to_string();
                    let limit = args
                        .get("limit")
                        .and_then(Value::as_u64)
                        .unwrap_or(5)
                        .clamp(1, 20) as usize;
                    let observation = match run_search(rt, task_id, &query, limit)? {
                        Ok(hits) => {
                            let lines: Vec<String> = hits
                                .iter()
                                .map(|h| {
                                    format!(
                                        "[{}] {} ({}, {})",
                                        h.source_id, h.title, h.year, h.venue
                                    )
                                })
                                .collect();
                            let text = if lines.is_empty() {
                                "no results".to_string()
                            } else {
                                lines.join("\n")
                            };
                            collected.extend(hits);
                            text
                        }
                        Err(reason) => format!("search unavailable: {reason}"),
                    };
                    transcript.push_str("\nOBSERVATION:\n");
                    transcript.push_str(&observation);
                }
                ReactDirective::Final(_) => {
                    finished = true;
                    break;
                }
            }
        }
        if finished {
            break;
        }
    }
    if !finished {
        record_warning(
            rt,
            task_id,
            Stage::Knowledge,
            AgentRole::Literature,
            "literature loop ended without a final answer",
        )?;
    }
    let mut seen = BTreeSet::new();
    collected.retain(|h| seen.insert(h.source_id.clone()));
    let mut ranked = if terms.is_empty() || collected.is_empty() {
        Vec::new()
    } else {
        rank_papers(collected, &terms)
    };
    ranked.truncate(5);
    let digest_hits: Vec<Value> = ranked
        .iter()
        .map(|r| {
            json!({
                "title": r.hit.title,
                "year": r.hit.year,
                "venue": r.hit.venue,
                "source_id": r.hit.source_id,
                "score": r.score,
            })
        })
        .collect();
    record(
        rt,
        task_id,
        Stage::Knowledge,
        AgentRole::Literature,
        "literature_digest",
        json!({ "hits": digest_hits }),
    )?;
    Ok(ranked)
}

/// One search call with one retry on transient failure. Hard failures come
/// back as an observation string so the agent loop can degrade gracefully.
fn run_search(
    rt: &mut TaskRuntime,
    task_id: &str,
    query: &str,
    limit: usize,
) -> StageResult<Result<Vec<PaperHit>, String>> {
    let mut last = String::new();
    for attempt in 0..2 {
        match search_literature(rt.search, query, limit) {
            Ok(hits) => {
                let ids: Vec<&str> = hits.iter().map(|h| h.source_id.as_str()).collect();
                record(
                    rt,
                    task_id,
                    Stage::Knowledge,
                    AgentRole::Literature,
                    "search_call",
                    json!({ "query": query, "limit": limit, "hits": ids }),
                )?;
                return Ok(Ok(hits));
            }
            Err(ToolError::SearchUnavailable { reason }) if attempt == 0 => last = reason,
            Err(e) => {
                record_warning(
                    rt,
                    task_id,
                    Stage::Knowledge,
                    AgentRole::Literature,
                    &format!("search failed: {e}"),
                )?;
                return Ok(Err(e.to_string()));
            }
        }
    }
    record_warning(
        rt,
        task_id,
        Stage::Knowledge,
        AgentRole::Literature,
        &format!("search unavailable after retry: {last}"),
    )?;
    Ok(Err(last))
}

fn parse_verdict(text: &str) -> Option<(bool, String)> {
    let mut verdict = None;
    let mut notes = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if verdict.is_none() {
            if let Some(rest) = trimmed.strip_prefix("VERDICT:") {
                let rest = rest.trim();
                verdict = if rest.starts_with("APPROVE") {
                    Some(true)
                } else if rest.starts_with("REVISE") {
                    Some(false)
                } else {
                    return None;
                };
                continue;
            }
        }
        notes.push(line);
    }
    verdict.map(|v| (v, notes.join("\n").trim().to_string()))
}

/// Stage II: Planning drafts (plan-and-solve), the PlanningInstructor reviews
/// (CoT) until approval or the review cap; hitting the cap continues degraded
/// with the last draft.
fn stage_plan(
    task: &TaskSpec,
    digest: &[RankedHit],
    config: &OrchestratorConfig,
    rt: &mut TaskRuntime,
) -> StageResult<PlanDocument> {
    let task_id = &task.task_id;
    let digest_text = if digest.is_empty() {
        "no prior work found".to_string()
    } else {
        digest
            .iter()
            .enumerate()
            .map(|(i, r)| {
                format!(
                    "{}. {} ({}, {}) relevance {:.2}",
                    i + 1,
                    r.hit.title,
                    r.hit.year,
                    r.hit.venue,
                    r.score
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut feedback = String::new();
    let mut last_plan = None;
    for _ in 0..config.max_plan_reviews {
        let draft_ctx = json!({ "query": task.query, "digest": digest_text, "feedback": feedback });
        let draft_msg = prompt_message(
            Stage::Plan,
            AgentRole::Planning,
            PromptStrategy::PlanAndSolve,
            "plan_draft",
            &draft_ctx,
        )?;
        let draft_text = complete_with_retry(rt, Stage::Plan, task_id, &draft_msg)?;
        let plan = PlanDocument::parse(&draft_text);
        record(
            rt,
            task_id,
            Stage::Plan,
            AgentRole::Planning,
            "plan_draft",
            plan.payload(),
        )?;
        let review_ctx = json!({ "query": task.query, "plan": draft_text });
        let review_msg = prompt_message(
            Stage::Plan,
            AgentRole::PlanningInstructor,
            PromptStrategy::CoT,
            "plan_review",
            &review_ctx,
        )?;
        let review_text = complete_with_retry(rt, Stage::Plan, task_id, &review_msg)?;
        let (approved, notes) = match parse_verdict(&review_text) {
            Some(v) => v,
            None => {
                record_warning(
                    rt,
                    task_id,
                    Stage::Plan,
                    AgentRole::PlanningInstructor,
                    "review lacks a VERDICT marker; treating as REVISE",
                )?;
                (false, review_text.clone())
            }
        };
        record(
            rt,
            task_id,
            Stage::Plan,
            AgentRole::PlanningInstructor,
            "plan_review",
            json!({ "verdict": if approved { "approve" } else { "revise" }, "notes": notes }),
        )?;
        if approved {
            let mut payload = plan.payload();
            payload["approved"] = json!(true);
            record(
                rt,
                task_id,
                Stage::Plan,
                AgentRole::Planning,
                "plan_final",
                payload,
            )?;
            return Ok(plan);
        }
        feedback = notes;
        last_plan = Some(plan);
    }
    record_warning(
        rt,
        task_id,
        Stage::Plan,
        AgentRole::PlanningInstructor,
        "plan review cap reached without approval; continuing with last draft",
    )?;
    let plan = last_plan.expect("max_plan_reviews >= 1");
    let mut payload = plan.payload();
    payload["approved"] = json!(false);
    record(
        rt,
        task_id,
        Stage::Plan,
        AgentRole::Planning,
        "plan_final",
        payload,
    )?;
    Ok(plan)
}

/// Pulls the first fenced code block, or the whole reply if none.
fn extract_code(text: &str) -> String {
    let Some(start) = text.find("```") else {
        return text.to_string();
    };
    let after = &text[start + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    body[..end].to_string()
}

fn stderr_tail(exec: &ExecutionResult) -> String {
    let text = if exec.stderr.trim().is_empty() {
        &exec.stdout
    } else {
        &exec.stderr
    };
    let tail: String = text
        .chars()
        .rev()
        .take(2000)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    tail.trim().to_string()
}

/// Stage III: Coding proposes a data script, the sandbox runs it, and the
/// DataInstructor's rule checks gate progression.
fn stage_data(
    task: &TaskSpec,
    plan: &PlanDocument,
    scenario: &ScenarioConfig,
    config: &OrchestratorConfig,
    rt: &mut TaskRuntime,
    ws: &Workspace,
) -> StageResult<Value> {
    let task_id = &task.task_id;
    let scenario_text = format!(
        "{} IRs with {} antennas each, {} ERs with {} antennas each, {} BS antennas",
        scenario.num_ir,
        scenario.ir_antennas,
        scenario.num_er,
        scenario.er_antennas,
        scenario.bs_antennas
    );
    let mut feedback = String::new();
    let mut last_failure = String::new();
    for round in 0..config.max_data_reviews {
        let ctx = json!({
            "query": task.query,
            "plan": plan.summary_text(),
            "scenario": scenario_text,
            "feedback": feedback,
        });
        let msg = prompt_message(
            Stage::Data,
            AgentRole::Coding,
            PromptStrategy::CoT,
            "data_script",
            &ctx,
        )?;
        let reply = complete_with_retry(rt, Stage::Data, task_id, &msg)?;
        let script = extract_code(&reply);
        let filename = format!("prepare_data_{round}.py");
        std::fs::write(ws.root.join(&filename), &script)
            .map_err(|e| abort(Stage::Data, format!("write {filename}: {e}")))?;
        record(
            rt,
            task_id,
            Stage::Data,
            AgentRole::Coding,
            "data_script",
            json!({ "filename": filename, "script": script }),
        )?;
        let exec = execute_sandbox(
            ws,
            &["python3".to_string(), filename.clone()],
            rt.sandbox_timeout,
        );
        record(
            rt,
            task_id,
            Stage::Data,
            AgentRole::Coding,
            "exec_result",
            exec.payload(),
        )?;
        let (passed, checks, manifest) = review_dataset(&exec, scenario, ws);
        record(
            rt,
            task_id,
            Stage::Data,
            AgentRole::DataInstructor,
            "data_review",
            json!({ "passed": passed, "checks": checks }),
        )?;
        if passed {
            let manifest = manifest.expect("manifest parsed when review passes");
            record(
                rt,
                task_id,
                Stage::Data,
                AgentRole::DataInstructor,
                "dataset_manifest",
                json!({ "manifest": manifest }),
            )?;
            return Ok(manifest);
        }
        last_failure = checks
            .iter()
            .filter(|c| c["passed"] == json!(false))
            .map(|c| {
                format!(
                    "{}: {}",
                    c["check"].as_str().unwrap_or("?"),
                    c["detail"].as_str().unwrap_or("")
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        feedback = last_failure.clone();
    }
    Err(abort(
        Stage::Data,
        format!(
            "data preparation failed after {} reviews: {last_failure}",
            config.max_data_reviews
        ),
    ))
}

fn check_item(name: &str, passed: bool, detail: String) -> Value {
    json!({ "check": name, "passed": passed, "detail": detail })
}

/// DataInstructor rule checks: clean execution, manifest present, declared
/// shapes match the scenario, and received power decays with distance.
fn review_dataset(
    exec: &ExecutionResult,
    scenario: &ScenarioConfig,
    ws: &Workspace,
) -> (bool, Vec<Value>, Option<Value>) {
    let mut checks = Vec::new();
    let exec_ok = exec.exit_class.is_success();
    checks.push(check_item(
        "exec_success",
        exec_ok,
        if exec_ok {
            "script exited cleanly".to_string()
        } else {
            format!("{}: {}", exec.exit_class.label(), stderr_tail(exec))
        },
    ));
    let manifest = std::fs::read_to_string(ws.root.join("dataset_manifest.json"))
        .ok()
        .and_then(|raw| serde_json::from_str::<Value>(&raw).ok());
    checks.push(check_item(
        "manifest_present",
        manifest.is_some(),
        match &manifest {
            Some(_) => "dataset_manifest.json parsed".to_string(),
            None => "dataset_manifest.json missing or malformed".to_string(),
        },
    ));
    if let Some(manifest) = &manifest {
        let shape_result = check_shapes(manifest, scenario);
        checks.push(check_item(
            "shapes",
            shape_result.is_ok(),
            shape_result
                .err()
                .unwrap_or_else(|| "declared shapes match the scenario".to_string()),
        ));
        let probe_result = check_probe(manifest);
        checks.push(check_item(
            "pathloss_trend",
            probe_result.is_ok(),
            probe_result
                .err()
                .unwrap_or_else(|| "received power decreases with distance".to_string()),
        ));
    }
    let passed = checks.iter().all(|c| c["passed"] == json!(true)) && manifest.is_some();
    (passed, checks, manifest)
}

fn check_shapes(manifest: &Value, scenario: &ScenarioConfig) -> Result<(), String> {
    let arrays = manifest
        .get("arrays")
        .and_then(Value::as_array)
        .ok_or("manifest lacks an arrays list")?;
    let entry = |name: &str| {
        arrays
            .iter()
            .find(|a| a.get("name").and_then(Value::as_str) == Some(name))
            .ok_or(format!("array {name:?} not declared"))
    };
    let expect = |name: &str, rows: usize, cols: usize, count: usize| -> Result<(), String> {
        let array = entry(name)?;
        let shape: Vec<u64> = array
            .get("shape")
            .and_then(Value::as_array)
            .map(|s| s.iter().filter_map(Value::as_u64).collect())
            .unwrap_or_default();
        if shape != vec![rows as u64, cols as u64] {
            return Err(format!(
                "array {name:?} shape {shape:?} does not match [{rows}, {cols}]"
            ));
        }
        let declared = array.get("count").and_then(Value::as_u64).unwrap_or(0);
        if declared != count as u64 {
            return Err(format!(
                "array {name:?} count {declared} does not match {count}"
            ));
        }
        Ok(())
    };
    expect(
        "H",
        scenario.ir_antennas,
        scenario.bs_antennas,
        scenario.num_ir,
    )?;
    if scenario.num_er > 0 {
        expect(
            "G",
            scenario.er_antennas,
            scenario.bs_antennas,
            scenario.num_er,
        )?;
    }
    Ok(())
}

fn check_probe(manifest: &Value) -> Result<(), String> {
    let probe = manifest
        .get("probe")
        .and_then(Value::as_object)
        .ok_or("manifest lacks a probe object")?;
    let field = |name: &str| {
        probe
            .get(name)
            .and_then(Value::as_f64)
            .ok_or(format!("probe field {name:?} missing"))
    };
    let near_m = field("near_m")?;
    let far_m = field("far_m")?;
    let near_power = field("near_power_w")?;
    let far_power = field("far_power_w")?;
    if far_m <= near_m {
        return Err(format!(
            "probe distances not increasing: {near_m} to {far_m}"
        ));
    }
    if far_power >= near_power {
        return Err(format!(
            "received power did not decay: {near_power:.3e} W at {near_m} m vs {far_power:.3e} W at {far_m} m"
        ));
    }
    Ok(())
}

/// Stage IV: per attempt, Coding writes the simulation, the sandbox runs it,
/// and the result routes through the error or validity branch. Returns the
/// last report and whether the task solved.
fn stage_sim(
    task: &TaskSpec,
    plan: &PlanDocument,
    manifest: &Value,
    scenario: &ScenarioConfig,
    config: &OrchestratorConfig,
    rt: &mut TaskRuntime,
    ws: &Workspace,
) -> StageResult<(Option<ScoreReport>, bool)> {
    let task_id = &task.task_id;
    let manifest_text = serde_json::to_string(manifest).expect("manifest serializes");
    let mut feedback = String::new();
    let mut last_report = None;
    for attempt in 1..=config.max_attempts {
        let ctx = json!({
            "query": task.query,
            "plan": plan.summary_text(),
            "manifest": manifest_text,
            "feedback": feedback,
        });
        let msg = prompt_message(
            Stage::Simulation,
            AgentRole::Coding,
            PromptStrategy::CoT,
            "sim_script",
            &ctx,
        )?;
        let reply = complete_with_retry(rt, Stage::Simulation, task_id, &msg)?;
        let script = extract_code(&reply);
        let filename = format!("run_simulation_{attempt}.py");
        std::fs::write(ws.root.join(&filename), &script)
            .map_err(|e| abort(Stage::Simulation, format!("write {filename}: {e}")))?;
        record(
            rt,
            task_id,
            Stage::Simulation,
            AgentRole::Coding,
            "sim_script",
            json!({ "filename": filename, "script": script, "attempt": attempt }),
        )?;
        let exec = execute_sandbox(
            ws,
            &["python3".to_string(), filename.clone()],
            rt.sandbox_timeout,
        );
        let mut exec_payload = exec.payload();
        exec_payload["attempt"] = json!(attempt);
        record(
            rt,
            task_id,
            Stage::Simulation,
            AgentRole::Coding,
            "exec_result",
            exec_payload,
        )?;
        let report = if exec.exit_class.is_success() {
            let raw = std::fs::read_to_string(ws.root.join("results.json")).unwrap_or_default();
            let checks = run_checks(&raw, scenario);
            let mut report = aggregate_score(&checks);
            debug_assert_eq!(
                classify_feedback(&exec, Some(&report)),
                FeedbackBranch::WirelessValidity
            );
            if config.use_reward_adapter {
                match reward_adapter(
                    &raw,
                    &task.query,
                    &mut *rt.backend,
                    task_id,
                    &mut *rt.memory,
                ) {
                    Ok(adapter_score) => report.score = report.score.min(adapter_score),
                    Err(e) => record_warning(
                        rt,
                        task_id,
                        Stage::Score,
                        AgentRole::Scoring,
                        &format!("reward adapter fell back to rule-based score: {e}"),
                    )?,
                }
            }
            report
        } else {
            debug_assert_eq!(
                classify_feedback(&exec, None),
                FeedbackBranch::ErrorHandling
            );
            error_report(&format!(
                "execution failed ({}): {}",
                exec.exit_class.label(),
                stderr_tail(&exec)
            ))
        };
        record(
            rt,
            task_id,
            Stage::Score,
            AgentRole::Scoring,
            "score_report",
            json!({
                "branch": report.branch.slug(),
                "score": report.score,
                "solved": report.solved,
                "checks": serde_json::to_value(&report.checks).expect("checks serialize"),
                "attempt": attempt,
            }),
        )?;
        if report.solved && report.score >= config.solve_score_threshold {
            return Ok((Some(report), true));
        }
        feedback = report.feedback_text();
        record(
            rt,
            task_id,
            Stage::Simulation,
            AgentRole::CodingInstructor,
            "sim_feedback",
            json!({ "branch": report.branch.slug(), "feedback": feedback, "attempt": attempt }),
        )?;
        last_report = Some(report);
    }
    Ok((last_report, false))
}
