//! Rule-based scoring: physical-feasibility and sanity checks over the
//! simulation's results document, aggregated to a score in [0, 1], plus an
//! optional LLM reward adapter.

use serde::{Deserialize, Serialize};

use wavecrew_phy::ScenarioConfig;

use crate::agents::{
    complete, render_prompt, AgentMessage, AgentRole, ChatBackend, PromptStrategy,
};
use crate::memory::{Stage, SystemMemory};

pub const POWER_REL_TOL: f64 = 1e-6;
pub const EH_ABS_TOL_W: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error("reward adapter unavailable: {reason}")]
    AdapterUnavailable { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackBranch {
    ErrorHandling,
    WirelessValidity,
}

impl FeedbackBranch {
    pub fn slug(self) -> &'static str {
        match self {
            FeedbackBranch::ErrorHandling => "error_handling",
            FeedbackBranch::WirelessValidity => "wireless_validity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub mandatory: bool,
    pub passed: bool,
    pub detail: String,
    pub measured: Option<f64>,
}

impl CheckResult {
    fn new(
        check_id: &str,
        mandatory: bool,
        passed: bool,
        detail: String,
        measured: Option<f64>,
    ) -> Self {
        debug_assert!(passed || !detail.is_empty(), "failed checks need a detail");
        Self {
            check_id: check_id.to_string(),
            mandatory,
            passed,
            detail,
            measured,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoreReport {
    pub branch: FeedbackBranch,
    pub checks: Vec<CheckResult>,
    pub score: f64,
    pub solved: bool,
}

impl ScoreReport {
    /// Serialized form fed back to the Coding agent.
    pub fn feedback_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Expected shape of the simulation's results.json.
#[derive(Debug, Deserialize)]
struct ResultsDoc {
    rates_bps_hz: Vec<f64>,
    harvested_w: Vec<f64>,
    total_power_w: f64,
    #[serde(default)]
    sweep: Option<Vec<SweepSample>>,
    #[serde(default)]
    baselines: Option<Baselines>,
}

#[derive(Debug, Deserialize)]
struct SweepSample {
    p_dbm: f64,
    rate: f64,
}

#[derive(Debug, Deserialize)]
struct Baselines {
    zf_rate: f64,
    #[allow(dead_code)]
    wmmse_rate: f64,
}

/// Runs all applicable checks over a raw results document. A document that
/// fails to parse yields the single failed mandatory check "results_parse".
pub fn run_checks(raw: &str, scenario: &ScenarioConfig) -> Vec<CheckResult> {
    let doc: ResultsDoc = match serde_json::from_str(raw) {
        Ok(doc) => doc,
        Err(e) => {
            return vec![CheckResult::new(
                "results_parse",
                true,
                false,
                format!("results document malformed: {e}"),
                None,
            )]
        }
    };
    let mut checks = Vec::new();

    let budget = scenario.max_power_w * (1.0 + POWER_REL_TOL);
    let power_ok = doc.total_power_w.is_finite() && doc.total_power_w <= budget;
    checks.push(CheckResult::new(
        "power_budget",
        true,
        power_ok,
        format!(
            "total power {:.6e} W vs budget {:.6e} W",
            doc.total_power_w, scenario.max_power_w
        ),
        Some(doc.total_power_w),
    ));

    let eh_floor = scenario.min_harvest_w - EH_ABS_TOL_W;
    let eh = if scenario.num_er > 0 && doc.harvested_w.is_empty() {
        CheckResult::new(
            "eh_min",
            true,
            false,
            "no harvested energy reported".to_string(),
            None,
        )
    } else if let Some((j, &e)) = doc
        .harvested_w
        .iter()
        .enumerate()
        .find(|(_, e)| !e.is_finite() || **e < eh_floor)
    {
        CheckResult::new(
            "eh_min",
            true,
            false,
            format!(
                "receiver {j} harvested {e:.3e} W < required {:.3e} W",
                scenario.min_harvest_w
            ),
            Some(e),
        )
    } else {
        let min = doc
            .harvested_w
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        CheckResult::new(
            "eh_min",
            true,
            true,
            format!(
                "all {} receivers meet {:.3e} W",
                doc.harvested_w.len(),
                scenario.min_harvest_w
            ),
            doc.harvested_w.is_empty().then_some(0.0).or(Some(min)),
        )
    };
    checks.push(eh);

    let rates = if doc.rates_bps_hz.is_empty() {
        CheckResult::new(
            "rate_sane",
            true,
            false,
            "no rates reported".to_string(),
            None,
        )
    } else if let Some((k, &r)) = doc
        .rates_bps_hz
        .iter()
        .enumerate()
        .find(|(_, r)| !r.is_finite() || **r < 0.0)
    {
        CheckResult::new(
            "rate_sane",
            true,
            false,
            format!("rate {k} is {r} (must be finite and >= 0)"),
            Some(r),
        )
    } else {
        let total: f64 = doc.rates_bps_hz.iter().sum();
        CheckResult::new(
            "rate_sane",
            true,
            true,
            format!(
                "sum rate {total:.4} bps/Hz over {} users",
                doc.rates_bps_hz.len()
            ),
            Some(total),
        )
    };
    checks.push(rates);

    if let Some(mut sweep) = doc.sweep {
        if sweep.len() >= 2 {
            sweep.sort_by(|a, b| a.p_dbm.partial_cmp(&b.p_dbm).expect("finite p_dbm"));
            let diffs: Vec<f64> = sweep.windows(2).map(|w| w[1].rate - w[0].rate).collect();
            let n = diffs.len() as f64;
            let mean = diffs.iter().sum::<f64>() / n;
            let var = if diffs.len() > 1 {
                diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let std_err = (var / n).sqrt();
            let inversions: Vec<f64> = diffs.iter().copied().filter(|d| *d < 0.0).collect();
            let passed = inversions.is_empty()
                || (inversions.len() == 1 && inversions[0].abs() <= 2.0 * std_err);
            checks.push(CheckResult::new(
                "rate_monotone",
                false,
                passed,
                format!(
                    "{} inversions over {} sweep steps (2x std err = {:.3e})",
                    inversions.len(),
                    diffs.len(),
                    2.0 * std_err
                ),
                Some(inversions.len() as f64),
            ));
        }
    }

    if let Some(baselines) = doc.baselines {
        let proposed: f64 = doc.rates_bps_hz.iter().sum();
        let passed = proposed + 1e-9 >= baselines.zf_rate;
        checks.push(CheckResult::new(
            "baseline_order",
            false,
            passed,
            format!("proposed {proposed:.4} vs ZF {:.4}", baselines.zf_rate),
            Some(proposed - baselines.zf_rate),
        ));
    }

    checks
}

/// Equal-weight pass fraction; solved iff every mandatory check passed.
pub fn aggregate_score(checks: &[CheckResult]) -> ScoreReport {
    assert!(!checks.is_empty(), "checks must be non-empty");
    let passed = checks.iter().filter(|c| c.passed).count();
    let solved = checks.iter().all(|c| c.passed || !c.mandatory);
    ScoreReport {
        branch: FeedbackBranch::WirelessValidity,
        checks: checks.to_vec(),
        score: passed as f64 / checks.len() as f64,
        solved,
    }
}

/// Error-branch report: score 0 with the captured error as one failed check.
pub fn error_report(error_text: &str) -> ScoreReport {
    let detail = if error_text.trim().is_empty() {
        "process failed with no captured error output".to_string()
    } else {
        error_text.to_string()
    };
    ScoreReport {
        branch: FeedbackBranch::ErrorHandling,
        checks: vec![CheckResult::new("execution", true, false, detail, None)],
        score: 0.0,
        solved: false,
    }
}

fn parse_first_decimal(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    for start in 0..bytes.len() {
        if !bytes[start].is_ascii_digit() {
            continue;
        }
        let from = if start > 0 && bytes[start - 1] == b'.' {
            start - 1
        } else {
            start
        };
        let mut seen_dot = from < start;
        let mut end = start;
        while end < bytes.len()
            && (bytes[end].is_ascii_digit() || (bytes[end] == b'.' && !seen_dot))
        {
            if bytes[end] == b'.' {
                seen_dot = true;
            }
            end += 1;
        }
        let mut token = &text[from..end];
        if token.ends_with('.') && token.len() > 1 {
            token = &token[..token.len() - 1];
        }
        return token.parse().ok();
    }
    None
}

/// Prompts the Scoring role for a numeric score and parses the first decimal
/// in the reply. Out-of-range or unparseable replies are AdapterUnavailable;
/// callers fall back to the rule-based score.
pub fn reward_adapter(
    raw_results: &str,
    task_query: &str,
    backend: &mut dyn ChatBackend,
    task_id: &str,
    memory: &mut SystemMemory,
) -> Result<f64, ValidationError> {
    let unavailable = |reason: String| ValidationError::AdapterUnavailable { reason };
    let context = serde_json::json!({ "query": task_query, "results": raw_results });
    let prompt = render_prompt(
        AgentRole::Scoring,
        PromptStrategy::Direct,
        "score_adapter",
        &context,
    )
    .map_err(|e| unavailable(e.to_string()))?;
    let message = AgentMessage::new(AgentRole::Scoring, PromptStrategy::Direct, prompt, vec![])
        .map_err(|e| unavailable(e.to_string()))?;
    let reply = complete(backend, &message, Stage::Score, task_id, memory)
        .map_err(|e| unavailable(e.to_string()))?;
    let score =
        parse_first_decimal(&reply).ok_or_else(|| unavailable(format!("no score in {reply:?}")))?;
    if !(0.0..=1.0).contains(&score) {
        return Err(unavailable(format!("score {score} outside [0, 1]")));
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scenario() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn by_id<'a>(checks: &'a [CheckResult], id: &str) -> &'a CheckResult {
        checks.iter().find(|c| c.check_id == id).unwrap()
    }

    #[test]
    fn paper_scale_document_passes_mandatory_checks() {
        let raw = r#"{
            "rates_bps_hz": [8.4, 7.1],
            "harvested_w": [6e-8, 6e-8],
            "total_power_w": 19.9
        }"#;
        let checks = run_checks(raw, &scenario());
        assert!(by_id(&checks, "power_budget").passed);
        assert!(by_id(&checks, "eh_min").passed);
        assert!(by_id(&checks, "rate_sane").passed);
        assert_eq!(checks.len(), 3);
        let report = aggregate_score(&checks);
        assert_eq!(report.score, 1.0);
        assert!(report.solved);
    }

    #[test]
    fn eh_failure_names_the_receiver() {
        let raw = r#"{
            "rates_bps_hz": [8.4],
            "harvested_w": [6e-8, 4e-8],
            "total_power_w": 19.9
        }"#;
        let checks = run_checks(raw, &scenario());
        let eh = by_id(&checks, "eh_min");
        assert!(!eh.passed);
        assert!(eh.detail.contains("receiver 1"));
        assert!(!aggregate_score(&checks).solved);
    }

    #[test]
    fn non_numeric_rate_fails_parse_check() {
        let raw = r#"{ "rates_bps_hz": ["NaN"], "harvested_w": [], "total_power_w": 1.0 }"#;
        let checks = run_checks(raw, &scenario());
        assert_eq!(checks.len(), 1);
        assert_eq!(checks[0].check_id, "results_parse");
        assert!(checks[0].mandatory);
        assert!(!checks[0].passed);
    }

    #[test]
    fn power_over_budget_fails() {
        let raw =
            r#"{ "rates_bps_hz": [1.0], "harvested_w": [1e-7, 1e-7], "total_power_w": 21.0 }"#;
        let checks = run_checks(raw, &scenario());
        assert!(!by_id(&checks, "power_budget").passed);
    }

    #[test]
    fn optional_checks_join_when_data_present() {
        let raw = r#"{
            "rates_bps_hz": [8.0, 7.0],
            "harvested_w": [6e-8, 6e-8],
            "total_power_w": 19.9,
            "sweep": [
                {"p_dbm": 30.0, "rate": 9.0},
                {"p_dbm": 31.0, "rate": 10.1},
                {"p_dbm": 32.0, "rate": 11.4}
            ],
            "baselines": {"zf_rate": 11.9, "wmmse_rate": 15.0}
        }"#;
        let checks = run_checks(raw, &scenario());
        assert_eq!(checks.len(), 5);
        assert!(by_id(&checks, "rate_monotone").passed);
        assert!(by_id(&checks, "baseline_order").passed);
        let report = aggregate_score(&checks);
        assert_eq!(report.score, 1.0);
    }

    #[test]
    fn one_failed_optional_keeps_solved() {
        let raw = r#"{
            "rates_bps_hz": [8.0],
            "harvested_w": [6e-8, 6e-8],
            "total_power_w": 19.9,
            "baselines": {"zf_rate": 11.9, "wmmse_rate": 15.0}
        }"#;
        let checks = run_checks(raw, &scenario());
        assert_eq!(checks.len(), 4);
        assert!(!by_id(&checks, "baseline_order").passed);
        let report = aggregate_score(&checks);
        assert_eq!(report.score, 0.75);
        assert!(report.solved);
    }

    #[test]
    fn sweep_allows_one_small_inversion() {
        let base = r#"{
            "rates_bps_hz": [8.0],
            "harvested_w": [6e-8, 6e-8],
            "total_power_w": 19.9,
            "sweep": SWEEP
        }"#;
        let noisy = base.replace(
            "SWEEP",
            r#"[{"p_dbm":30,"rate":9.0},{"p_dbm":31,"rate":10.0},{"p_dbm":32,"rate":9.95},{"p_dbm":33,"rate":11.0}]"#,
        );
        assert!(by_id(&run_checks(&noisy, &scenario()), "rate_monotone").passed);
        let broken = base.replace(
            "SWEEP",
            r#"[{"p_dbm":30,"rate":9.0},{"p_dbm":31,"rate":8.0},{"p_dbm":32,"rate":9.5},{"p_dbm":33,"rate":9.0}]"#,
        );
        assert!(!by_id(&run_checks(&broken, &scenario()), "rate_monotone").passed);
    }

    #[test]
    fn error_report_is_single_failed_mandatory_check() {
        let report = error_report("SyntaxError: invalid syntax");
        assert_eq!(report.branch, FeedbackBranch::ErrorHandling);
        assert_eq!(report.score, 0.0);
        assert!(!report.solved);
        assert_eq!(report.checks.len(), 1);
        assert!(report.checks[0].detail.contains("SyntaxError"));
        assert!(!error_report("  ").checks[0].detail.is_empty());
    }

    #[test]
    fn first_decimal_parsing() {
        assert_eq!(parse_first_decimal("0.9"), Some(0.9));
        assert_eq!(parse_first_decimal("score: 1.2"), Some(1.2));
        assert_eq!(parse_first_decimal("I give it .75 overall"), Some(0.75));
        assert_eq!(parse_first_decimal("rating 1."), Some(1.0));
        assert_eq!(parse_first_decimal("no numbers here"), None);
    }

    fn arb_check() -> impl Strategy<Value = CheckResult> {
        ("[a-z]{3,8}", any::<bool>(), any::<bool>()).prop_map(|(id, mandatory, passed)| {
            CheckResult {
                check_id: id,
                mandatory,
                passed,
                detail: "generated".to_string(),
                measured: None,
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn solved_requires_all_mandatory(checks in proptest::collection::vec(arb_check(), 1..10)) {
            let report = aggregate_score(&checks);
            let mandatory_ok = checks.iter().all(|c| c.passed || !c.mandatory);
            prop_assert_eq!(report.solved, mandatory_ok);
            prop_assert!((0.0..=1.0).contains(&report.score));
        }

        #[test]
        fn score_is_permutation_invariant(
            checks in proptest::collection::vec(arb_check(), 1..10).prop_shuffle()
        ) {
            let mut sorted = checks.clone();
            sorted.sort_by(|a, b| a.check_id.cmp(&b.check_id).then(a.passed.cmp(&b.passed)));
            let a = aggregate_score(&checks);
            let b = aggregate_score(&sorted);
            prop_assert_eq!(a.score, b.score);
            prop_assert_eq!(a.solved, b.solved);
        }
    }

    #[test]
    fn reward_adapter_parses_and_range_checks() {
        let dir = tempfile::tempdir().unwrap();
        let fixture = dir.path().join("scoring/stage5");
        std::fs::create_dir_all(&fixture).unwrap();
        std::fs::write(fixture.join("iter0.txt"), "0.9\nlooks consistent").unwrap();
        std::fs::write(fixture.join("iter1.txt"), "score: 1.2").unwrap();
        let mut backend = crate::agents::ScriptedBackend::new(dir.path());
        let mut memory = SystemMemory::create(dir.path().join("ledger.jsonl")).unwrap();
        let score = reward_adapter("{}", "maximize rate", &mut backend, "t1", &mut memory).unwrap();
        assert_eq!(score, 0.9);
        let err =
            reward_adapter("{}", "maximize rate", &mut backend, "t1", &mut memory).unwrap_err();
        assert!(matches!(err, ValidationError::AdapterUnavailable { .. }));
        assert_eq!(memory.query("t1", Some(Stage::Score), None).len(), 2);
    }
}
