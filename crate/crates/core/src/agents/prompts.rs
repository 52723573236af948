//! Prompt template registry with `{slot}` substitution and per-strategy
//! instruction decorations.

use serde_json::Value;

use super::{AgentError, AgentRole, PromptStrategy};

/// (template_id, owning role, body). Slots are lowercase `{name}` markers;
/// anything else inside braces is emitted literally.
const TEMPLATES: &[(&str, AgentRole, &str)] = &[
    (
        "knowledge_search",
        AgentRole::Literature,
        "You are the literature agent on a wireless-network optimization team.\n\
         Task: {query}\n\
         Domain tags: {tags}\n\n\
         Survey prior work relevant to this task. Query the search tool for \
         candidate papers, then close with a one-paragraph summary of the \
         strongest baselines you found.",
    ),
    (
        "plan_draft",
        AgentRole::Planning,
        "You are the planning agent on a wireless-network optimization team.\n\
         Task: {query}\n\n\
         Literature digest:\n{digest}\n\n\
         Instructor feedback on the previous draft (empty if none):\n{feedback}\n\n\
         Write an execution plan. Start each section with exactly one of these \
         markers at the beginning of a line:\n\
         OBJECTIVE:\nVARIABLES:\nCONSTRAINTS:\nALGORITHM:\nBASELINES:\nEVALUATION:\n\
         Number the algorithm steps and list baselines separated by commas.",
    ),
    (
        "plan_review",
        AgentRole::PlanningInstructor,
        "You are the planning instructor reviewing a draft execution plan.\n\
         Task: {query}\n\n\
         Draft plan:\n{plan}\n\n\
         Check that the objective, variables, and constraints form a complete \
         mathematical formulation and that the algorithm is implementable. \
         Reply with VERDICT: APPROVE or VERDICT: REVISE on its own line, \
         followed by your notes.",
    ),
    (
        "data_script",
        AgentRole::Coding,
        "You are the coding agent preparing simulation data.\n\
         Task: {query}\n\n\
         Approved plan:\n{plan}\n\n\
         Scenario: {scenario}\n\n\
         Instructor feedback on the previous script (empty if none):\n{feedback}\n\n\
         Write a complete Python script that generates the channel data and \
         writes dataset_manifest.json describing every array (name, shape, \
         count) plus a two-point received-power probe with fields near_m, \
         near_power_w, far_m, far_power_w. Reply with the script in a fenced \
         code block.",
    ),
    (
        "sim_script",
        AgentRole::Coding,
        "You are the coding agent writing the simulation.\n\
         Task: {query}\n\n\
         Approved plan:\n{plan}\n\n\
         Dataset manifest:\n{manifest}\n\n\
         Feedback from the previous attempt (empty if none):\n{feedback}\n\n\
         Write a complete Python script that loads the prepared data, runs the \
         planned optimization, and writes results.json with fields \
         rates_bps_hz, harvested_w, total_power_w, and optionally sweep and \
         baselines. Reply with the script in a fenced code block.",
    ),
    (
        "score_adapter",
        AgentRole::Scoring,
        "You are the scoring agent. Rate how well these simulation results \
         satisfy the task requirements.\n\
         Task: {query}\n\n\
         Results document:\n{results}\n\n\
         Reply with a single decimal score between 0 and 1 on the first line, \
         then one sentence of justification.",
    ),
];

fn strategy_decoration(strategy: PromptStrategy) -> Option<&'static str> {
    match strategy {
        PromptStrategy::Direct => None,
        PromptStrategy::CoT => {
            Some("Think through the problem step by step before giving your answer.")
        }
        PromptStrategy::PlanAndSolve => Some(
            "First lay out a short plan of how you will answer, then carry it \
             out step by step in the same reply.",
        ),
        PromptStrategy::ReAct => Some(
            "Interact using this exact line protocol:\n\
             THOUGHT: <your reasoning>\n\
             ACTION: <tool> <JSON object of arguments>\n\
             FINAL_ANSWER: <your conclusion>\n\
             Available tool: search, arguments {\"query\": string, \"limit\": integer}. \
             After each ACTION you will receive an OBSERVATION block. Finish \
             with FINAL_ANSWER once coverage is sufficient.",
        ),
    }
}

fn slot_text(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn substitute(template: &str, context: &Value) -> Result<String, AgentError> {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len());
    let mut i = 0;
    while i < template.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < template.len()
                && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_' || bytes[j].is_ascii_digit())
            {
                j += 1;
            }
            if j > i + 1 && j < template.len() && bytes[j] == b'}' {
                let name = &template[i + 1..j];
                let value = context.get(name).ok_or_else(|| AgentError::MissingSlot {
                    name: name.to_string(),
                })?;
                out.push_str(&slot_text(value));
                i = j + 1;
                continue;
            }
        }
        let ch = template[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    Ok(out)
}

/// Renders a registered template with `context` and appends the strategy's
/// instruction block. Deterministic: same inputs, same output.
pub fn render_prompt(
    role: AgentRole,
    strategy: PromptStrategy,
    template_id: &str,
    context: &Value,
) -> Result<String, AgentError> {
    let (_, owner, body) = TEMPLATES
        .iter()
        .find(|(id, _, _)| *id == template_id)
        .ok_or_else(|| AgentError::UnknownTemplate {
            id: template_id.to_string(),
        })?;
    debug_assert_eq!(role, *owner, "template {template_id} belongs to {owner:?}");
    let mut text = substitute(body, context)?;
    if let Some(extra) = strategy_decoration(strategy) {
        text.push_str("\n\n");
        text.push_str(extra);
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn direct_with_no_slots_is_verbatim() {
        let template = "Summarize the run log.";
        assert_eq!(substitute(template, &json!({})).unwrap(), template);
    }

    #[test]
    fn same_call_twice_is_byte_identical() {
        let ctx = json!({"query": "maximize sum rate", "tags": "swipt"});
        let a = render_prompt(
            AgentRole::Literature,
            PromptStrategy::ReAct,
            "knowledge_search",
            &ctx,
        )
        .unwrap();
        let b = render_prompt(
            AgentRole::Literature,
            PromptStrategy::ReAct,
            "knowledge_search",
            &ctx,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_slot_is_named() {
        let err = render_prompt(
            AgentRole::Literature,
            PromptStrategy::Direct,
            "knowledge_search",
            &json!({"tags": "swipt"}),
        )
        .unwrap_err();
        match err {
            AgentError::MissingSlot { name } => assert_eq!(name, "query"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_template_rejected() {
        let err = render_prompt(
            AgentRole::Literature,
            PromptStrategy::Direct,
            "nope",
            &json!({}),
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::UnknownTemplate { .. }));
    }

    #[test]
    fn strategies_append_their_instruction_blocks() {
        let ctx = json!({"query": "q", "tags": ""});
        let direct = render_prompt(
            AgentRole::Literature,
            PromptStrategy::Direct,
            "knowledge_search",
            &ctx,
        )
        .unwrap();
        let react = render_prompt(
            AgentRole::Literature,
            PromptStrategy::ReAct,
            "knowledge_search",
            &ctx,
        )
        .unwrap();
        assert!(react.starts_with(&direct));
        assert!(react.contains("FINAL_ANSWER:"));
        assert!(!direct.contains("FINAL_ANSWER:"));
    }

    #[test]
    fn literal_braces_pass_through() {
        let out = substitute(
            "keep {this, literal} and fill {slot}",
            &json!({"slot": "x"}),
        )
        .unwrap();
        assert_eq!(out, "keep {this, literal} and fill x");
    }

    #[test]
    fn non_string_slot_values_render_as_json() {
        let out = substitute("n={count}", &json!({"count": 7})).unwrap();
        assert_eq!(out, "n=7");
    }
}
