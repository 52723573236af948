//! Line-oriented ReAct protocol: THOUGHT / ACTION / FINAL_ANSWER markers.

use serde_json::{Map, Value};

use super::AgentError;

#[derive(Clone, Debug, PartialEq)]
pub enum ReactDirective {
    Thought(String),
    Action {
        tool: String,
        args: Map<String, Value>,
    },
    Final(String),
}

/// Parses agent output into directives. Unmarked lines are prose and are
/// skipped; `FINAL_ANSWER:` terminates the parse, so at most one `Final`
/// appears. `registered_tools` gates ACTION tool names.
pub fn parse_react(
    text: &str,
    registered_tools: &[&str],
) -> Result<Vec<ReactDirective>, AgentError> {
    let mut directives = Vec::new();
    for (ix, raw) in text.lines().enumerate() {
        let line_no = ix + 1;
        let line = raw.trim_start();
        if let Some(rest) = line.strip_prefix("THOUGHT:") {
            directives.push(ReactDirective::Thought(rest.trim().to_string()));
        } else if let Some(rest) = line.strip_prefix("ACTION:") {
            let rest = rest.trim();
            let (tool, args_text) =
                rest.split_once(char::is_whitespace)
                    .ok_or(AgentError::ProtocolError {
                        line: line_no,
                        detail: "ACTION needs a tool name and a JSON argument object".to_string(),
                    })?;
            if !registered_tools.contains(&tool) {
                return Err(AgentError::ProtocolError {
                    line: line_no,
                    detail: format!("unregistered tool {tool:?}"),
                });
            }
            let args: Value =
                serde_json::from_str(args_text.trim()).map_err(|e| AgentError::ProtocolError {
                    line: line_no,
                    detail: format!("action arguments are not valid JSON: {e}"),
                })?;
            let Value::Object(args) = args else {
                return Err(AgentError::ProtocolError {
                    line: line_no,
                    detail: "action arguments must be a JSON object".to_string(),
                });
            };
            directives.push(ReactDirective::Action {
                tool: tool.to_string(),
                args,
            });
        } else if let Some(rest) = line.strip_prefix("FINAL_ANSWER:") {
            directives.push(ReactDirective::Final(rest.trim().to_string()));
            break;
        }
    }
    if directives.is_empty() {
        return Err(AgentError::NoDirective);
    }
    Ok(directives)
}

/// Inverse of `parse_react` for directive lists with at most one `Final`.
pub fn serialize_directives(directives: &[ReactDirective]) -> String {
    directives
        .iter()
        .map(|d| match d {
            ReactDirective::Thought(text) => format!("THOUGHT: {text}"),
            ReactDirective::Action { tool, args } => {
                format!("ACTION: {tool} {}", Value::Object(args.clone()))
            }
            ReactDirective::Final(text) => format!("FINAL_ANSWER: {text}"),
        })
        .collect::<Vec<_>>()
        .join("\n")
}
