//! Agent roles, prompting strategies, chat backends (live HTTP and scripted
//! fixture replay), and the ReAct line protocol.

mod backend;
mod prompts;
mod react;

pub use backend::{complete, ChatBackend, LiveBackend, ScriptedBackend};
pub use prompts::render_prompt;
pub use react::{parse_react, serialize_directives, ReactDirective};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::memory::MemoryError;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("backend unavailable: {reason}")]
    BackendUnavailable { reason: String },
    #[error("scripted fixture missing for key {key:?}")]
    FixtureMissing { key: String },
    #[error("malformed backend response: {detail}")]
    MalformedResponse { detail: String },
    #[error("protocol violation at line {line}: {detail}")]
    ProtocolError { line: usize, detail: String },
    #[error("no recognized directive in agent output")]
    NoDirective,
    #[error("unknown prompt template {id:?}")]
    UnknownTemplate { id: String },
    #[error("template slot {name:?} missing from context")]
    MissingSlot { name: String },
    #[error("strategy {strategy:?} is not allowed for role {role:?}")]
    StrategyNotAllowed {
        role: AgentRole,
        strategy: PromptStrategy,
    },
    #[error("agent message content must be non-empty")]
    EmptyContent,
    #[error("invalid backend config: {detail}")]
    InvalidConfig { detail: String },
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Literature,
    Planning,
    PlanningInstructor,
    DataInstructor,
    Coding,
    CodingInstructor,
    Scoring,
}

impl AgentRole {
    pub fn slug(self) -> &'static str {
        match self {
            AgentRole::Literature => "literature",
            AgentRole::Planning => "planning",
            AgentRole::PlanningInstructor => "planning_instructor",
            AgentRole::DataInstructor => "data_instructor",
            AgentRole::Coding => "coding",
            AgentRole::CodingInstructor => "coding_instructor",
            AgentRole::Scoring => "scoring",
        }
    }

    /// Roles that may drive tools through the ReAct protocol.
    pub fn has_tool_access(self) -> bool {
        matches!(self, AgentRole::Literature | AgentRole::Coding)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PromptStrategy {
    #[serde(rename = "direct")]
    Direct,
    #[serde(rename = "cot")]
    CoT,
    #[serde(rename = "react")]
    ReAct,
    #[serde(rename = "plan_and_solve")]
    PlanAndSolve,
}

impl PromptStrategy {
    pub fn slug(self) -> &'static str {
        match self {
            PromptStrategy::Direct => "direct",
            PromptStrategy::CoT => "cot",
            PromptStrategy::ReAct => "react",
            PromptStrategy::PlanAndSolve => "plan_and_solve",
        }
    }

    pub fn allowed_for(self, role: AgentRole) -> bool {
        self != PromptStrategy::ReAct || role.has_tool_access()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    Scripted,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub mode: BackendMode,
    pub endpoint: String,
    pub model_name: String,
    pub temperature: f64,
    pub fixture_dir: PathBuf,
    pub max_react_steps: u32,
    /// Name of the environment variable holding the API key; empty = no auth.
    pub api_key_env: String,
    /// Dotted path to the reply text inside the response JSON.
    pub response_text_path: String,
    pub timeout_s: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            mode: BackendMode::Scripted,
            endpoint: String::new(),
            model_name: "offline-fixture".to_string(),
            temperature: 1.0,
            fixture_dir: PathBuf::from("fixtures"),
            max_react_steps: 8,
            api_key_env: String::new(),
            response_text_path: "choices.0.message.content".to_string(),
            timeout_s: 60,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |detail: &str| {
            Err(AgentError::InvalidConfig {
                detail: detail.to_string(),
            })
        };
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be finite and >= 0");
        }
        if self.max_react_steps < 1 {
            return fail("max_react_steps must be >= 1");
        }
        if self.mode == BackendMode::Live && self.endpoint.is_empty() {
            return fail("live mode requires an endpoint");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AgentMessage {
    pub role: AgentRole,
    pub strategy: PromptStrategy,
    pub content: String,
    pub context_refs: Vec<u64>,
}

impl AgentMessage {
    pub fn new(
        role: AgentRole,
        strategy: PromptStrategy,
        content: String,
        context_refs: Vec<u64>,
    ) -> Result<Self, AgentError> {
        if content.is_empty() {
            return Err(AgentError::EmptyContent);
        }
        if !strategy.allowed_for(role) {
            return Err(AgentError::StrategyNotAllowed { role, strategy });
        }
        Ok(Self {
            role,
            strategy,
            content,
            context_refs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn react_is_restricted_to_tool_roles() {
        assert!(PromptStrategy::ReAct.allowed_for(AgentRole::Literature));
        assert!(PromptStrategy::ReAct.allowed_for(AgentRole::Coding));
        assert!(!PromptStrategy::ReAct.allowed_for(AgentRole::Planning));
        assert!(!PromptStrategy::ReAct.allowed_for(AgentRole::Scoring));
        assert!(PromptStrategy::CoT.allowed_for(AgentRole::Planning));
        let err = AgentMessage::new(
            AgentRole::Planning,
            PromptStrategy::ReAct,
            "x".to_string(),
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::StrategyNotAllowed { .. }));
    }

    #[test]
    fn message_content_must_be_non_empty() {
        let err = AgentMessage::new(
            AgentRole::Planning,
            PromptStrategy::Direct,
            String::new(),
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::EmptyContent));
    }

    #[test]
    fn backend_config_defaults_and_validation() {
        let cfg = BackendConfig::default();
        assert_eq!(cfg.temperature, 1.0);
        assert_eq!(cfg.max_react_steps, 8);
        assert_eq!(cfg.timeout_s, 60);
        cfg.validate().unwrap();
        let live = BackendConfig {
            mode: BackendMode::Live,
            ..BackendConfig::default()
        };
        assert!(live.validate().is_err());
        let bad = BackendConfig {
            max_react_steps: 0,
            ..BackendConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn role_slugs_are_snake_case() {
        assert_eq!(AgentRole::PlanningInstructor.slug(), "planning_instructor");
        assert_eq!(
            serde_json::to_string(&AgentRole::CodingInstructor).unwrap(),
            "\"coding_instructor\""
        );
        assert_eq!(
            serde_json::to_string(&PromptStrategy::PlanAndSolve).unwrap(),
            "\"plan_and_solve\""
        );
    }
}
