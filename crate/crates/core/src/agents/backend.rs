//! Chat backends: deterministic scripted fixture replay and a live HTTP
//! client, behind one trait so the orchestrator never knows the difference.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{AgentError, AgentMessage, AgentRole, BackendConfig};
use crate::memory::{Stage, SystemMemory};

pub trait ChatBackend: Send {
    fn complete_raw(
        &mut self,
        role: AgentRole,
        stage: Stage,
        prompt: &str,
    ) -> Result<String, AgentError>;
}

/// Replays canned turns from `<root>/<role>/stage<N>/iter<k>.txt`, advancing
/// a per-(role, stage) counter on each call. An optional sidecar
/// `iter<k>.guard` file pins a sha256 over a prompt prefix to catch drift in
/// prompt construction.
pub struct ScriptedBackend {
    root: PathBuf,
    counters: HashMap<(AgentRole, Stage), u32>,
}

impl ScriptedBackend {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            counters: HashMap::new(),
        }
    }

    fn fixture_key(role: AgentRole, stage: Stage, iter: u32) -> String {
        format!(
            "{}/stage{}/iter{}",
            role.slug(),
            stage.pipeline_index(),
            iter
        )
    }
}

fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Guard format: "<prefix_len> <sha256_hex>" on the first line.
fn guard_matches(spec: &str, prompt: &str) -> Result<bool, String> {
    let line = spec.lines().next().unwrap_or("");
    let (len_text, want_hex) = line
        .split_once(' ')
        .ok_or_else(|| format!("guard line {line:?} is not \"<len> <hex>\""))?;
    let len: usize = len_text
        .parse()
        .map_err(|_| format!("guard prefix length {len_text:?} is not an integer"))?;
    let bytes = prompt.as_bytes();
    if bytes.len() < len {
        return Ok(false);
    }
    Ok(sha256_hex(&bytes[..len]) == want_hex.trim())
}

impl ChatBackend for ScriptedBackend {
    fn complete_raw(
        &mut self,
        role: AgentRole,
        stage: Stage,
        prompt: &str,
    ) -> Result<String, AgentError> {
        let iter = *self.counters.get(&(role, stage)).unwrap_or(&0);
        let key = Self::fixture_key(role, stage, iter);
        let path = self.root.join(format!("{key}.txt"));
        let text = std::fs::read_to_string(&path)
            .map_err(|_| AgentError::FixtureMissing { key: key.clone() })?;
        let guard_path = self.root.join(format!("{key}.guard"));
        if let Ok(spec) = std::fs::read_to_string(&guard_path) {
            let matched = guard_matches(&spec, prompt)
                .map_err(|detail| AgentError::MalformedResponse { detail })?;
            if !matched {
                return Err(AgentError::FixtureMissing {
                    key: format!("{key} (prompt guard mismatch)"),
                });
            }
        }
        self.counters.insert((role, stage), iter + 1);
        Ok(text)
    }
}

/// POSTs `{model, temperature, messages}` to a chat-completion endpoint and
/// extracts the reply text via the configured dotted path.
pub struct LiveBackend {
    cfg: BackendConfig,
    agent: ureq::Agent,
}

impl LiveBackend {
    pub fn new(cfg: BackendConfig) -> Result<Self, AgentError> {
        cfg.validate()?;
        let agent_cfg = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_s)))
            .build();
        Ok(Self {
            cfg,
            agent: agent_cfg.new_agent(),
        })
    }
}

fn extract_path<'a>(doc: &'a Value, path: &str) -> Option<&'a Value> {
    let mut node = doc;
    for part in path.split('.') {
        node = match part.parse::<usize>() {
            Ok(ix) => node.get(ix)?,
            Err(_) => node.get(part)?,
        };
    }
    Some(node)
}

impl ChatBackend for LiveBackend {
    fn complete_raw(
        &mut self,
        _role: AgentRole,
        _stage: Stage,
        prompt: &str,
    ) -> Result<String, AgentError> {
        let body = serde_json::json!({
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut request = self.agent.post(&self.cfg.endpoint);
        if !self.cfg.api_key_env.is_empty() {
            if let Ok(key) = std::env::var(&self.cfg.api_key_env) {
                request = request.header("authorization", &format!("Bearer {key}"));
            }
        }
        let mut response =
            request
                .send_json(&body)
                .map_err(|e| AgentError::BackendUnavailable {
                    reason: e.to_string(),
                })?;
        let doc: Value =
            response
                .body_mut()
                .read_json()
                .map_err(|e| AgentError::MalformedResponse {
                    detail: e.to_string(),
                })?;
        let text = extract_path(&doc, &self.cfg.response_text_path)
            .and_then(Value::as_str)
            .ok_or_else(|| AgentError::MalformedResponse {
                detail: format!("no text at path {:?}", self.cfg.response_text_path),
            })?;
        Ok(text.to_string())
    }
}

/// Sends one message and records the exchange to memory as
/// kind "agent_exchange" under the caller's stage.
pub fn complete(
    backend: &mut dyn ChatBackend,
    message: &AgentMessage,
    stage: Stage,
    task_id: &str,
    memory: &mut SystemMemory,
) -> Result<String, AgentError> {
    let response = backend.complete_raw(message.role, stage, &message.content)?;
    memory.append(
        task_id,
        stage,
        message.role,
        "agent_exchange",
        serde_json::json!({
            "strategy": message.strategy.slug(),
            "prompt": message.content,
            "response": response,
            "context_refs": message.context_refs,
        }),
    )?;
    Ok(response)
}
