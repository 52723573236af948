//! Literature search: offline topic-file corpus (default) or an online
//! scholarly endpoint with configurable response paths.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rank::tokenize;
use super::ToolError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperHit {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i32,
    pub venue: String,
    pub source_id: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OnlineSearchConfig {
    pub endpoint: String,
    /// Dotted path to the result array in the response body.
    pub items_path: String,
    pub title_path: String,
    pub abstract_path: String,
    pub year_path: String,
    pub venue_path: String,
    pub id_path: String,
    pub timeout_s: u64,
}

impl Default for OnlineSearchConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            items_path: "data".to_string(),
            title_path: "title".to_string(),
            abstract_path: "abstract".to_string(),
            year_path: "year".to_string(),
            venue_path: "venue".to_string(),
            id_path: "paperId".to_string(),
            timeout_s: 60,
        }
    }
}

#[derive(Clone, Debug)]
pub enum SearchBackend {
    /// Directory of JSON topic files, each holding a `PaperHit` array. A
    /// topic matches when any token of its file stem appears in the query.
    Offline {
        corpus_dir: PathBuf,
    },
    Online(OnlineSearchConfig),
}

pub fn search_literature(
    backend: &SearchBackend,
    query: &str,
    limit: usize,
) -> Result<Vec<PaperHit>, ToolError> {
    assert!(limit >= 1, "limit must be >= 1");
    if query.trim().is_empty() {
        return Err(ToolError::EmptyQuery);
    }
    let mut hits = match backend {
        SearchBackend::Offline { corpus_dir } => offline_search(corpus_dir, query)?,
        SearchBackend::Online(cfg) => online_search(cfg, query, limit)?,
    };
    hits.truncate(limit);
    Ok(hits)
}

fn offline_search(corpus_dir: &std::path::Path, query: &str) -> Result<Vec<PaperHit>, ToolError> {
    let unavailable = |reason: String| ToolError::SearchUnavailable { reason };
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir)
        .map_err(|e| unavailable(format!("corpus dir {}: {e}", corpus_dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let query_tokens = tokenize(query);
    let mut hits = Vec::new();
    for file in files {
        let stem = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let matches = tokenize(&stem).iter().any(|t| query_tokens.contains(t));
        if !matches {
            continue;
        }
        let raw = std::fs::read_to_string(&file)
            .map_err(|e| unavailable(format!("corpus file {}: {e}", file.display())))?;
        let parsed: Vec<PaperHit> = serde_json::from_str(&raw)
            .map_err(|e| unavailable(format!("corpus file {}: {e}", file.display())))?;
        hits.extend(parsed);
    }
    Ok(hits)
}

fn path_get<'a>(doc: &'a Value, path: &str) -> Option<&'a Value> {
    let mut node = doc;
    for part in path.split('.') {
        node = match part.parse::<usize>() {
            Ok(ix) => node.get(ix)?,
            Err(_) => node.get(part)?,
        };
    }
    Some(node)
}

fn online_search(
    cfg: &OnlineSearchConfig,
    query: &str,
    limit: usize,
) -> Result<Vec<PaperHit>, ToolError> {
    let unavailable = |reason: String| ToolError::SearchUnavailable { reason };
    let agent_cfg = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_s)))
        .build();
    let agent = agent_cfg.new_agent();
    let mut response = agent
        .get(&cfg.endpoint)
        .query("query", query)
        .query("limit", &limit.to_string())
        .query("fields", "title,abstract,year,venue")
        .call()
        .map_err(|e| unavailable(e.to_string()))?;
    let doc: Value = response
        .body_mut()
        .read_json()
        .map_err(|e| unavailable(format!("response body: {e}")))?;
    let items = path_get(&doc, &cfg.items_path)
        .and_then(Value::as_array)
        .ok_or_else(|| unavailable(format!("no result array at {:?}", cfg.items_path)))?;
    let text_at = |item: &Value, path: &str| {
        path_get(item, path)
            .and_then(Value::as_str)
            .unwrap_or("")
            .to_string()
    };
    let hits = items
        .iter()
        .filter_map(|item| {
            let title = text_at(item, &cfg.title_path);
            if title.is_empty() {
                return None;
            }
            Some(PaperHit {
                title,
                abstract_text: text_at(item, &cfg.abstract_path),
                year: path_get(item, &cfg.year_path)
                    .and_then(Value::as_i64)
                    .unwrap_or(0) as i32,
                venue: text_at(item, &cfg.venue_path),
                source_id: text_at(item, &cfg.id_path),
            })
        })
        .collect();
    Ok(hits)
}
