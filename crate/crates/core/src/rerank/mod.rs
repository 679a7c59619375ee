//! LLM-assisted reranking of a stage-1 shortlist.
//!
//! Builds a deterministic prompt from the query and shortlisted
//! documents, asks a chat-completion model to pick the most relevant
//! ids, and parses its reply defensively. Any failure, transport or
//! parse, degrades to vector order instead of erroring: the pipeline
//! must always answer, and degradation stays visible in the outcome so
//! evaluation can count it.

mod remote;
mod scripted;

pub use remote::RemoteChatClient;
pub use scripted::{FailingChatClient, ScriptedChatClient};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What stage 2 is asked to do: pick the `top_n` most relevant of the
/// shortlisted `(record_id, document)` candidates for `query`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RerankRequest {
    pub query: String,
    /// Shortlist candidates in stage-1 order.
    pub candidates: Vec<(String, String)>,
    pub top_n: usize,
}

impl RerankRequest {
    pub fn new(
        query: impl Into<String>,
        candidates: Vec<(String, String)>,
        top_n: usize,
    ) -> Result<Self, InvalidRequest> {
        if candidates.is_empty() {
            return Err(InvalidRequest("no candidates".into()));
        }
        if top_n == 0 {
            return Err(InvalidRequest("top_n must be at least 1".into()));
        }
        let mut seen = HashSet::new();
        for (id, _) in &candidates {
            if !seen.insert(id) {
                return Err(InvalidRequest(format!("duplicate candidate id {id:?}")));
            }
        }
        Ok(Self {
            query: query.into(),
            candidates,
            top_n,
        })
    }
}

#[derive(Debug, Error)]
#[error("invalid rerank request: {0}")]
pub struct InvalidRequest(String);

/// Reranking result. `selected` is always a subset of the request's
/// candidate ids, at most `top_n` long; `degraded` marks fallback or an
/// empty selection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankOutcome {
    pub selected: Vec<String>,
    pub degraded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degraded_reason: Option<DegradedReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradedReason {
    ParseFailure,
    TransportFailure,
    EmptySelection,
}

/// Blocking chat-completion contract. Implementations must be safe for
/// concurrent use.
pub trait ChatClient: Send + Sync {
    fn complete(&self, system_text: &str, user_text: &str) -> Result<String, ChatError>;
}

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("chat endpoint rejected credentials (HTTP {status})")]
    AuthFailed { status: u16 },
    #[error("chat endpoint rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("chat transport failure: {0}")]
    Transport(String),
    #[error("bad chat response: {0}")]
    BadResponse(String),
}

#[derive(Debug, Error)]
#[error("reply is not a JSON array of strings")]
pub struct ParseFailure;

/// Render the system and user prompt texts for a request.
///
/// Identical requests produce byte-identical prompts. Candidate
/// documents are flattened to one line each so ids and documents stay
/// aligned.
pub fn build_prompt(request: &RerankRequest) -> (String, String) {
    let top_n = request.top_n;
    let noun = if top_n == 1 { "item" } else { "items" };
    let system_text = format!(
        "You are a search-result ranker. Given a user query and a list of candidate items, \
         select the {top_n} {noun} most relevant to the query and rank them, most relevant \
         first. Respect negations, constraints, and conceptual requirements in the query. \
         Reply with ONLY a JSON array of the selected item ids. Select fewer than {top_n} \
         only if fewer are relevant."
    );

    let mut user_text = format!("Query: {}\n\nCandidates:\n", request.query);
    let lines: Vec<String> = request
        .candidates
        .iter()
        .map(|(id, document)| format!("{id}. {}", flatten_line(document)))
        .collect();
    user_text.push_str(&lines.join("\n"));
    (system_text, user_text)
}

fn flatten_line(text: &str) -> String {
    text.replace("\r\n", " ").replace(['\n', '\r'], " ")
}

/// Parse a model reply into an ordered id list.
///
/// Tolerates surrounding whitespace and a single markdown code fence.
/// Ids outside `valid_ids` are dropped, duplicates keep their first
/// occurrence, and the result is truncated to `top_n`. Anything that is
/// not a JSON array of strings is a [`ParseFailure`].
pub fn parse_reply(
    reply: &str,
    valid_ids: &HashSet<String>,
    top_n: usize,
) -> Result<Vec<String>, ParseFailure> {
    let body = strip_code_fence(reply.trim());
    let parsed: serde_json::Value = serde_json::from_str(body).map_err(|_| ParseFailure)?;
    let array = parsed.as_array().ok_or(ParseFailure)?;

    let mut ids: Vec<&str> = Vec::with_capacity(array.len());
    for item in array {
        ids.push(item.as_str().ok_or(ParseFailure)?);
    }

    let mut selected: Vec<String> = Vec::new();
    for id in ids {
        if valid_ids.contains(id) && !selected.iter().any(|s| s == id) {
            selected.push(id.to_owned());
        }
    }
    selected.truncate(top_n);
    Ok(selected)
}

fn strip_code_fence(text: &str) -> &str {
    let Some(rest) = text.strip_prefix("```") else {
        return text;
    };
    if let Some(newline) = rest.find('\n') {
        // multi-line fence, optionally tagged: ```json\n ... \n```
        if let Some(body) = rest[newline + 1..].strip_suffix("```") {
            return body.trim();
        }
    } else if let Some(body) = rest.strip_suffix("```") {
        // single-line fence with no tag
        return body.trim();
    }
    text
}

/// Run stage 2 for one request. Never fails: transport and parse
/// problems fall back to the first `top_n` candidates in shortlist
/// order, flagged as degraded.
pub fn rerank(request: &RerankRequest, client: &dyn ChatClient) -> RerankOutcome {
    let (system_text, user_text) = build_prompt(request);
    let valid_ids: HashSet<String> = request.candidates.iter().map(|(id, _)| id.clone()).collect();

    let reply = match client.complete(&system_text, &user_text) {
        Ok(reply) => reply,
        Err(_) => return fallback(request, DegradedReason::TransportFailure),
    };

    match parse_reply(&reply, &valid_ids, request.top_n) {
        Err(ParseFailure) => fallback(request, DegradedReason::ParseFailure),
        Ok(selected) if selected.is_empty() => RerankOutcome {
            selected,
            degraded: true,
            degraded_reason: Some(DegradedReason::EmptySelection),
        },
        Ok(selected) => RerankOutcome {
            selected,
            degraded: false,
            degraded_reason: None,
        },
    }
}

fn fallback(request: &RerankRequest, reason: DegradedReason) -> RerankOutcome {
    RerankOutcome {
        selected: request
            .candidates
            .iter()
            .take(request.top_n)
            .map(|(id, _)| id.clone())
            .collect(),
        degraded: true,
        degraded_reason: Some(reason),
    }
}
