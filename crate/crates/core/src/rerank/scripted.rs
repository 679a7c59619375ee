//! Deterministic chat clients for offline runs and tests.
//!
//! [`ScriptedChatClient`] answers rerank prompts without a network: a
//! query with a pinned reply in its script returns that reply verbatim;
//! any other query gets keyword negation handling — "no X", "not X",
//! "without X" exclude candidates whose documents mention X or a
//! scripted synonym of X, and the rest keep their stage-1 order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{ChatClient, ChatError};

/// Script contents: pinned replies per query plus a synonym table for
/// negation matching.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct ChatScript {
    #[serde(default)]
    pub replies: BTreeMap<String, String>,
    #[serde(default)]
    pub synonyms: BTreeMap<String, Vec<String>>,
}

/// Offline stand-in for the remote chat model. Deterministic: the reply
/// is a pure function of the prompt and the script.
#[derive(Debug, Clone, Default)]
pub struct ScriptedChatClient {
    script: ChatScript,
}

impl ScriptedChatClient {
    pub fn new(script: ChatScript) -> Self {
        Self { script }
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(json)?))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ChatError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|err| ChatError::BadResponse(format!("cannot read chat script: {err}")))?;
        Self::from_json(&text)
            .map_err(|err| ChatError::BadResponse(format!("cannot parse chat script: {err}")))
    }

    fn negated_terms(&self, query: &str) -> Vec<String> {
        let lowered = query.to_lowercase();
        let tokens: Vec<&str> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .collect();

        let mut terms = Vec::new();
        let mut negating = false;
        for token in tokens {
            match token {
                "no" | "not" | "without" => negating = true,
                "or" | "and" => {}
                term if negating => terms.push(term.to_owned()),
                _ => {}
            }
        }

        let mut expanded = Vec::new();
        for term in terms {
            if let Some(synonyms) = self.script.synonyms.get(&term) {
                expanded.extend(synonyms.iter().map(|s| s.to_lowercase()));
            }
            expanded.push(term);
        }
        expanded.sort();
        expanded.dedup();
        expanded
    }
}

impl ChatClient for ScriptedChatClient {
    fn complete(&self, system_text: &str, user_text: &str) -> Result<String, ChatError> {
        let prompt = parse_prompt(user_text)?;

        if let Some(reply) = self.script.replies.get(prompt.query) {
            return Ok(reply.clone());
        }

        let top_n = parse_top_n(system_text).unwrap_or(3);
        let excluded = self.negated_terms(prompt.query);
        let survivors: Vec<&str> = prompt
            .candidates
            .iter()
            .filter(|(_, document)| {
                let lowered = document.to_lowercase();
                !excluded.iter().any(|term| lowered.contains(term))
            })
            .map(|(id, _)| id.as_str())
            .take(top_n)
            .collect();

        Ok(serde_json::to_string(&survivors).expect("id array serializes"))
    }
}

/// Chat client that always fails; exercises the transport-fallback path.
#[derive(Debug, Clone, Copy, Default)]
pub struct FailingChatClient;

impl ChatClient for FailingChatClient {
    fn complete(&self, _: &str, _: &str) -> Result<String, ChatError> {
        Err(ChatError::Transport("scripted failure".into()))
    }
}

struct ParsedPrompt<'a> {
    query: &'a str,
    candidates: Vec<(String, String)>,
}

fn parse_prompt(user_text: &str) -> Result<ParsedPrompt<'_>, ChatError> {
    let query = user_text
        .lines()
        .next()
        .and_then(|line| line.strip_prefix("Query: "))
        .ok_or_else(|| ChatError::BadResponse("prompt is missing a query line".into()))?;

    let candidate_block = user_text
        .split_once("Candidates:\n")
        .map(|(_, block)| block)
        .unwrap_or("");
    let candidates = candidate_block
        .lines()
        .filter_map(|line| {
            line.split_once(". ")
                .map(|(id, document)| (id.to_owned(), document.to_owned()))
        })
        .collect();

    Ok(ParsedPrompt { query, candidates })
}

fn parse_top_n(system_text: &str) -> Option<usize> {
    let rest = system_text.split_once("select the ")?.1;
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}
