//! End-to-end search: embed the query, shortlist by exact vector
//! search, and in assisted mode hand the shortlist to the reranker.
//!
//! A [`Pipeline`] owns an immutable index, the corpus documents, an
//! embedding provider, and optionally a chat client; each query call is
//! independent and safe to run concurrently. Per-stage wall-clock
//! timings ride along in every result so callers can account for the
//! reranker's extra latency.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbedError, EmbeddingProvider};
use crate::index::{search, FlatIndex, IndexError, Shortlist};
use crate::ingest::Record;
use crate::rerank::{rerank, ChatClient, RerankRequest};

/// Tunables for one search call. Defaults follow the two-stage scheme:
/// a 15-item shortlist reranked down to 3 results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub shortlist_k: usize,
    pub top_n: usize,
    pub mode: SearchMode,
    /// Pad short assisted selections back to `top_n` from shortlist
    /// order. Off by default: reinjecting items the reranker filtered
    /// out would undo its work.
    pub pad_to_n: bool,
}

pub const DEFAULT_SHORTLIST_K: usize = 15;
pub const DEFAULT_TOP_N: usize = 3;

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            shortlist_k: DEFAULT_SHORTLIST_K,
            top_n: DEFAULT_TOP_N,
            mode: SearchMode::Raw,
            pad_to_n: false,
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<(), PipelineError> {
        if self.shortlist_k == 0 || self.top_n == 0 {
            return Err(PipelineError::InvalidConfig(
                "shortlist_k and top_n must be at least 1".into(),
            ));
        }
        if self.top_n > self.shortlist_k {
            return Err(PipelineError::InvalidConfig(format!(
                "top_n ({}) cannot exceed shortlist_k ({})",
                self.top_n, self.shortlist_k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Raw,
    Assisted,
}

impl SearchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchMode::Raw => "raw",
            SearchMode::Assisted => "assisted",
        }
    }
}

impl std::str::FromStr for SearchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(SearchMode::Raw),
            "assisted" => Ok(SearchMode::Assisted),
            other => Err(format!("unknown mode {other:?} (expected raw|assisted)")),
        }
    }
}

/// Final ranked answer for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub results: Vec<ResultRow>,
    pub mode: SearchMode,
    pub degraded: bool,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub rank: u32,
    pub record_id: String,
    pub document: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage1_score: Option<f32>,
}

/// Wall-clock milliseconds per stage. `rerank_ms` is present exactly
/// when the call ran in assisted mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub embed_ms: u64,
    pub search_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rerank_ms: Option<u64>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("index was built with model {index:?} but the provider embeds with {provider:?}")]
    ModelMismatch { index: String, provider: String },
    #[error("index record {id:?} has no document in the corpus")]
    CorpusMismatch { id: String },
    #[error("assisted mode requires a chat client")]
    MissingChatClient,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Search engine over one corpus: index + documents + providers.
pub struct Pipeline {
    index: FlatIndex,
    documents: HashMap<String, String>,
    provider: Box<dyn EmbeddingProvider>,
    chat: Option<Box<dyn ChatClient>>,
}

impl Pipeline {
    /// Assemble a pipeline, checking that the provider embeds in the
    /// index's model space and that every indexed id has a document.
    pub fn new(
        index: FlatIndex,
        records: &[Record],
        provider: Box<dyn EmbeddingProvider>,
        chat: Option<Box<dyn ChatClient>>,
    ) -> Result<Self, PipelineError> {
        if provider.model_id() != index.model_id() {
            return Err(PipelineError::ModelMismatch {
                index: index.model_id().to_owned(),
                provider: provider.model_id().to_owned(),
            });
        }
        let documents: HashMap<String, String> = records
            .iter()
            .map(|record| (record.id.clone(), record.document.clone()))
            .collect();
        for id in index.record_ids() {
            if !documents.contains_key(id) {
                return Err(PipelineError::CorpusMismatch { id: id.to_owned() });
            }
        }
        Ok(Self {
            index,
            documents,
            provider,
            chat,
        })
    }

    pub fn index(&self) -> &FlatIndex {
        &self.index
    }

    pub fn record_ids(&self) -> impl Iterator<Item = &str> {
        self.index.record_ids()
    }

    /// Run one query in the mode given by `config`.
    pub fn search(&self, query: &str, config: &PipelineConfig) -> Result<SearchResult, PipelineError> {
        config.validate()?;
        match config.mode {
            SearchMode::Raw => self.raw_search(query, config),
            SearchMode::Assisted => self.assisted_search(query, config),
        }
    }

    fn raw_search(&self, query: &str, config: &PipelineConfig) -> Result<SearchResult, PipelineError> {
        let embed_start = Instant::now();
        let query_vector = self.provider.embed_one(query)?;
        let embed_ms = elapsed_ms(embed_start);

        let search_start = Instant::now();
        let matches = search(&self.index, &query_vector, config.top_n)?;
        let search_ms = elapsed_ms(search_start);

        let results = matches
            .iter()
            .enumerate()
            .map(|(position, hit)| ResultRow {
                rank: position as u32 + 1,
                record_id: hit.record_id.clone(),
                document: self.documents[&hit.record_id].clone(),
                stage1_score: Some(hit.score),
            })
            .collect();

        Ok(SearchResult {
            results,
            mode: SearchMode::Raw,
            degraded: false,
            timings: Timings {
                embed_ms,
                search_ms,
                rerank_ms: None,
            },
        })
    }

    fn assisted_search(&self, query: &str, config: &PipelineConfig) -> Result<SearchResult, PipelineError> {
        let chat = self.chat.as_deref().ok_or(PipelineError::MissingChatClient)?;

        let embed_start = Instant::now();
        let query_vector = self.provider.embed_one(query)?;
        let embed_ms = elapsed_ms(embed_start);

        let search_start = Instant::now();
        let shortlist = search(&self.index, &query_vector, config.shortlist_k)?;
        let search_ms = elapsed_ms(search_start);

        let candidates: Vec<(String, String)> = shortlist
            .iter()
            .map(|hit| (hit.record_id.clone(), self.documents[&hit.record_id].clone()))
            .collect();
        let request = RerankRequest::new(query, candidates, config.top_n)
            .expect("shortlist is non-empty with unique ids");

        let rerank_start = Instant::now();
        let outcome = rerank(&request, chat);
        let rerank_ms = elapsed_ms(rerank_start);

        let mut selected = outcome.selected;
        if config.pad_to_n {
            pad_from_shortlist(&mut selected, &shortlist, config.top_n);
        }

        let stage1_scores: HashMap<&str, f32> = shortlist
            .iter()
            .map(|hit| (hit.record_id.as_str(), hit.score))
            .collect();
        let results = selected
            .iter()
            .enumerate()
            .map(|(position, id)| ResultRow {
                rank: position as u32 + 1,
                record_id: id.clone(),
                document: self.documents[id].clone(),
                stage1_score: stage1_scores.get(id.as_str()).copied(),
            })
            .collect();

        Ok(SearchResult {
            results,
            mode: SearchMode::Assisted,
            degraded: outcome.degraded,
            timings: Timings {
                embed_ms,
                search_ms,
                rerank_ms: Some(rerank_ms),
            },
        })
    }
}

fn pad_from_shortlist(selected: &mut Vec<String>, shortlist: &Shortlist, top_n: usize) {
    for hit in shortlist {
        if selected.len() >= top_n {
            break;
        }
        if !selected.iter().any(|id| id == &hit.record_id) {
            selected.push(hit.record_id.clone());
        }
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    u64::try_from(start.elapsed().as_millis()).unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::LocalEmbedder;
    use crate::index::{build_index, Metric};
    use crate::ingest::{load_csv_reader, CorpusSchema};
    use crate::rerank::{ChatError, FailingChatClient, ScriptedChatClient};

    const CSV: &str = "\
title,description
Tempura,battered seafood deep fried
Ceviche,raw fish cured in citrus
Sushi,vinegared rice with seafood
Chicken Satay,grilled chicken skewers with peanut sauce
Caprese,tomato and mozzarella salad
Lentil Soup,hearty soup of lentils and vegetables
";

    fn records() -> Vec<Record> {
        let schema = CorpusSchema {
            id_column: None,
            text_columns: vec!["title".into(), "description".into()],
        };
        load_csv_reader(CSV.as_bytes(), &schema).unwrap()
    }

    fn pipeline(chat: Option<Box<dyn ChatClient>>) -> Pipeline {
        let records = records();
        let provider = LocalEmbedder::new(64);
        let pairs = records
            .iter()
            .map(|r| (r.id.clone(), provider.embed_one(&r.document).unwrap()))
            .collect();
        let index = build_index(pairs, Metric::Cosine).unwrap();
        Pipeline::new(index, &records, Box::new(provider), chat).unwrap()
    }

    fn config(mode: SearchMode) -> PipelineConfig {
        PipelineConfig {
            shortlist_k: 15,
            top_n: 3,
            mode,
            pad_to_n: false,
        }
    }

    /// Fails the test if the pipeline ever talks to it.
    struct PoisonedClient;

    impl ChatClient for PoisonedClient {
        fn complete(&self, _: &str, _: &str) -> Result<String, ChatError> {
            panic!("chat client invoked in raw mode");
        }
    }

    #[test]
    fn raw_mode_never_touches_the_chat_client() {
        let pipeline = pipeline(Some(Box::new(PoisonedClient)));
        let result = pipeline.search("seafood", &config(SearchMode::Raw)).unwrap();
        assert_eq!(result.mode, SearchMode::Raw);
        assert!(!result.degraded);
        assert_eq!(result.timings.rerank_ms, None);
    }

    #[test]
    fn raw_self_match_ranks_first() {
        let pipeline = pipeline(None);
        let result = pipeline
            .search("title: Caprese, description: tomato and mozzarella salad", &config(SearchMode::Raw))
            .unwrap();
        assert_eq!(result.results[0].document, "title: Caprese, description: tomato and mozzarella salad");
        let score = result.results[0].stage1_score.unwrap();
        assert!((score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn raw_results_clamp_to_corpus_size() {
        let pipeline = pipeline(None);
        let wide = PipelineConfig {
            shortlist_k: 50,
            top_n: 50,
            mode: SearchMode::Raw,
            pad_to_n: false,
        };
        let result = pipeline.search("soup", &wide).unwrap();
        assert_eq!(result.results.len(), 6);
        let ranks: Vec<u32> = result.results.iter().map(|r| r.rank).collect();
        assert_eq!(ranks, (1..=6).collect::<Vec<u32>>());
    }

    #[test]
    fn assisted_filters_negated_terms() {
        let script = ScriptedChatClient::from_json(
            r#"{"synonyms": {"fish": ["seafood"], "shrimp": ["seafood"]}}"#,
        )
        .unwrap();
        let pipeline = pipeline(Some(Box::new(script)));
        let result = pipeline
            .search("food with no fish or shrimp", &config(SearchMode::Assisted))
            .unwrap();
        assert!(!result.degraded);
        assert!(result.timings.rerank_ms.is_some());
        for row in &result.results {
            let lowered = row.document.to_lowercase();
            assert!(
                !lowered.contains("fish") && !lowered.contains("seafood"),
                "negated document survived: {}",
                row.document
            );
            assert!(row.stage1_score.is_some());
        }
    }

    #[test]
    fn assisted_results_are_subset_of_shortlist() {
        struct WildClient;
        impl ChatClient for WildClient {
            fn complete(&self, _: &str, _: &str) -> Result<String, ChatError> {
                Ok(r#"["r0003","zzz","r0001","r0003"]"#.to_owned())
            }
        }
        let pipeline = pipeline(Some(Box::new(WildClient)));
        let result = pipeline.search("anything", &config(SearchMode::Assisted)).unwrap();
        let ids: Vec<&str> = result.results.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["r0003", "r0001"]);
    }

    #[test]
    fn failing_client_degrades_to_raw_order() {
        let pipeline = pipeline(Some(Box::new(FailingChatClient)));
        let assisted = pipeline
            .search("grilled chicken", &config(SearchMode::Assisted))
            .unwrap();
        let raw = pipeline.search("grilled chicken", &config(SearchMode::Raw)).unwrap();
        assert!(assisted.degraded);
        let assisted_ids: Vec<&str> = assisted.results.iter().map(|r| r.record_id.as_str()).collect();
        let raw_ids: Vec<&str> = raw.results.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(assisted_ids, raw_ids);
    }

    #[test]
    fn raw_ids_prefix_the_stage1_shortlist() {
        let pipeline = pipeline(None);
        let raw = pipeline.search("japanese seafood", &config(SearchMode::Raw)).unwrap();
        let query_vector = LocalEmbedder::new(64).embed_one("japanese seafood").unwrap();
        let full = search(pipeline.index(), &query_vector, 15).unwrap();
        for (row, hit) in raw.results.iter().zip(&full) {
            assert_eq!(row.record_id, hit.record_id);
        }
    }

    #[test]
    fn pad_to_n_refills_from_shortlist_order() {
        struct OneIdClient;
        impl ChatClient for OneIdClient {
            fn complete(&self, _: &str, _: &str) -> Result<String, ChatError> {
                Ok(r#"["r0005"]"#.to_owned())
            }
        }
        let pipeline = pipeline(Some(Box::new(OneIdClient)));
        let mut cfg = config(SearchMode::Assisted);
        cfg.pad_to_n = true;
        let result = pipeline.search("tomato salad", &cfg).unwrap();
        assert_eq!(result.results.len(), 3);
        assert_eq!(result.results[0].record_id, "r0005");
        assert!(!result.degraded);
        // padding must not duplicate the selected id
        let unique: std::collections::HashSet<&str> =
            result.results.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(unique.len(), 3);
    }

    #[test]
    fn assisted_without_chat_client_is_an_error() {
        let pipeline = pipeline(None);
        let err = pipeline.search("x", &config(SearchMode::Assisted)).unwrap_err();
        assert!(matches!(err, PipelineError::MissingChatClient));
    }

    #[test]
    fn model_mismatch_is_rejected_at_construction() {
        let records = records();
        let indexing_provider = LocalEmbedder::new(64);
        let pairs = records
            .iter()
            .map(|r| (r.id.clone(), indexing_provider.embed_one(&r.document).unwrap()))
            .collect();
        let index = build_index(pairs, Metric::Cosine).unwrap();
        let Err(err) = Pipeline::new(index, &records, Box::new(LocalEmbedder::new(32)), None)
        else {
            panic!("mismatched model accepted");
        };
        assert!(matches!(err, PipelineError::ModelMismatch { .. }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let pipeline = pipeline(None);
        let bad = PipelineConfig {
            shortlist_k: 2,
            top_n: 3,
            mode: SearchMode::Raw,
            pad_to_n: false,
        };
        assert!(matches!(
            pipeline.search("x", &bad),
            Err(PipelineError::InvalidConfig(_))
        ));
        let zero = PipelineConfig {
            shortlist_k: 0,
            top_n: 0,
            mode: SearchMode::Raw,
            pad_to_n: false,
        };
        assert!(pipeline.search("x", &zero).is_err());
    }

    #[test]
    fn search_result_json_round_trips() {
        let pipeline = pipeline(Some(Box::new(FailingChatClient)));
        for mode in [SearchMode::Raw, SearchMode::Assisted] {
            let result = pipeline.search("lentil soup", &config(mode)).unwrap();
            let json = serde_json::to_string(&result).unwrap();
            let back: SearchResult = serde_json::from_str(&json).unwrap();
            assert_eq!(back, result);
            // raw results must not mention rerank timing at all
            if mode == SearchMode::Raw {
                assert!(!json.contains("rerank_ms"));
            }
        }
    }

    #[test]
    fn empty_query_surfaces_embed_error() {
        let pipeline = pipeline(None);
        assert!(matches!(
            pipeline.search("???", &config(SearchMode::Raw)),
            Err(PipelineError::Embed(EmbedError::EmptyText))
        ));
    }
}
