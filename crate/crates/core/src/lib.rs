//! Two-stage semantic search over CSV corpora.
//!
//! Stage 1 embeds documents and queries into a shared vector space and
//! shortlists candidates by exact flat-index similarity search. Stage 2
//! optionally hands the shortlist to a chat-completion LLM that selects
//! and ranks the most relevant items, which handles negations and
//! conceptual constraints that pure vector similarity misses.
//!
//! Modules follow the data flow:
//!
//! - [`ingest`]: CSV corpora into [`ingest::Record`]s with composed document text
//! - [`embed`]: text into vectors, via a deterministic local hasher or a
//!   remote OpenAI-compatible endpoint
//! - [`index`]: exact flat vector index with top-k search and a binary
//!   on-disk format
//! - [`rerank`]: prompt construction, LLM reply parsing, and safe fallback
//! - [`pipeline`]: raw and LLM-assisted search, end to end, with per-stage
//!   timings
//! - [`eval`]: precision@N comparison of raw vs assisted search over
//!   judged query sets

pub mod embed;
pub mod eval;
pub mod index;
pub mod ingest;
pub mod net;
pub mod pipeline;
pub mod rerank;

pub use embed::{EmbedError, EmbeddingProvider, EmbeddingVector, LocalEmbedder, RemoteEmbedder};
pub use eval::{load_queries, precision_at_n, run_eval, Category, EvalError, EvalReport, JudgedQuery};
pub use index::{
    build_index, load_index, save_index, search, similarity, FlatIndex, IndexError, Metric,
    ScoredMatch, Shortlist,
};
pub use ingest::{compose_document, load_csv, CorpusSchema, IngestError, Record};
pub use pipeline::{Pipeline, PipelineConfig, PipelineError, SearchMode, SearchResult, Timings};
pub use rerank::{
    build_prompt, parse_reply, rerank, ChatClient, ChatError, DegradedReason, RerankOutcome,
    RerankRequest, ScriptedChatClient,
};
