//! Exact flat vector index.
//!
//! Stores `(record id, vector)` pairs and answers top-k queries by a
//! full scan: every entry is scored against the query and the best
//! min(k, n) are returned ordered by `(score desc, record_id asc)`. The
//! corpora this serves are small enough that exactness beats any
//! approximation structure.
//!
//! Scores accumulate in f64 and round to f32 once, so results do not
//! depend on platform summation quirks. Ties break by ascending record
//! id, which makes search output a total function of the entry set.

mod format;

pub use format::{load_index, save_index};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingVector;

/// Similarity metric. Higher scores are always better; l2 distances are
/// negated into scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Dot,
    L2,
}

impl Metric {
    pub(crate) fn code(self) -> u8 {
        match self {
            Metric::Cosine => 0,
            Metric::Dot => 1,
            Metric::L2 => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Metric::Cosine),
            1 => Some(Metric::Dot),
            2 => Some(Metric::L2),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Metric::Cosine => "cosine",
            Metric::Dot => "dot",
            Metric::L2 => "l2",
        };
        f.write_str(name)
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "dot" => Ok(Metric::Dot),
            "l2" => Ok(Metric::L2),
            other => Err(format!("unknown metric {other:?} (expected cosine|dot|l2)")),
        }
    }
}

/// Immutable searchable store of record vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    entries: Vec<(String, Vec<f32>)>,
    dim: usize,
    metric: Metric,
    model_id: String,
}

impl FlatIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries
            .iter()
            .map(|(id, vector)| (id.as_str(), vector.as_slice()))
    }

    pub fn record_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub(crate) fn from_raw_parts(
        entries: Vec<(String, Vec<f32>)>,
        dim: usize,
        metric: Metric,
        model_id: String,
    ) -> Self {
        Self {
            entries,
            dim,
            metric,
            model_id,
        }
    }
}

/// One shortlist element: a record id with its stage-1 score and
/// 1-based rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredMatch {
    pub record_id: String,
    pub score: f32,
    pub rank: u32,
}

/// Stage-1 output: matches ordered by `(score desc, record_id asc)`.
pub type Shortlist = Vec<ScoredMatch>;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot build an index from zero vectors")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("duplicate record id {id:?}")]
    DuplicateId { id: String },
    #[error("mixed embedding models: {expected:?} vs {found:?}")]
    ModelMismatch { expected: String, found: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("cosine similarity undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("{what} too long for the index format ({len} bytes, max 65535)")]
    FieldTooLong { what: &'static str, len: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("unsupported index version {version}")]
    VersionUnsupported { version: u8 },
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
}

/// Build an immutable index over `(record_id, vector)` pairs. Vector
/// bytes are kept exactly as supplied.
pub fn build_index(
    pairs: Vec<(String, EmbeddingVector)>,
    metric: Metric,
) -> Result<FlatIndex, IndexError> {
    let first = pairs.first().ok_or(IndexError::EmptyInput)?;
    let dim = first.1.dim();
    let model_id = first.1.model_id().to_owned();

    let mut seen = std::collections::HashSet::with_capacity(pairs.len());
    let mut entries = Vec::with_capacity(pairs.len());
    for (id, vector) in pairs {
        if vector.dim() != dim {
            return Err(IndexError::DimMismatch {
                expected: dim,
                found: vector.dim(),
            });
        }
        if vector.model_id() != model_id {
            return Err(IndexError::ModelMismatch {
                expected: model_id,
                found: vector.model_id().to_owned(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(IndexError::DuplicateId { id });
        }
        entries.push((id, vector.values().to_vec()));
    }
    Ok(FlatIndex {
        entries,
        dim,
        metric,
        model_id,
    })
}

/// Score two vectors under a metric. Sums run in f64; the result rounds
/// to f32 once at the end.
pub fn similarity(a: &[f32], b: &[f32], metric: Metric) -> Result<f32, IndexError> {
    if a.len() != b.len() {
        return Err(IndexError::DimMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let score = match metric {
        Metric::Dot => dot64(a, b) as f32,
        Metric::Cosine => {
            let norm_a = dot64(a, a).sqrt();
            let norm_b = dot64(b, b).sqrt();
            if norm_a == 0.0 || norm_b == 0.0 {
                return Err(IndexError::ZeroNorm);
            }
            (dot64(a, b) / (norm_a * norm_b)) as f32
        }
        Metric::L2 => {
            let sum: f64 = a
                .iter()
                .zip(b)
                .map(|(&x, &y)| {
                    let d = f64::from(x) - f64::from(y);
                    d * d
                })
                .sum();
            -(sum.sqrt()) as f32
        }
    };
    Ok(score)
}

fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Top-k search: the min(k, n) best entries by `(score desc, id asc)`,
/// ranked 1..=m.
pub fn search(index: &FlatIndex, query: &EmbeddingVector, k: usize) -> Result<Shortlist, IndexError> {
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    if query.dim() != index.dim {
        return Err(IndexError::DimMismatch {
            expected: index.dim,
            found: query.dim(),
        });
    }

    let mut scored: Vec<(&str, f32)> = Vec::with_capacity(index.entries.len());
    for (id, vector) in &index.entries {
        let score = similarity(query.values(), vector, index.metric)?;
        scored.push((id.as_str(), score));
    }
    // scores are never NaN: inputs are finite and cosine guards zero norms
    scored.sort_by(|(id_a, score_a), (id_b, score_b)| {
        score_b
            .partial_cmp(score_a)
            .expect("finite scores")
            .then_with(|| id_a.cmp(id_b))
    });
    scored.truncate(k);

    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(position, (id, score))| ScoredMatch {
            record_id: id.to_owned(),
            score,
            rank: position as u32 + 1,
        })
        .collect())
}
