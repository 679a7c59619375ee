//! Relevance evaluation: precision@N over judged query sets, raw vs
//! assisted, with per-stage latency aggregation and optional
//! shortlist-size sweeps.
//!
//! Judgments are binary. Precision keeps N in the denominator even when
//! fewer results come back, so a reranker that answers with one
//! (relevant) item scores 1/N, not 1.0.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{Pipeline, PipelineConfig, PipelineError, SearchMode, Timings};

/// One evaluation query with its binary relevance judgments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgedQuery {
    pub query_id: String,
    pub text: String,
    pub category: Category,
    pub relevant_ids: HashSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Simple,
    Complex,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Simple => "simple",
            Category::Complex => "complex",
        }
    }
}

/// Full evaluation output: one row per (query, mode, k), aggregate
/// means per (mode, category), and sweep means when k values were given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_query: Vec<QueryOutcome>,
    pub aggregates: Vec<Aggregate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_sweep: Option<Vec<KSweepPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub query_id: String,
    pub category: Category,
    pub mode: SearchMode,
    pub k: usize,
    pub precision_at_n: f64,
    pub result_ids: Vec<String>,
    pub degraded: bool,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mode: SearchMode,
    pub category: Category,
    pub query_count: usize,
    pub mean_precision_at_n: f64,
    pub mean_embed_ms: f64,
    pub mean_search_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rerank_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepPoint {
    pub k: usize,
    pub mode: SearchMode,
    pub mean_precision_at_n: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("query {query_id:?} marks unknown record {record_id:?} as relevant")]
    UnknownRelevantId { query_id: String, record_id: String },
    #[error("cannot read queries file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse queries file: {0}")]
    BadQueries(#[from] serde_json::Error),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// Fraction of the first `n` result slots filled with relevant ids.
/// The denominator is `n` even when fewer results were returned.
pub fn precision_at_n(result_ids: &[String], relevant: &HashSet<String>, n: usize) -> f64 {
    assert!(n >= 1, "precision@n needs n >= 1");
    let hits = result_ids
        .iter()
        .take(n)
        .filter(|id| relevant.contains(*id))
        .count();
    hits as f64 / n as f64
}

/// Load a queries/qrels file: a JSON array of
/// `{"query_id","text","category","relevant_ids"}`.
pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<JudgedQuery>, EvalError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    Ok(serde_json::from_str(&text)?)
}

/// Run every judged query through the pipeline in the requested modes
/// (and at each sweep k, when given) and assemble the report.
///
/// Rows are ordered by `(query_id, mode, k)`; queries may in principle
/// run in any order without changing the report.
pub fn run_eval(
    pipeline: &Pipeline,
    queries: &[JudgedQuery],
    config: &PipelineConfig,
    modes: &[SearchMode],
    k_values: Option<&[usize]>,
) -> Result<EvalReport, EvalError> {
    let known_ids: HashSet<&str> = pipeline.record_ids().collect();
    for query in queries {
        for id in &query.relevant_ids {
            if !known_ids.contains(id.as_str()) {
                return Err(EvalError::UnknownRelevantId {
                    query_id: query.query_id.clone(),
                    record_id: id.clone(),
                });
            }
        }
    }

    let ks: Vec<usize> = match k_values {
        Some(values) => values.to_vec(),
        None => vec![config.shortlist_k],
    };

    let mut per_query = Vec::with_capacity(queries.len() * modes.len() * ks.len());
    for query in queries {
        for &mode in modes {
            for &k in &ks {
                let run_config = PipelineConfig {
                    shortlist_k: k,
                    mode,
                    ..config.clone()
                };
                let result = pipeline.search(&query.text, &run_config)?;
                let result_ids: Vec<String> =
                    result.results.iter().map(|row| row.record_id.clone()).collect();
                per_query.push(QueryOutcome {
                    query_id: query.query_id.clone(),
                    category: query.category,
                    mode,
                    k,
                    precision_at_n: precision_at_n(&result_ids, &query.relevant_ids, config.top_n),
                    result_ids,
                    degraded: result.degraded,
                    timings: result.timings,
                });
            }
        }
    }
    per_query.sort_by(|a, b| {
        (a.query_id.as_str(), a.mode.as_str(), a.k)
            .cmp(&(b.query_id.as_str(), b.mode.as_str(), b.k))
    });

    let aggregates = aggregate(&per_query);
    let k_sweep = k_values.map(|_| sweep_points(&per_query));

    Ok(EvalReport {
        per_query,
        aggregates,
        k_sweep,
    })
}

fn aggregate(rows: &[QueryOutcome]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(&'static str, Category), Vec<&QueryOutcome>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.mode.as_str(), row.category))
            .or_default()
            .push(row);
    }
    groups
        .into_iter()
        .map(|((_, category), group)| {
            let count = group.len();
            let mode = group[0].mode;
            let rerank_values: Vec<u64> =
                group.iter().filter_map(|row| row.timings.rerank_ms).collect();
            Aggregate {
                mode,
                category,
                query_count: count,
                mean_precision_at_n: mean(group.iter().map(|row| row.precision_at_n)),
                mean_embed_ms: mean(group.iter().map(|row| row.timings.embed_ms as f64)),
                mean_search_ms: mean(group.iter().map(|row| row.timings.search_ms as f64)),
                mean_rerank_ms: (!rerank_values.is_empty())
                    .then(|| mean(rerank_values.iter().map(|&v| v as f64))),
            }
        })
        .collect()
}

fn sweep_points(rows: &[QueryOutcome]) -> Vec<KSweepPoint> {
    let mut groups: BTreeMap<(usize, &'static str), Vec<f64>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.k, row.mode.as_str()))
            .or_default()
            .push(row.precision_at_n);
    }
    groups
        .into_iter()
        .map(|((k, mode), precisions)| KSweepPoint {
            k,
            mode: if mode == "raw" { SearchMode::Raw } else { SearchMode::Assisted },
            mean_precision_at_n: mean(precisions.iter().copied()),
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0f64;
    let mut count = 0usize;
    for value in values {
        sum += value;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Render the aggregate (and sweep) tables for terminal output.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<10} {:<9} {:>7} {:>9} {:>10} {:>11} {:>11}\n",
        "mode", "category", "queries", "mean_p@n", "embed_ms", "search_ms", "rerank_ms"
    ));
    for row in &report.aggregates {
        let rerank = row
            .mean_rerank_ms
            .map(|v| format!("{v:.1}"))
            .unwrap_or_else(|| "-".to_owned());
        out.push_str(&format!(
            "{:<10} {:<9} {:>7} {:>9.4} {:>10.1} {:>11.1} {:>11}\n",
            row.mode.as_str(),
            row.category.as_str(),
            row.query_count,
            row.mean_precision_at_n,
            row.mean_embed_ms,
            row.mean_search_ms,
            rerank
        ));
    }
    if let Some(sweep) = &report.k_sweep {
        out.push_str(&format!("\n{:<6} {:<10} {:>9}\n", "k", "mode", "mean_p@n"));
        for point in sweep {
            out.push_str(&format!(
                "{:<6} {:<10} {:>9.4}\n",
                point.k,
                point.mode.as_str(),
                point.mean_precision_at_n
            ));
        }
    }
    out
}
