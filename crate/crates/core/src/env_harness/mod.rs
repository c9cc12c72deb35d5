//! Synthetic worlds, dataset ingestion and machine-scored evaluation.
//!
//! Navigation queries succeed when the chosen map node is in the query's
//! gold set. Global queries are scored by term coverage: the share of gold
//! terms whose words all appear in the answer, ignoring case.

pub mod catalog;
mod dataset;
mod eval;
mod world;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{export_world, ingest_dataset, load_queries, save_queries, MAP_FILE, QUERIES_FILE};
pub use eval::{ablate_k, evaluate, EvalOptions, EvalRecord, EvalReport, KSeries, KSeriesPoint, MethodKindScore, TimingStats};
pub use world::{generate_world, EdgePolicy, World, WorldSpec};

use crate::llm_gateway::tokens::words;
use crate::retrieval::{Query, QueryKind};
use crate::semantic_forest::ForestError;
use crate::topo_map::{MapError, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid world spec: {0}")]
    InvalidSpec(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("no queries to evaluate")]
    NoQueries,
    #[error("no methods to evaluate")]
    NoMethods,
    #[error("k must be at least 1")]
    InvalidK,
}

/// A query with what counts as a correct response to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldQuery {
    pub id: String,
    #[serde(flatten)]
    pub query: Query,
    /// Acceptable destinations for explicit and implicit queries.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub gold_leaves: BTreeSet<NodeId>,
    /// Terms a global answer should mention.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_terms: Vec<String>,
}

impl GoldQuery {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("query id is empty".into());
        }
        if self.query.text().trim().is_empty() {
            return Err(format!("query `{}` has empty text", self.id));
        }
        match self.query.kind() {
            QueryKind::Explicit | QueryKind::Implicit if self.gold_leaves.is_empty() => {
                Err(format!("query `{}` needs gold_leaves", self.id))
            }
            QueryKind::Global if self.gold_terms.is_empty() => Err(format!("query `{}` needs gold_terms", self.id)),
            _ => Ok(()),
        }
    }
}

/// Share of `terms` mentioned in `answer`, or 1 when there are no terms.
pub fn term_coverage(answer: &str, terms: &[String]) -> f64 {
    if terms.is_empty() {
        return 1.0;
    }
    let answer_words: BTreeSet<String> = words(answer).into_iter().collect();
    let hit = terms
        .iter()
        .filter(|t| {
            let tw = words(t);
            !tw.is_empty() && tw.iter().all(|w| answer_words.contains(w))
        })
        .count();
    hit as f64 / terms.len() as f64
}
