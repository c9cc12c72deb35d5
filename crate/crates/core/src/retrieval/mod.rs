//! Retrieval over a summarized forest.
//!
//! Three strategies share one [`Retriever`]:
//!
//! * semantic match: the single leaf whose caption embedding is most similar
//!   to the query;
//! * RAG: the `k` most similar leaves;
//! * embodied: `k` leaf-to-root chains found by selector-guided descents from
//!   the roots, spread over the trees by [`allocate_quotas`].
//!
//! Similarity is cosine over gateway embeddings. Equal scores rank by leaf id.

mod chain;
mod embodied;

use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain::{chain_line, render_chain, Chain};
pub use embodied::{allocate_quotas, DescentStep, DescentTrace};

use crate::llm_gateway::{EmbeddingRequest, Gateway, GatewayError};
use crate::semantic_forest::{ForestError, ForestNodeId, SemanticForest};
use crate::topo_map::NodeId;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("forest has unsummarized nodes; run summarization first")]
    NotSummarized,
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("embedding failed: {0}")]
    Embedding(#[source] GatewayError),
    #[error("selection failed after {} completed descents: {source}", .traces.len())]
    Selection {
        #[source]
        source: GatewayError,
        traces: Vec<DescentTrace>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Explicit,
    Implicit,
    Global,
}

impl QueryKind {
    pub const ALL: [QueryKind; 3] = [QueryKind::Explicit, QueryKind::Implicit, QueryKind::Global];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryKind::Explicit => "explicit",
            QueryKind::Implicit => "implicit",
            QueryKind::Global => "global",
        }
    }

    /// Explicit and implicit queries ask for a place to go.
    pub fn is_navigation(self) -> bool {
        !matches!(self, QueryKind::Global)
    }
}

impl FromStr for QueryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(QueryKind::Explicit),
            "implicit" => Ok(QueryKind::Implicit),
            "global" => Ok(QueryKind::Global),
            other => Err(format!("unknown query kind `{other}` (explicit, implicit, global)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    text: String,
    kind: QueryKind,
}

impl Query {
    pub fn new(text: impl Into<String>, kind: QueryKind) -> Result<Self, RetrievalError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(RetrievalError::EmptyQuery);
        }
        Ok(Query { text, kind })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn kind(&self) -> QueryKind {
        self.kind
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SemanticMatch,
    Rag,
    EmbodiedRag,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SemanticMatch, Method::Rag, Method::EmbodiedRag];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SemanticMatch => "semantic_match",
            Method::Rag => "rag",
            Method::EmbodiedRag => "embodied_rag",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "semantic" | "semantic_match" => Ok(Method::SemanticMatch),
            "rag" => Ok(Method::Rag),
            "embodied" | "embodied_rag" => Ok(Method::EmbodiedRag),
            other => Err(format!("unknown method `{other}` (semantic, rag, embodied)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLeaf {
    pub leaf: ForestNodeId,
    pub map_node: NodeId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "items", rename_all = "lowercase")]
pub enum RetrievedItems {
    Leaves(Vec<ScoredLeaf>),
    Chains(Vec<Chain>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub method: Method,
    pub k: usize,
    pub items: RetrievedItems,
    /// One per embodied descent, in chain order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<DescentTrace>,
    /// Selector requests issued (embodied only).
    pub select_calls: usize,
}

impl RetrievalResult {
    /// Retrieved leaf ids in rank or chain order.
    pub fn leaf_ids(&self) -> Vec<ForestNodeId> {
        match &self.items {
            RetrievedItems::Leaves(ls) => ls.iter().map(|l| l.leaf.clone()).collect(),
            RetrievedItems::Chains(cs) => cs.iter().map(|c| c.leaf().clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match &self.items {
            RetrievedItems::Leaves(ls) => ls.len(),
            RetrievedItems::Chains(cs) => cs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

struct LeafEmbedding {
    leaf: ForestNodeId,
    map_node: NodeId,
    vector: Vec<f64>,
}

/// Read-only retrieval over one forest. Leaf embeddings are computed on
/// first use and shared by later queries.
pub struct Retriever<'a> {
    forest: &'a SemanticForest,
    gateway: &'a Gateway,
    leaf_vectors: OnceLock<Result<Vec<LeafEmbedding>, GatewayError>>,
}

impl<'a> Retriever<'a> {
    pub fn new(forest: &'a SemanticForest, gateway: &'a Gateway) -> Self {
        Retriever {
            forest,
            gateway,
            leaf_vectors: OnceLock::new(),
        }
    }

    pub fn forest(&self) -> &'a SemanticForest {
        self.forest
    }

    pub fn gateway(&self) -> &'a Gateway {
        self.gateway
    }

    pub fn retrieve(&self, query: &Query, method: Method, k: usize) -> Result<RetrievalResult, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        match method {
            Method::SemanticMatch => {
                let best = self.semantic_match(query)?;
                Ok(RetrievalResult {
                    method,
                    k,
                    items: RetrievedItems::Leaves(vec![best]),
                    traces: Vec::new(),
                    select_calls: 0,
                })
            }
            Method::Rag => Ok(RetrievalResult {
                method,
                k,
                items: RetrievedItems::Leaves(self.rag(query, k)?),
                traces: Vec::new(),
                select_calls: 0,
            }),
            Method::EmbodiedRag => {
                let (chains, traces) = embodied::retrieve(self.forest, self.gateway, query, k)?;
                let select_calls = traces.iter().map(|t| t.select_calls()).sum();
                Ok(RetrievalResult {
                    method,
                    k,
                    items: RetrievedItems::Chains(chains),
                    traces,
                    select_calls,
                })
            }
        }
    }

    /// The most similar leaf; ties go to the smallest leaf id.
    pub fn semantic_match(&self, query: &Query) -> Result<ScoredLeaf, RetrievalError> {
        Ok(self.ranked(query)?.into_iter().next().expect("forest has at least one leaf"))
    }

    /// The `min(k, leaves)` most similar leaves, best first.
    pub fn rag(&self, query: &Query, k: usize) -> Result<Vec<ScoredLeaf>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let mut ranked = self.ranked(query)?;
        ranked.truncate(k);
        Ok(ranked)
    }

    /// Every leaf by descending similarity, then ascending id.
    pub fn ranked(&self, query: &Query) -> Result<Vec<ScoredLeaf>, RetrievalError> {
        let q = self
            .gateway
            .embed(&EmbeddingRequest::new(query.text()).map_err(RetrievalError::Embedding)?)
            .map_err(RetrievalError::Embedding)?;
        let leaves = self.leaf_vectors()?;
        let mut scored: Vec<ScoredLeaf> = leaves
            .iter()
            .map(|l| ScoredLeaf {
                leaf: l.leaf.clone(),
                map_node: l.map_node.clone(),
                score: cosine(&q, &l.vector),
            })
            .collect();
        scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.leaf.cmp(&b.leaf)));
        Ok(scored)
    }

    fn leaf_vectors(&self) -> Result<&[LeafEmbedding], RetrievalError> {
        let built = self.leaf_vectors.get_or_init(|| {
            self.forest
                .leaves()
                .map(|leaf| {
                    let caption = leaf.summary.as_deref().unwrap_or_default();
                    let vector = self.gateway.embed(&EmbeddingRequest::new(caption)?)?;
                    Ok(LeafEmbedding {
                        leaf: leaf.id.clone(),
                        map_node: leaf.map_node.clone().expect("leaves carry map nodes"),
                        vector,
                    })
                })
                .collect()
        });
        built.as_deref().map_err(|e| RetrievalError::Embedding(e.clone()))
    }
}
