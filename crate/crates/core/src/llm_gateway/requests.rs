use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRequest {
    child_summaries: Vec<String>,
    level: u32,
    budget: usize,
}

impl SummaryRequest {
    pub fn new(child_summaries: Vec<String>, level: u32, budget: usize) -> Result<Self, GatewayError> {
        if child_summaries.is_empty() {
            return Err(GatewayError::InvalidRequest("summary request needs at least one child".into()));
        }
        if budget == 0 {
            return Err(GatewayError::InvalidRequest("summary budget must be positive".into()));
        }
        Ok(SummaryRequest {
            child_summaries,
            level,
            budget,
        })
    }

    pub fn child_summaries(&self) -> &[String] {
        &self.child_summaries
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Maximum output length in whitespace-separated words.
    pub fn budget(&self) -> usize {
        self.budget
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRequest {
    query: String,
    candidates: Vec<Candidate>,
    allow_none: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correction: Option<String>,
}

impl SelectionRequest {
    pub fn new(query: impl Into<String>, candidates: Vec<Candidate>, allow_none: bool) -> Result<Self, GatewayError> {
        if candidates.is_empty() {
            return Err(GatewayError::InvalidRequest("selection needs at least one candidate".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(GatewayError::InvalidRequest(format!("duplicate candidate id `{}`", c.id)));
            }
        }
        Ok(SelectionRequest {
            query: query.into(),
            candidates,
            allow_none,
            correction: None,
        })
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn allow_none(&self) -> bool {
        self.allow_none
    }

    /// Feedback attached to a retry after an unusable answer.
    pub fn correction(&self) -> Option<&str> {
        self.correction.as_deref()
    }

    pub fn with_correction(&self, note: impl Into<String>) -> Self {
        let mut req = self.clone();
        req.correction = Some(note.into());
        req
    }

    pub fn contains(&self, id: &str) -> bool {
        self.candidates.iter().any(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationMode {
    Navigate,
    Explain,
}

/// One node of a chain as shown to a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub id: String,
    pub level: u32,
    pub summary: String,
}

/// A retrieved chain in prompt form: the structured entries (leaf first)
/// and their fixed text rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainContext {
    pub entries: Vec<ChainEntry>,
    pub rendering: String,
}

impl ChainContext {
    pub fn leaf(&self) -> &ChainEntry {
        &self.entries[0]
    }

    pub fn top(&self) -> &ChainEntry {
        self.entries.last().expect("chain is nonempty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    query: String,
    chains: Vec<ChainContext>,
    mode: GenerationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correction: Option<String>,
}

impl GenerationRequest {
    pub fn new(query: impl Into<String>, chains: Vec<ChainContext>, mode: GenerationMode) -> Result<Self, GatewayError> {
        if chains.is_empty() {
            return Err(GatewayError::InvalidRequest("generation needs at least one chain".into()));
        }
        if chains.iter().any(|c| c.entries.is_empty()) {
            return Err(GatewayError::InvalidRequest("chain without entries".into()));
        }
        Ok(GenerationRequest {
            query: query.into(),
            chains,
            mode,
            correction: None,
        })
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn chains(&self) -> &[ChainContext] {
        &self.chains
    }

    pub fn mode(&self) -> GenerationMode {
        self.mode
    }

    pub fn correction(&self) -> Option<&str> {
        self.correction.as_deref()
    }

    pub fn with_correction(&self, note: impl Into<String>) -> Self {
        let mut req = self.clone();
        req.correction = Some(note.into());
        req
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = &str> {
        self.chains.iter().map(|c| c.leaf().id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    text: String,
}

impl EmbeddingRequest {
    pub fn new(text: impl Into<String>) -> Result<Self, GatewayError> {
        let text = text.into();
        if text.is_empty() {
            return Err(GatewayError::InvalidRequest("cannot embed empty text".into()));
        }
        Ok(EmbeddingRequest { text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Parsed generator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GenerationOutput {
    Navigate { waypoint: String, reasoning: String },
    Explain { text: String },
}
