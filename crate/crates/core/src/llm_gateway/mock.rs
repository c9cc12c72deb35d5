//! Deterministic offline backend.
//!
//! Every method is a pure function of its request:
//!
//! * summarize: order-preserving, case-insensitive dedup of the comma- or
//!   semicolon-separated phrases of all children, joined with `", "` and cut
//!   to the word budget;
//! * select: the candidate sharing the most distinct content words with the
//!   query (first wins ties), or `NONE` when allowed and nothing overlaps;
//! * generate: navigate picks the chain whose leaf overlaps the query most
//!   (whole-chain overlap breaks ties), explain lists the distinct chain tops
//!   followed by the distinct level-1 summaries;
//! * embed: signed feature hashing of content words, L2-normalized.

use std::collections::BTreeSet;

use serde_json::json;
use sha2::{Digest, Sha256};

use super::tokens::{content_tokens, overlap, token_set, words};
use super::{Backend, EmbeddingRequest, GatewayError, GenerationMode, GenerationRequest, SelectionRequest, SummaryRequest};

pub const DEFAULT_EMBEDDING_DIM: usize = 256;

/// Selector answer meaning "no candidate fits".
pub const NONE_ANSWER: &str = "NONE";

#[derive(Debug, Clone)]
pub struct MockBackend {
    dim: usize,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend {
            dim: DEFAULT_EMBEDDING_DIM,
        }
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dim(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        MockBackend { dim }
    }
}

/// Splits a summary into phrases on `,`, `;` and newlines.
pub fn phrases(text: &str) -> impl Iterator<Item = &str> {
    text.split([',', ';', '\n']).map(str::trim).filter(|p| !p.is_empty())
}

pub fn mock_summary(children: &[String], budget: usize) -> String {
    let mut seen = BTreeSet::new();
    let mut out: Vec<&str> = Vec::new();
    let mut used = 0;
    for phrase in children.iter().flat_map(|c| phrases(c)) {
        let key = phrase.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        if !seen.insert(key) {
            continue;
        }
        let len = phrase.split_whitespace().count();
        if used + len > budget {
            if out.is_empty() {
                return phrase.split_whitespace().take(budget).collect::<Vec<_>>().join(" ");
            }
            break;
        }
        used += len;
        out.push(phrase);
    }
    out.join(", ")
}

fn token_hash(token: &str) -> u64 {
    let digest = Sha256::digest(token.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn mock_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut tokens = content_tokens(text);
    if tokens.is_empty() {
        tokens = words(text);
    }
    let mut v = vec![0.0; dim];
    for t in &tokens {
        let h = token_hash(t);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // no words at all, or hashed words cancelled out
        let h = token_hash(text);
        v[(h % dim as u64) as usize] = 1.0;
        norm = 1.0;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn mock_navigate(req: &GenerationRequest) -> String {
    let query = token_set(req.query());
    let mut best: Option<(usize, usize, usize)> = None;
    for (i, chain) in req.chains().iter().enumerate() {
        let leaf_score = overlap(&query, &chain.leaf().summary);
        let all: String = chain.entries.iter().map(|e| e.summary.as_str()).collect::<Vec<_>>().join(" ");
        let chain_score = overlap(&query, &all);
        if best.is_none_or(|(_, l, c)| (leaf_score, chain_score) > (l, c)) {
            best = Some((i, leaf_score, chain_score));
        }
    }
    let (i, leaf_score, _) = best.expect("request has chains");
    let chain = &req.chains()[i];
    let leaf = chain.leaf();
    let matched: Vec<String> = token_set(&leaf.summary).intersection(&query).cloned().collect();
    let reasoning = if matched.is_empty() {
        format!("No location mentions the query directly; `{}` lies within: {}.", leaf.summary, chain.top().summary)
    } else {
        format!(
            "`{}` matches {} of the query terms ({}) and lies within: {}.",
            leaf.summary,
            leaf_score,
            matched.join(", "),
            chain.top().summary
        )
    };
    json!({ "waypoint": leaf.id, "reasoning": reasoning }).to_string()
}

fn mock_explain(req: &GenerationRequest) -> String {
    let mut tops = Vec::new();
    let mut areas = Vec::new();
    let mut seen_tops = BTreeSet::new();
    let mut seen_areas = BTreeSet::new();
    for chain in req.chains() {
        let top = chain.top();
        if seen_tops.insert(top.id.as_str()) {
            tops.push(top.summary.as_str());
        }
    }
    for chain in req.chains() {
        for entry in &chain.entries {
            if entry.level == 1 && !seen_tops.contains(entry.id.as_str()) && seen_areas.insert(entry.id.as_str()) {
                areas.push(entry.summary.as_str());
            }
        }
    }
    let mut text = tops.join("\n");
    if !areas.is_empty() {
        text.push_str("\nAreas: ");
        text.push_str(&areas.join(" | "));
    }
    text
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn summarize(&self, req: &SummaryRequest) -> Result<String, GatewayError> {
        Ok(mock_summary(req.child_summaries(), req.budget()))
    }

    fn select(&self, req: &SelectionRequest) -> Result<String, GatewayError> {
        let query = token_set(req.query());
        let mut best = (0usize, 0usize);
        for (i, c) in req.candidates().iter().enumerate() {
            let score = overlap(&query, &c.description);
            if score > best.1 {
                best = (i, score);
            }
        }
        if best.1 == 0 && req.allow_none() {
            return Ok(NONE_ANSWER.to_string());
        }
        Ok(req.candidates()[best.0].id.clone())
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String, GatewayError> {
        Ok(match req.mode() {
            GenerationMode::Navigate => mock_navigate(req),
            GenerationMode::Explain => mock_explain(req),
        })
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
        Ok(mock_embedding(req.text(), self.dim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm_gateway::{Candidate, ChainContext, ChainEntry};

    fn cos(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn summary_dedups_identical_children() {
        let s = mock_summary(&["a red chair".into(), "a red chair".into()], 64);
        assert_eq!(s, "a red chair");
    }

    #[test]
    fn summary_joins_distinct_children() {
        let s = mock_summary(&["counter with coffee machine".into(), "shelf of bottled drinks".into()], 64);
        assert_eq!(s, "counter with coffee machine, shelf of bottled drinks");
    }

    #[test]
    fn summary_respects_budget() {
        let children = vec!["one two three".to_string(), "four five".to_string()];
        assert_eq!(mock_summary(&children, 4), "one two three");
        assert_eq!(mock_summary(&children, 2), "one two");
        assert_eq!(mock_summary(&children, 5), "one two three, four five");
    }

    #[test]
    fn select_prefers_overlap() {
        let req = SelectionRequest::new(
            "buy drinks",
            vec![
                Candidate { id: "A".into(), description: "water fountain".into() },
                Candidate { id: "B".into(), description: "café counter selling drinks".into() },
            ],
            false,
        )
        .unwrap();
        assert_eq!(MockBackend::new().select(&req).unwrap(), "B");
    }

    #[test]
    fn select_none_when_allowed_and_no_overlap() {
        let cands = vec![
            Candidate { id: "A".into(), description: "water fountain".into() },
            Candidate { id: "B".into(), description: "oak tree".into() },
        ];
        let req = SelectionRequest::new("buy drinks", cands.clone(), true).unwrap();
        assert_eq!(MockBackend::new().select(&req).unwrap(), NONE_ANSWER);
        let forced = SelectionRequest::new("buy drinks", cands, false).unwrap();
        assert_eq!(MockBackend::new().select(&forced).unwrap(), "A");
    }

    #[test]
    fn embeddings_are_unit_and_deterministic() {
        let m = MockBackend::new();
        for text in ["red cup", "the", "!!!", "a b c d e f g"] {
            let req = EmbeddingRequest::new(text).unwrap();
            let v = m.embed(&req).unwrap();
            assert_eq!(v, m.embed(&req).unwrap());
            assert_eq!(v.len(), DEFAULT_EMBEDDING_DIM);
            assert!((cos(&v, &v) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn embedding_similarity_tracks_shared_words() {
        let e = |t: &str| mock_embedding(t, DEFAULT_EMBEDDING_DIM);
        let q = e("red cup");
        assert!(cos(&q, &e("red cup on table")) > cos(&q, &e("green tree")));
    }

    fn chain(ids: &[(&str, u32, &str)]) -> ChainContext {
        ChainContext {
            entries: ids
                .iter()
                .map(|(id, level, s)| ChainEntry { id: id.to_string(), level: *level, summary: s.to_string() })
                .collect(),
            rendering: String::new(),
        }
    }

    #[test]
    fn explain_starts_with_root_summary() {
        let req = GenerationRequest::new(
            "describe this place",
            vec![
                chain(&[("l1", 0, "a bench"), ("c1", 1, "benches, trees"), ("r", 2, "a park")]),
                chain(&[("l2", 0, "a tree"), ("c1", 1, "benches, trees"), ("r", 2, "a park")]),
            ],
            GenerationMode::Explain,
        )
        .unwrap();
        let text = MockBackend::new().generate(&req).unwrap();
        assert!(text.starts_with("a park"));
        assert_eq!(text, "a park\nAreas: benches, trees");
    }

    #[test]
    fn navigate_prefers_leaf_overlap() {
        let req = GenerationRequest::new(
            "where can I buy some drinks",
            vec![
                chain(&[("fountain", 0, "a drinks fountain"), ("r", 1, "buy drinks at the counter, a drinks fountain")]),
                chain(&[("counter", 0, "a counter where customers buy cold drinks"), ("r", 1, "x")]),
            ],
            GenerationMode::Navigate,
        )
        .unwrap();
        let text = MockBackend::new().generate(&req).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["waypoint"], "counter");
    }
}
