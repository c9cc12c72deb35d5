//! Turning retrieved chains into a waypoint with a planned path, or into a
//! free-text answer.
//!
//! Baseline retrievals produce bare leaves; they are passed to the generator
//! as one-line chains so every method shares the same generation stage.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm_gateway::{ChainContext, Gateway, GatewayError, GenerationMode, GenerationOutput, GenerationRequest};
use crate::retrieval::chain_line;
use crate::retrieval::{Method, Query, QueryKind, RetrievalError, RetrievalResult, RetrievedItems, Retriever};
use crate::semantic_forest::{ForestError, ForestNodeId, SemanticForest};
use crate::topo_map::{MapError, NodeId, TopologicalMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("no chains to generate from")]
    NoChains,
    #[error("agent node `{0}` is not in the map")]
    InvalidState(NodeId),
    #[error("waypoint `{to}` is unreachable from `{from}`")]
    Unreachable { from: NodeId, to: NodeId },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error("generation failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("map error: {0}")]
    Map(MapError),
}

/// Where the agent currently is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    current_node: NodeId,
}

impl AgentState {
    pub fn new(map: &TopologicalMap, current_node: NodeId) -> Result<Self, GenerationError> {
        if !map.contains(&current_node) {
            return Err(GenerationError::InvalidState(current_node));
        }
        Ok(AgentState { current_node })
    }

    /// Starts at the first map node in id order.
    pub fn at_first_node(map: &TopologicalMap) -> Option<Self> {
        map.first_node().map(|n| AgentState {
            current_node: n.id.clone(),
        })
    }

    pub fn current_node(&self) -> &NodeId {
        &self.current_node
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationResult {
    pub waypoint: ForestNodeId,
    pub map_node: NodeId,
    pub reasoning: String,
    pub path: Vec<NodeId>,
    /// Set when the generator's choice was unusable and the first chain's
    /// leaf was taken instead.
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerResult {
    pub answer: String,
    pub cited_chains: Vec<ChainContext>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum QueryOutcome {
    Navigation(NavigationResult),
    Answer(AnswerResult),
}

impl QueryOutcome {
    pub fn warnings(&self) -> &[String] {
        match self {
            QueryOutcome::Navigation(n) => &n.warnings,
            QueryOutcome::Answer(_) => &[],
        }
    }
}

/// Generator context for every retrieved item.
pub fn contexts(forest: &SemanticForest, retrieved: &RetrievalResult) -> Result<Vec<ChainContext>, ForestError> {
    match &retrieved.items {
        RetrievedItems::Chains(chains) => chains.iter().map(|c| c.to_context(forest)).collect(),
        RetrievedItems::Leaves(leaves) => leaves.iter().map(|l| leaf_context(forest, &l.leaf)).collect(),
    }
}

/// A single leaf as a one-entry chain.
pub fn leaf_context(forest: &SemanticForest, leaf: &ForestNodeId) -> Result<ChainContext, ForestError> {
    let node = forest.get(leaf)?;
    if !node.is_leaf() {
        return Err(ForestError::NotALeaf(leaf.clone()));
    }
    Ok(ChainContext {
        entries: vec![crate::llm_gateway::ChainEntry {
            id: leaf.to_string(),
            level: 0,
            summary: node.summary.clone().unwrap_or_default(),
        }],
        rendering: chain_line(node),
    })
}

pub fn generate_navigation(
    gateway: &Gateway,
    query: &Query,
    chains: &[ChainContext],
    state: &AgentState,
    map: &TopologicalMap,
    forest: &SemanticForest,
) -> Result<NavigationResult, GenerationError> {
    if chains.is_empty() {
        return Err(GenerationError::NoChains);
    }
    let req = GenerationRequest::new(query.text(), chains.to_vec(), GenerationMode::Navigate)?;
    let mut warnings = Vec::new();
    let mut choice = None;
    let mut current = req.clone();
    for attempt in 0..2 {
        match gateway.generate(&current) {
            Ok(GenerationOutput::Navigate { waypoint, reasoning }) => {
                if req.leaf_ids().any(|id| id == waypoint) {
                    choice = Some((waypoint, reasoning));
                    break;
                }
                let note = format!("`{waypoint}` is not one of the candidate leaves");
                warnings.push(format!("generator chose a non-candidate waypoint: {note}"));
                if attempt == 0 {
                    current = req.with_correction(note);
                }
            }
            Ok(GenerationOutput::Explain { .. }) => {
                warnings.push("generator answered in explain mode".into());
                break;
            }
            Err(GatewayError::MalformedResponse(m)) => {
                warnings.push(format!("generator output unusable: {m}"));
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let fallback = choice.is_none();
    let (waypoint, reasoning) = choice.unwrap_or_else(|| {
        let leaf = &chains[0].leaf();
        (
            leaf.id.clone(),
            format!("Fell back to the top retrieved location: {}", leaf.summary),
        )
    });
    let waypoint = ForestNodeId(waypoint);
    let map_node = forest
        .get(&waypoint)?
        .map_node
        .clone()
        .ok_or_else(|| ForestError::NotALeaf(waypoint.clone()))?;
    let path = map.shortest_path(state.current_node(), &map_node).map_err(|e| match e {
        MapError::Unreachable { from, to } => GenerationError::Unreachable { from, to },
        other => GenerationError::Map(other),
    })?;
    Ok(NavigationResult {
        waypoint,
        map_node,
        reasoning,
        path,
        fallback,
        warnings,
    })
}

pub fn generate_text_answer(
    gateway: &Gateway,
    query: &Query,
    chains: &[ChainContext],
) -> Result<AnswerResult, GenerationError> {
    if chains.is_empty() {
        return Err(GenerationError::NoChains);
    }
    let req = GenerationRequest::new(query.text(), chains.to_vec(), GenerationMode::Explain)?;
    match gateway.generate(&req)? {
        GenerationOutput::Explain { text } => Ok(AnswerResult {
            answer: text,
            cited_chains: chains.to_vec(),
        }),
        GenerationOutput::Navigate { .. } => Err(GatewayError::MalformedResponse("expected a text answer".into()).into()),
    }
}

/// Retrieval plus generation for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRun {
    pub retrieval: RetrievalResult,
    pub outcome: QueryOutcome,
}

/// Retrieves with `method` and generates by query kind: navigation for
/// explicit and implicit queries, a text answer for global ones.
pub fn run_query(
    retriever: &Retriever<'_>,
    map: &TopologicalMap,
    query: &Query,
    method: Method,
    k: usize,
    state: &AgentState,
) -> Result<QueryRun, GenerationError> {
    let forest = retriever.forest();
    let retrieval = retriever.retrieve(query, method, k)?;
    let chains = contexts(forest, &retrieval)?;
    let outcome = if query.kind().is_navigation() {
        QueryOutcome::Navigation(generate_navigation(retriever.gateway(), query, &chains, state, map, forest)?)
    } else {
        QueryOutcome::Answer(generate_text_answer(retriever.gateway(), query, &chains)?)
    };
    Ok(QueryRun { retrieval, outcome })
}

/// One self-contained line of output per query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    pub query: String,
    pub kind: QueryKind,
    pub method: Method,
    pub k: usize,
    /// Retrieved leaf ids in rank or chain order.
    pub retrieved: Vec<ForestNodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<QueryOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl ResultRecord {
    /// Runs the query and records its result or error, with wall time.
    pub fn capture(
        retriever: &Retriever<'_>,
        map: &TopologicalMap,
        query: &Query,
        method: Method,
        k: usize,
        state: &AgentState,
    ) -> (Self, Option<QueryRun>) {
        let start = Instant::now();
        let run = run_query(retriever, map, query, method, k, state);
        let elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        let mut record = ResultRecord {
            query_id: None,
            query: query.text().to_string(),
            kind: query.kind(),
            method,
            k,
            retrieved: Vec::new(),
            result: None,
            error: None,
            warnings: Vec::new(),
            elapsed_ms,
        };
        match run {
            Ok(run) => {
                record.retrieved = run.retrieval.leaf_ids();
                record.warnings = run.outcome.warnings().to_vec();
                record.result = Some(run.outcome.clone());
                (record, Some(run))
            }
            Err(e) => {
                if let GenerationError::Retrieval(RetrievalError::Selection { traces, .. }) = &e {
                    record.retrieved = traces.iter().map(|t| t.leaf.clone()).collect();
                }
                record.error = Some(e.to_string());
                (record, None)
            }
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn map_node(&self) -> Option<&NodeId> {
        match &self.result {
            Some(QueryOutcome::Navigation(n)) => Some(&n.map_node),
            _ => None,
        }
    }

    pub fn answer(&self) -> Option<&str> {
        match &self.result {
            Some(QueryOutcome::Answer(a)) => Some(&a.answer),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic_forest::{build_structure, summarize_forest, ClusteringConfig, SummarizeOptions};
    use crate::topo_map::{MapNode, Pose};

    fn drinks_world() -> (TopologicalMap, SemanticForest) {
        let mut map = TopologicalMap::new();
        for (id, x, cap) in [
            ("a", 0.0, "an office lobby"),
            ("b", 4.0, "a water fountain"),
            ("c", 8.0, "a café counter selling drinks"),
            ("z", 50.0, "a lonely shed"),
        ] {
            map.add_node(MapNode::new(id, Pose::xy(x, 0.0), cap)).unwrap();
        }
        map.add_edge(&"a".into(), &"b".into(), None).unwrap();
        map.add_edge(&"b".into(), &"c".into(), None).unwrap();
        let mut forest = build_structure(&map, &ClusteringConfig::for_map(&map)).unwrap();
        summarize_forest(&mut forest, &Gateway::mock(), SummarizeOptions::default()).unwrap();
        (map, forest)
    }

    fn ctx(forest: &SemanticForest, id: &str) -> ChainContext {
        leaf_context(forest, &id.into()).unwrap()
    }

    #[test]
    fn drinks_query_prefers_counter() {
        let (map, forest) = drinks_world();
        let state = AgentState::at_first_node(&map).unwrap();
        let q = Query::new("where can I buy some drinks", QueryKind::Implicit).unwrap();
        let chains = vec![ctx(&forest, "L/b"), ctx(&forest, "L/c")];
        let nav = generate_navigation(&Gateway::mock(), &q, &chains, &state, &map, &forest).unwrap();
        assert_eq!(nav.map_node, NodeId::from("c"));
        assert_eq!(nav.path, vec!["a".into(), "b".into(), "c".into()]);
        assert!(!nav.fallback);
        assert!(map.is_valid_path(&nav.path));
    }

    #[test]
    fn disconnected_waypoint_is_unreachable() {
        let (map, forest) = drinks_world();
        let state = AgentState::at_first_node(&map).unwrap();
        let q = Query::new("the lonely shed", QueryKind::Explicit).unwrap();
        let err = generate_navigation(&Gateway::mock(), &q, &[ctx(&forest, "L/z")], &state, &map, &forest).unwrap_err();
        assert_eq!(err, GenerationError::Unreachable { from: "a".into(), to: "z".into() });
    }

    struct WrongWaypoint;

    impl crate::llm_gateway::Backend for WrongWaypoint {
        fn name(&self) -> &str {
            "wrong-waypoint"
        }
        fn summarize(&self, _: &crate::llm_gateway::SummaryRequest) -> Result<String, GatewayError> {
            Ok("x".into())
        }
        fn select(&self, r: &crate::llm_gateway::SelectionRequest) -> Result<String, GatewayError> {
            Ok(r.candidates()[0].id.clone())
        }
        fn generate(&self, _: &GenerationRequest) -> Result<String, GatewayError> {
            Ok(r#"{"waypoint": "L/elsewhere", "reasoning": "trust me"}"#.into())
        }
        fn embed(&self, _: &crate::llm_gateway::EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
            Ok(vec![1.0])
        }
    }

    #[test]
    fn non_candidate_waypoint_falls_back() {
        let (map, forest) = drinks_world();
        let state = AgentState::at_first_node(&map).unwrap();
        let gw = Gateway::builder().all_backends(std::sync::Arc::new(WrongWaypoint)).build();
        let q = Query::new("where can I buy some drinks", QueryKind::Implicit).unwrap();
        let chains = vec![ctx(&forest, "L/b"), ctx(&forest, "L/c")];
        let nav = generate_navigation(&gw, &q, &chains, &state, &map, &forest).unwrap();
        assert!(nav.fallback);
        assert_eq!(nav.waypoint, ForestNodeId::from("L/b"));
        assert_eq!(nav.warnings.len(), 2, "{:?}", nav.warnings);
        // one original request plus one corrective retry
        assert_eq!(gw.stats().role(crate::llm_gateway::Role::Generator).provider_calls, 2);
    }

    #[test]
    fn explain_lists_root_first() {
        let (_, forest) = drinks_world();
        let q = Query::new("describe this place", QueryKind::Global).unwrap();
        let chain = crate::retrieval::render_chain(&forest, &"L/a".into()).unwrap();
        let c = chain.to_context(&forest).unwrap();
        let root_summary = c.top().summary.clone();
        let ans = generate_text_answer(&Gateway::mock(), &q, &[c]).unwrap();
        assert!(ans.answer.starts_with(&root_summary), "{}", ans.answer);
        assert_eq!(generate_text_answer(&Gateway::mock(), &q, &[]), Err(GenerationError::NoChains));
    }

    #[test]
    fn every_kind_and_method_produces_a_result() {
        let (map, forest) = drinks_world();
        let gw = Gateway::mock();
        let retriever = Retriever::new(&forest, &gw);
        let state = AgentState::at_first_node(&map).unwrap();
        for kind in QueryKind::ALL {
            for method in Method::ALL {
                let q = Query::new("where can I buy some drinks", kind).unwrap();
                let run = run_query(&retriever, &map, &q, method, 3, &state).unwrap();
                match (kind.is_navigation(), &run.outcome) {
                    (true, QueryOutcome::Navigation(n)) => assert_eq!(n.map_node, NodeId::from("c")),
                    (false, QueryOutcome::Answer(a)) => assert!(!a.answer.is_empty()),
                    other => panic!("unexpected outcome {other:?}"),
                }
            }
        }
    }

    #[test]
    fn state_must_exist() {
        let (map, _) = drinks_world();
        assert_eq!(
            AgentState::new(&map, "nope".into()),
            Err(GenerationError::InvalidState("nope".into()))
        );
    }
}
