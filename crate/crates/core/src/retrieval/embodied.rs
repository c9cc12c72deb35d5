//! Selector-guided chain retrieval.
//!
//! Each tree gets a quota of descents. A descent starts at the root and asks
//! the selector to pick among the node's children until it reaches a leaf.
//! The reached leaf is then exhausted, and so is any node whose children are
//! all exhausted, so later descents in the same tree find new leaves. Trees
//! are searched concurrently; descents within a tree run in order.

use std::collections::BTreeSet;
use std::thread;

use serde::{Deserialize, Serialize};

use super::chain::{render_chain, Chain};
use super::{Query, RetrievalError};
use crate::llm_gateway::{Candidate, Gateway, SelectionRequest};
use crate::semantic_forest::{ForestNodeId, SemanticForest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentStep {
    pub visited: ForestNodeId,
    pub candidates: Vec<ForestNodeId>,
    pub selected: ForestNodeId,
    /// False when only one candidate remained and no selector call was made.
    pub called: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub root: ForestNodeId,
    pub steps: Vec<DescentStep>,
    pub leaf: ForestNodeId,
}

impl DescentTrace {
    pub fn select_calls(&self) -> usize {
        self.steps.iter().filter(|s| s.called).count()
    }
}

/// Descents per tree for `k` chains over trees with `leaf_counts` leaves,
/// given in root order.
///
/// Every tree gets `floor(k / N)`, and the `k mod N` remaining descents go
/// one each to the trees with the most leaves (ties by root order). A tree
/// with fewer leaves than its share yields all of them and the surplus is
/// handed out again in the same order, so the quotas always sum to
/// `min(k, total leaves)`.
pub fn allocate_quotas(leaf_counts: &[usize], k: usize) -> Vec<usize> {
    let total: usize = leaf_counts.iter().sum();
    let budget = k.min(total);
    let mut order: Vec<usize> = (0..leaf_counts.len()).collect();
    order.sort_by(|&a, &b| leaf_counts[b].cmp(&leaf_counts[a]).then(a.cmp(&b)));
    // Largest uniform level that fits, then one extra for the first trees
    // in order that can still take more.
    let filled = |level: usize| leaf_counts.iter().map(|&c| c.min(level)).sum::<usize>();
    let mut level = 0;
    while level < budget && filled(level + 1) <= budget {
        level += 1;
    }
    let mut quotas: Vec<usize> = leaf_counts.iter().map(|&c| c.min(level)).collect();
    let mut remaining = budget - filled(level);
    for &i in &order {
        if remaining == 0 {
            break;
        }
        if leaf_counts[i] > level {
            quotas[i] += 1;
            remaining -= 1;
        }
    }
    quotas
}

struct TreeSearch<'a> {
    forest: &'a SemanticForest,
    gateway: &'a Gateway,
    query: &'a Query,
    exhausted: BTreeSet<ForestNodeId>,
}

impl TreeSearch<'_> {
    fn descend(&mut self, root: &ForestNodeId) -> Result<DescentTrace, crate::llm_gateway::GatewayError> {
        let mut steps = Vec::new();
        let mut current = root.clone();
        loop {
            let node = self.forest.node(&current).expect("descent stays inside the forest");
            if node.is_leaf() {
                break;
            }
            let open: Vec<&ForestNodeId> = node.children.iter().filter(|c| !self.exhausted.contains(*c)).collect();
            let (selected, called) = if open.len() == 1 {
                (open[0].clone(), false)
            } else {
                let candidates = open
                    .iter()
                    .map(|id| Candidate {
                        id: id.to_string(),
                        description: self.forest.summary(id).unwrap_or_default().to_string(),
                    })
                    .collect();
                let req = SelectionRequest::new(self.query.text(), candidates, false)?;
                let choice = self.gateway.select(&req)?.expect("selection without NONE always picks");
                let id = open
                    .iter()
                    .find(|c| c.as_str() == choice)
                    .map(|c| (*c).clone())
                    .expect("gateway returns a candidate id");
                (id, true)
            };
            steps.push(DescentStep {
                visited: current.clone(),
                candidates: open.into_iter().cloned().collect(),
                selected: selected.clone(),
                called,
            });
            current = selected;
        }
        self.exhaust(&current);
        Ok(DescentTrace {
            root: root.clone(),
            steps,
            leaf: current,
        })
    }

    fn exhaust(&mut self, leaf: &ForestNodeId) {
        self.exhausted.insert(leaf.clone());
        let mut cur = self.forest.node(leaf).and_then(|n| n.parent.clone());
        while let Some(id) = cur {
            let node = self.forest.node(&id).expect("parent exists");
            if !node.children.iter().all(|c| self.exhausted.contains(c)) {
                break;
            }
            self.exhausted.insert(id);
            cur = node.parent.clone();
        }
    }
}

type TreeOutcome = Result<Vec<DescentTrace>, (crate::llm_gateway::GatewayError, Vec<DescentTrace>)>;

fn search_tree(forest: &SemanticForest, gateway: &Gateway, query: &Query, root: &ForestNodeId, quota: usize) -> TreeOutcome {
    let mut search = TreeSearch {
        forest,
        gateway,
        query,
        exhausted: BTreeSet::new(),
    };
    let mut traces = Vec::with_capacity(quota);
    for _ in 0..quota {
        match search.descend(root) {
            Ok(t) => traces.push(t),
            Err(e) => return Err((e, traces)),
        }
    }
    Ok(traces)
}

pub(super) fn retrieve(
    forest: &SemanticForest,
    gateway: &Gateway,
    query: &Query,
    k: usize,
) -> Result<(Vec<Chain>, Vec<DescentTrace>), RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if !forest.is_summarized() {
        return Err(RetrievalError::NotSummarized);
    }
    let roots = forest.roots();
    let counts = roots
        .iter()
        .map(|r| forest.leaves_under(r).map(|l| l.len()))
        .collect::<Result<Vec<_>, _>>()?;
    let quotas = allocate_quotas(&counts, k);

    let outcomes: Vec<TreeOutcome> = thread::scope(|s| {
        let handles: Vec<_> = roots
            .iter()
            .zip(&quotas)
            .filter(|(_, q)| **q > 0)
            .map(|(root, &q)| s.spawn(move || search_tree(forest, gateway, query, root, q)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("descent worker panicked")).collect()
    });

    let mut traces = Vec::new();
    let mut failure = None;
    for outcome in outcomes {
        match outcome {
            Ok(ts) => traces.extend(ts),
            Err((e, ts)) => {
                traces.extend(ts);
                failure.get_or_insert(e);
            }
        }
    }
    if let Some(source) = failure {
        return Err(RetrievalError::Selection { source, traces });
    }
    let chains = traces
        .iter()
        .map(|t| render_chain(forest, &t.leaf))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((chains, traces))
}
