//! Leaf-to-root chains and their text rendering.
//!
//! A chain renders as one line per node, leaf first:
//!
//! ```text
//! [level 0] (0.00, 1.00, 0.00) a wooden desk
//! [level 1] (0.00, 0.50, 0.00) a red chair, a wooden desk
//! ```

use serde::{Deserialize, Serialize};

use crate::llm_gateway::{ChainContext, ChainEntry};
use crate::semantic_forest::{ForestError, ForestNode, ForestNodeId, SemanticForest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub node_ids: Vec<ForestNodeId>,
    pub rendering: String,
}

impl Chain {
    pub fn leaf(&self) -> &ForestNodeId {
        &self.node_ids[0]
    }

    pub fn root(&self) -> &ForestNodeId {
        self.node_ids.last().expect("chains are nonempty")
    }

    /// Checks the chain is a leaf-to-root path of `forest`.
    pub fn validate(&self, forest: &SemanticForest) -> Result<(), ForestError> {
        let bad = |m: String| Err(ForestError::InvariantViolation(m));
        if self.node_ids.is_empty() {
            return bad("empty chain".into());
        }
        if !forest.get(self.leaf())?.is_leaf() {
            return bad(format!("chain starts at non-leaf `{}`", self.leaf()));
        }
        if forest.get(self.root())?.parent.is_some() {
            return bad(format!("chain ends at non-root `{}`", self.root()));
        }
        for w in self.node_ids.windows(2) {
            if forest.get(&w[0])?.parent.as_ref() != Some(&w[1]) {
                return bad(format!("`{}` is not the parent of `{}`", w[1], w[0]));
            }
        }
        Ok(())
    }

    /// The chain as generator context.
    pub fn to_context(&self, forest: &SemanticForest) -> Result<ChainContext, ForestError> {
        let entries = self
            .node_ids
            .iter()
            .map(|id| {
                let n = forest.get(id)?;
                Ok(ChainEntry {
                    id: id.to_string(),
                    level: n.level,
                    summary: n.summary.clone().unwrap_or_default(),
                })
            })
            .collect::<Result<Vec<_>, ForestError>>()?;
        Ok(ChainContext {
            entries,
            rendering: self.rendering.clone(),
        })
    }
}

/// The rendering line for one node.
pub fn chain_line(node: &ForestNode) -> String {
    let c = &node.centroid;
    format!(
        "[level {}] ({:.2}, {:.2}, {:.2}) {}",
        node.level,
        c.x,
        c.y,
        c.z,
        node.summary.as_deref().unwrap_or("")
    )
}

/// The chain from `leaf` up to its root with its rendering.
pub fn render_chain(forest: &SemanticForest, leaf: &ForestNodeId) -> Result<Chain, ForestError> {
    let node_ids = forest.chain(leaf)?;
    let lines: Vec<String> = node_ids
        .iter()
        .map(|id| forest.get(id).map(chain_line))
        .collect::<Result<_, _>>()?;
    Ok(Chain {
        node_ids,
        rendering: lines.join("\n"),
    })
}
