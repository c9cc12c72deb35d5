//! Semantic forest over a topological map.
//!
//! Leaves are map nodes. Higher levels come from agglomerative clustering of
//! leaf positions, cut at an increasing threshold schedule: band `b` groups
//! the current top-level nodes whose leaves fall into one cluster at
//! threshold `schedule[b]`. A cluster made of a single existing node adds no
//! new node; clusters that never merge stay separate roots. Every non-leaf
//! sits at the mean position of its leaves and carries a summary of its
//! direct children, generated bottom-up one level at a time.

pub mod cluster;
mod io;
mod summarize;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::Linkage;
pub use io::{load_forest, save_forest, FOREST_FORMAT, FOREST_VERSION};
pub use summarize::{summarize_forest, SummarizeOptions, DEFAULT_FANOUT, DEFAULT_SUMMARY_BUDGET};

use crate::numfmt::round_sig9;
use crate::llm_gateway::GatewayError;
use crate::topo_map::{map_digest, NodeId, Pose, TopologicalMap};

/// Per-axis tolerance for the centroid law.
pub const CENTROID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("cannot build a forest over an empty map")]
    EmptyMap,
    #[error("invalid clustering config: {0}")]
    InvalidConfig(String),
    #[error("unknown forest node `{0}`")]
    UnknownNode(ForestNodeId),
    #[error("`{0}` is not a leaf")]
    NotALeaf(ForestNodeId),
    #[error("summarizing `{node}` failed: {source}")]
    Summarizer {
        node: ForestNodeId,
        #[source]
        source: GatewayError,
    },
    #[error("forest parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("forest invariant violated: {0}")]
    InvariantViolation(String),
    #[error("forest was built from map {expected}, but the map digest is {found}")]
    DigestMismatch { expected: String, found: String },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ForestNodeId(pub String);

impl ForestNodeId {
    pub fn leaf(map_node: &NodeId) -> Self {
        ForestNodeId(format!("L/{map_node}"))
    }

    fn cluster(band: usize, seq: usize) -> Self {
        ForestNodeId(format!("C{band:02}/{seq:05}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ForestNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ForestNodeId {
    fn from(s: &str) -> Self {
        ForestNodeId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestNode {
    pub id: ForestNodeId,
    /// 0 for leaves, otherwise 1 + the highest child level.
    pub level: u32,
    /// Sorted by id; empty exactly for leaves.
    pub children: Vec<ForestNodeId>,
    pub parent: Option<ForestNodeId>,
    /// Present exactly for leaves.
    pub map_node: Option<NodeId>,
    pub centroid: Pose,
    /// Leaf caption, or the generated abstraction once summarized.
    pub summary: Option<String>,
}

impl ForestNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricDims {
    #[default]
    Xy,
    Xyz,
}

impl MetricDims {
    pub fn point(self, p: &Pose) -> [f64; 3] {
        match self {
            MetricDims::Xy => [p.x, p.y, 0.0],
            MetricDims::Xyz => [p.x, p.y, p.z],
        }
    }
}

pub const DEFAULT_MAX_CHILDREN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub linkage: Linkage,
    pub metric_dims: MetricDims,
    /// Strictly increasing distances in meters, one per forest band.
    pub threshold_schedule: Vec<f64>,
    pub max_children: usize,
}

impl ClusteringConfig {
    /// Average linkage on (x, y) with the geometric schedule for `map`.
    pub fn for_map(map: &TopologicalMap) -> Self {
        let dims = MetricDims::default();
        ClusteringConfig {
            linkage: Linkage::default(),
            metric_dims: dims,
            threshold_schedule: geometric_schedule(map, dims),
            max_children: DEFAULT_MAX_CHILDREN,
        }
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        let s = &self.threshold_schedule;
        if s.is_empty() {
            return Err(ForestError::InvalidConfig("threshold schedule is empty".into()));
        }
        if s.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(ForestError::InvalidConfig("thresholds must be finite and nonnegative".into()));
        }
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ForestError::InvalidConfig("threshold schedule must be strictly increasing".into()));
        }
        if self.max_children < 2 {
            return Err(ForestError::InvalidConfig("max_children must be at least 2".into()));
        }
        Ok(())
    }
}

/// Thresholds `t, 2t, 4t, ...` up to the first one reaching the map
/// diameter, with `t` twice the median nearest-neighbour distance.
pub fn geometric_schedule(map: &TopologicalMap, dims: MetricDims) -> Vec<f64> {
    let points: Vec<[f64; 3]> = map.nodes().map(|n| dims.point(&n.pose)).collect();
    let mut nearest = Vec::with_capacity(points.len());
    let mut diameter: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, q) in points.iter().enumerate() {
            if i != j {
                let d = cluster::euclidean(p, q);
                best = best.min(d);
                diameter = diameter.max(d);
            }
        }
        if best.is_finite() {
            nearest.push(best);
        }
    }
    nearest.sort_by(f64::total_cmp);
    let median = if nearest.is_empty() { 0.0 } else { nearest[nearest.len() / 2] };
    let mut base = 2.0 * median;
    if base <= 0.0 {
        base = nearest.iter().copied().find(|d| *d > 0.0).map_or(1.0, |d| 2.0 * d);
    }
    let mut schedule = vec![base];
    while *schedule.last().expect("nonempty") < diameter {
        let next = schedule.last().expect("nonempty") * 2.0;
        schedule.push(next);
    }
    schedule
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticForest {
    roots: Vec<ForestNodeId>,
    nodes: BTreeMap<ForestNodeId, ForestNode>,
    leaf_index: BTreeMap<NodeId, ForestNodeId>,
    map_digest: String,
}

impl SemanticForest {
    /// One root per semantic tree; the tree count `N` used to split `k`.
    pub fn roots(&self) -> &[ForestNodeId] {
        &self.roots
    }

    pub fn node(&self, id: &ForestNodeId) -> Option<&ForestNode> {
        self.nodes.get(id)
    }

    pub fn get(&self, id: &ForestNodeId) -> Result<&ForestNode, ForestError> {
        self.nodes.get(id).ok_or_else(|| ForestError::UnknownNode(id.clone()))
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &ForestNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ForestNode> {
        self.nodes.values().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_index.len()
    }

    pub fn leaf_for(&self, map_node: &NodeId) -> Option<&ForestNodeId> {
        self.leaf_index.get(map_node)
    }

    pub fn map_digest(&self) -> &str {
        &self.map_digest
    }

    /// Number of nodes on the longest leaf-to-root chain.
    pub fn depth(&self) -> usize {
        self.roots
            .iter()
            .map(|r| self.nodes[r].level as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// Node counts per level, index = level.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.depth()];
        for n in self.nodes.values() {
            counts[n.level as usize] += 1;
        }
        counts
    }

    pub fn summary(&self, id: &ForestNodeId) -> Option<&str> {
        self.nodes.get(id).and_then(|n| n.summary.as_deref())
    }

    pub fn is_summarized(&self) -> bool {
        self.nodes.values().all(|n| n.summary.as_deref().is_some_and(|s| !s.trim().is_empty()))
    }

    /// Leaf-to-root id path.
    pub fn chain(&self, leaf: &ForestNodeId) -> Result<Vec<ForestNodeId>, ForestError> {
        let node = self.get(leaf)?;
        if !node.is_leaf() {
            return Err(ForestError::NotALeaf(leaf.clone()));
        }
        let mut chain = vec![leaf.clone()];
        let mut cur = node;
        while let Some(parent) = &cur.parent {
            chain.push(parent.clone());
            cur = self.get(parent)?;
        }
        Ok(chain)
    }

    /// Leaf ids under `id` (inclusive), in id order.
    pub fn leaves_under(&self, id: &ForestNodeId) -> Result<Vec<ForestNodeId>, ForestError> {
        let mut out = Vec::new();
        let mut stack = vec![id.clone()];
        while let Some(cur) = stack.pop() {
            let node = self.get(&cur)?;
            if node.is_leaf() {
                out.push(cur);
            } else {
                stack.extend(node.children.iter().cloned());
            }
        }
        out.sort();
        Ok(out)
    }

    /// The root whose tree contains `id`.
    pub fn root_of(&self, id: &ForestNodeId) -> Result<ForestNodeId, ForestError> {
        let mut cur = self.get(id)?;
        while let Some(p) = &cur.parent {
            cur = self.get(p)?;
        }
        Ok(cur.id.clone())
    }

    /// Checks every structural invariant, including the centroid law.
    pub fn validate(&self) -> Result<(), ForestError> {
        let bad = |m: String| Err(ForestError::InvariantViolation(m));
        if self.roots.is_empty() {
            return bad("forest has no roots".into());
        }
        for node in self.nodes.values() {
            if node.is_leaf() != node.map_node.is_some() {
                return bad(format!("`{}`: leaf iff map_node present", node.id));
            }
            if node.is_leaf() && node.level != 0 {
                return bad(format!("leaf `{}` has level {}", node.id, node.level));
            }
            if !node.children.windows(2).all(|w| w[0] < w[1]) {
                return bad(format!("`{}`: children not sorted and unique", node.id));
            }
            let mut max_child = None;
            for c in &node.children {
                let Some(child) = self.nodes.get(c) else {
                    return bad(format!("`{}` references missing child `{c}`", node.id));
                };
                if child.parent.as_ref() != Some(&node.id) {
                    return bad(format!("child `{c}` does not point back to `{}`", node.id));
                }
                max_child = max_child.max(Some(child.level));
            }
            if let Some(m) = max_child {
                if node.level != m + 1 {
                    return bad(format!("`{}` has level {} but highest child level {m}", node.id, node.level));
                }
            }
            if let Some(p) = &node.parent {
                match self.nodes.get(p) {
                    Some(parent) if parent.children.contains(&node.id) => {}
                    _ => return bad(format!("`{}` has parent `{p}` that does not list it", node.id)),
                }
            }
            if !node.centroid.is_finite() {
                return bad(format!("`{}` has a non-finite centroid", node.id));
            }
        }
        let mut sorted_roots = self.roots.clone();
        sorted_roots.sort();
        sorted_roots.dedup();
        if sorted_roots != self.roots {
            return bad("roots must be sorted and unique".into());
        }
        let expected_roots: Vec<ForestNodeId> =
            self.nodes.values().filter(|n| n.parent.is_none()).map(|n| n.id.clone()).collect();
        if expected_roots != self.roots {
            return bad("root list does not match parentless nodes".into());
        }
        let leaves: Vec<&ForestNode> = self.leaves().collect();
        if leaves.len() != self.leaf_index.len() {
            return bad("leaf index does not cover every leaf exactly once".into());
        }
        for leaf in &leaves {
            let m = leaf.map_node.as_ref().expect("leaf");
            if self.leaf_index.get(m) != Some(&leaf.id) {
                return bad(format!("map node `{m}` is not indexed to leaf `{}`", leaf.id));
            }
        }
        for node in self.nodes.values().filter(|n| !n.is_leaf()) {
            let mean = self.leaf_mean(&node.id)?;
            let c = &node.centroid;
            if (c.x - mean[0]).abs() > CENTROID_TOLERANCE
                || (c.y - mean[1]).abs() > CENTROID_TOLERANCE
                || (c.z - mean[2]).abs() > CENTROID_TOLERANCE
            {
                return bad(format!(
                    "`{}` centroid ({}, {}, {}) is not the leaf mean ({}, {}, {})",
                    node.id, c.x, c.y, c.z, mean[0], mean[1], mean[2]
                ));
            }
        }
        Ok(())
    }

    fn leaf_mean(&self, id: &ForestNodeId) -> Result<[f64; 3], ForestError> {
        let leaves = self.leaves_under(id)?;
        let mut sum = [0.0; 3];
        for l in &leaves {
            let p = self.nodes[l].centroid;
            sum[0] += p.x;
            sum[1] += p.y;
            sum[2] += p.z;
        }
        let n = leaves.len() as f64;
        Ok([sum[0] / n, sum[1] / n, sum[2] / n])
    }

    /// Verifies the forest was built from `map`: matching digest, one leaf per
    /// map node at its pose. Poses are compared at the precision of the map
    /// file, so a forest built from an in-memory map also fits the saved copy.
    pub fn check_against(&self, map: &TopologicalMap) -> Result<(), ForestError> {
        let found = map_digest(map);
        if found != self.map_digest {
            return Err(ForestError::DigestMismatch {
                expected: self.map_digest.clone(),
                found,
            });
        }
        if map.node_count() != self.leaf_index.len() {
            return Err(ForestError::InvariantViolation("leaf count differs from map node count".into()));
        }
        for n in map.nodes() {
            let leaf = self
                .leaf_index
                .get(&n.id)
                .ok_or_else(|| ForestError::InvariantViolation(format!("map node `{}` has no leaf", n.id)))?;
            let c = &self.nodes[leaf].centroid;
            let same = [(c.x, n.pose.x), (c.y, n.pose.y), (c.z, n.pose.z), (c.yaw, n.pose.yaw)]
                .iter()
                .all(|&(a, b)| round_sig9(a) == round_sig9(b));
            if !same {
                return Err(ForestError::InvariantViolation(format!("leaf `{leaf}` pose differs from the map")));
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts(nodes: BTreeMap<ForestNodeId, ForestNode>, map_digest: String) -> Self {
        let roots = nodes.values().filter(|n| n.parent.is_none()).map(|n| n.id.clone()).collect();
        let leaf_index = nodes
            .values()
            .filter_map(|n| n.map_node.clone().map(|m| (m, n.id.clone())))
            .collect();
        SemanticForest {
            roots,
            nodes,
            leaf_index,
            map_digest,
        }
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut BTreeMap<ForestNodeId, ForestNode> {
        &mut self.nodes
    }
}

/// Clusters and summarizes in one step.
pub fn build_forest(
    map: &TopologicalMap,
    cfg: &ClusteringConfig,
    gateway: &crate::llm_gateway::Gateway,
    opts: SummarizeOptions,
) -> Result<SemanticForest, ForestError> {
    let mut forest = build_structure(map, cfg)?;
    summarize_forest(&mut forest, gateway, opts)?;
    Ok(forest)
}

/// Clusters map nodes into a forest. Leaf summaries are the captions;
/// non-leaf summaries are left unset.
pub fn build_structure(map: &TopologicalMap, cfg: &ClusteringConfig) -> Result<SemanticForest, ForestError> {
    if map.is_empty() {
        return Err(ForestError::EmptyMap);
    }
    cfg.validate()?;

    let map_nodes: Vec<_> = map.nodes().collect();
    let points: Vec<[f64; 3]> = map_nodes.iter().map(|n| cfg.metric_dims.point(&n.pose)).collect();
    let partitions = cluster::agglomerate(&points, cfg.linkage, &cfg.threshold_schedule);

    let mut nodes = BTreeMap::new();
    // Top-level nodes so far; entry i covers the leaves in `members[i]`.
    let mut frontier: Vec<ForestNodeId> = Vec::with_capacity(map_nodes.len());
    let mut members: Vec<Vec<usize>> = Vec::with_capacity(map_nodes.len());
    let mut owner: Vec<usize> = (0..map_nodes.len()).collect();
    for (i, n) in map_nodes.iter().enumerate() {
        let id = ForestNodeId::leaf(&n.id);
        nodes.insert(
            id.clone(),
            ForestNode {
                id: id.clone(),
                level: 0,
                children: Vec::new(),
                parent: None,
                map_node: Some(n.id.clone()),
                centroid: n.pose,
                summary: Some(n.caption.clone()),
            },
        );
        frontier.push(id);
        members.push(vec![i]);
    }

    for (band, partition) in partitions.iter().enumerate() {
        let band = band + 1;
        let mut seq = 0;
        let mut next_frontier = Vec::new();
        let mut next_members = Vec::new();
        for cluster in partition {
            let mut parts: Vec<usize> = cluster.iter().map(|&leaf| owner[leaf]).collect();
            parts.sort_by_key(|&f| members[f][0]);
            parts.dedup();
            let groups = if parts.len() > cfg.max_children {
                let centroids: Vec<[f64; 3]> = (0..frontier.len())
                    .map(|f| cfg.metric_dims.point(&nodes[&frontier[f]].centroid))
                    .collect();
                cluster::bisect_groups(&parts, &centroids, cfg.max_children)
            } else {
                vec![parts]
            };
            for group in groups {
                if group.len() == 1 {
                    next_frontier.push(frontier[group[0]].clone());
                    next_members.push(members[group[0]].clone());
                    continue;
                }
                let id = ForestNodeId::cluster(band, seq);
                seq += 1;
                let mut leaves: Vec<usize> = group.iter().flat_map(|&f| members[f].iter().copied()).collect();
                leaves.sort_unstable();
                let mut sum = [0.0; 3];
                for &l in &leaves {
                    let p = map_nodes[l].pose;
                    sum[0] += p.x;
                    sum[1] += p.y;
                    sum[2] += p.z;
                }
                let count = leaves.len() as f64;
                let mut children: Vec<ForestNodeId> = group.iter().map(|&f| frontier[f].clone()).collect();
                children.sort();
                let mut level = 0;
                for c in &children {
                    let child = nodes.get_mut(c).expect("frontier node exists");
                    child.parent = Some(id.clone());
                    level = level.max(child.level + 1);
                }
                nodes.insert(
                    id.clone(),
                    ForestNode {
                        id: id.clone(),
                        level,
                        children,
                        parent: None,
                        map_node: None,
                        centroid: Pose {
                            x: sum[0] / count,
                            y: sum[1] / count,
                            z: sum[2] / count,
                            yaw: 0.0,
                        },
                        summary: None,
                    },
                );
                next_frontier.push(id);
                next_members.push(leaves);
            }
        }
        for (f, leaves) in next_members.iter().enumerate() {
            for &l in leaves {
                owner[l] = f;
            }
        }
        frontier = next_frontier;
        members = next_members;
    }

    Ok(SemanticForest::from_parts(nodes, map_digest(map)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo_map::MapNode;

    pub(crate) fn four_node_map() -> TopologicalMap {
        let mut map = TopologicalMap::new();
        for (id, x, y, cap) in [
            ("a", 0.0, 0.0, "a red chair"),
            ("b", 0.0, 1.0, "a wooden desk"),
            ("c", 10.0, 0.0, "a water fountain"),
            ("d", 10.0, 1.0, "a café counter"),
        ] {
            map.add_node(MapNode::new(id, Pose::xy(x, y), cap)).unwrap();
        }
        map
    }

    pub(crate) fn four_node_config() -> ClusteringConfig {
        ClusteringConfig {
            linkage: Linkage::Average,
            metric_dims: MetricDims::Xy,
            threshold_schedule: vec![2.0, 20.0],
            max_children: 10,
        }
    }

    #[test]
    fn single_node_forest() {
        let mut map = TopologicalMap::new();
        map.add_node(MapNode::new("only", Pose::xy(1.0, 2.0), "a lamp")).unwrap();
        let forest = build_structure(&map, &ClusteringConfig::for_map(&map)).unwrap();
        assert_eq!(forest.len(), 1);
        assert_eq!(forest.roots(), &[ForestNodeId::from("L/only")]);
        assert_eq!(forest.depth(), 1);
        forest.validate().unwrap();
    }

    #[test]
    fn empty_map_rejected() {
        let map = TopologicalMap::new();
        let cfg = four_node_config();
        assert_eq!(build_structure(&map, &cfg), Err(ForestError::EmptyMap));
    }

    #[test]
    fn four_node_fixture_structure() {
        let forest = build_structure(&four_node_map(), &four_node_config()).unwrap();
        forest.validate().unwrap();
        assert_eq!(forest.roots().len(), 1);
        let root = forest.node(&forest.roots()[0]).unwrap();
        assert_eq!(root.level, 2);
        assert_eq!((root.centroid.x, root.centroid.y), (5.0, 0.5));
        let level1: Vec<Vec<ForestNodeId>> = root
            .children
            .iter()
            .map(|c| forest.leaves_under(c).unwrap())
            .collect();
        assert_eq!(
            level1,
            vec![
                vec![ForestNodeId::from("L/a"), ForestNodeId::from("L/b")],
                vec![ForestNodeId::from("L/c"), ForestNodeId::from("L/d")],
            ]
        );
        assert_eq!(forest.level_counts(), vec![4, 2, 1]);
        assert!(!forest.is_summarized());
    }

    #[test]
    fn coincident_nodes_merge() {
        let mut map = TopologicalMap::new();
        map.add_node(MapNode::new("p", Pose::xy(3.0, -2.0), "x")).unwrap();
        map.add_node(MapNode::new("q", Pose::xy(3.0, -2.0), "y")).unwrap();
        let cfg = ClusteringConfig { threshold_schedule: vec![0.5], ..four_node_config() };
        let forest = build_structure(&map, &cfg).unwrap();
        assert_eq!(forest.roots().len(), 1);
        let root = forest.node(&forest.roots()[0]).unwrap();
        assert_eq!((root.centroid.x, root.centroid.y), (3.0, -2.0));
        assert_eq!(root.level, 1);
    }

    #[test]
    fn far_clusters_stay_separate_roots() {
        let cfg = ClusteringConfig { threshold_schedule: vec![2.0], ..four_node_config() };
        let forest = build_structure(&four_node_map(), &cfg).unwrap();
        assert_eq!(forest.roots().len(), 2);
        forest.validate().unwrap();
    }

    #[test]
    fn chain_runs_leaf_to_root() {
        let forest = build_structure(&four_node_map(), &four_node_config()).unwrap();
        let chain = forest.chain(&"L/a".into()).unwrap();
        assert_eq!(chain.len(), 3);
        assert_eq!(chain[0], ForestNodeId::from("L/a"));
        assert_eq!(&chain[2], &forest.roots()[0]);
        assert_eq!(forest.chain(&chain[1]), Err(ForestError::NotALeaf(chain[1].clone())));
        assert!(matches!(forest.chain(&"nope".into()), Err(ForestError::UnknownNode(_))));
    }

    #[test]
    fn oversized_clusters_are_split() {
        let mut map = TopologicalMap::new();
        for i in 0..25 {
            map.add_node(MapNode::new(format!("n{i:02}"), Pose::xy(i as f64, 0.0), "x")).unwrap();
        }
        let cfg = ClusteringConfig {
            threshold_schedule: vec![100.0],
            max_children: 4,
            ..four_node_config()
        };
        let forest = build_structure(&map, &cfg).unwrap();
        forest.validate().unwrap();
        assert!(forest.nodes().all(|n| n.children.len() <= 4));
        assert!(forest.depth() <= cfg.threshold_schedule.len() + 1);
        let covered: usize = forest.roots().iter().map(|r| forest.leaves_under(r).unwrap().len()).sum();
        assert_eq!(covered, 25);
    }

    #[test]
    fn config_validation() {
        let mut cfg = four_node_config();
        cfg.threshold_schedule = vec![];
        assert!(cfg.validate().is_err());
        cfg.threshold_schedule = vec![2.0, 2.0];
        assert!(cfg.validate().is_err());
        cfg.threshold_schedule = vec![1.0];
        cfg.max_children = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn geometric_schedule_doubles_up_to_diameter() {
        let map = four_node_map();
        let s = geometric_schedule(&map, MetricDims::Xy);
        // nearest neighbour distances are all 1 -> base 2
        assert_eq!(s[0], 2.0);
        assert!(s.windows(2).all(|w| w[1] == 2.0 * w[0]));
        let diameter = 101.0f64.sqrt();
        assert!(*s.last().unwrap() >= diameter);
        assert!(s[s.len() - 2] < diameter);
    }
}
