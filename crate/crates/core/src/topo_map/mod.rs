//! Topological experience map.
//!
//! A map is a set of pose-stamped nodes (position, yaw, opaque image path,
//! caption) joined by undirected, metric-cost traversability edges. It is
//! the leaf layer of the semantic forest and the graph the navigation
//! planner runs on.

mod io;
mod path;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_map, map_digest, save_map, MAP_FORMAT, MAP_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("duplicate node id `{0}`")]
    DuplicateId(NodeId),
    #[error("invalid pose for node `{id}`: {reason}")]
    InvalidPose { id: NodeId, reason: String },
    #[error("node `{0}` has an empty caption")]
    EmptyCaption(NodeId),
    #[error("unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("self loop on node `{0}`")]
    SelfLoop(NodeId),
    #[error("negative edge cost {cost} between `{a}` and `{b}`")]
    NegativeCost { a: NodeId, b: NodeId, cost: f64 },
    #[error("non-finite edge cost between `{a}` and `{b}`")]
    NonFiniteCost { a: NodeId, b: NodeId },
    #[error("duplicate edge `{a}` -- `{b}`")]
    DuplicateEdge { a: NodeId, b: NodeId },
    #[error("no path from `{from}` to `{to}`")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Opaque identifier of a map node. Ordering is lexicographic on the string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

/// Allocentric position in meters plus heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose {
    /// Builds a pose, rejecting non-finite fields and wrapping yaw into [-π, π).
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Result<Self, String> {
        for (name, v) in [("x", x), ("y", y), ("z", z), ("yaw", yaw)] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        Ok(Pose {
            x,
            y,
            z,
            yaw: normalize_yaw(yaw),
        })
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Pose {
            x,
            y,
            z: 0.0,
            yaw: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.yaw.is_finite()
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Wraps an angle into [-π, π).
pub fn normalize_yaw(yaw: f64) -> f64 {
    if (-PI..PI).contains(&yaw) {
        return yaw;
    }
    let wrapped = (yaw + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can land exactly on 2π for tiny negative inputs
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub id: NodeId,
    pub pose: Pose,
    pub image_ref: Option<String>,
    pub caption: String,
}

impl MapNode {
    pub fn new(id: impl Into<String>, pose: Pose, caption: impl Into<String>) -> Self {
        MapNode {
            id: NodeId(id.into()),
            pose,
            image_ref: None,
            caption: caption.into(),
        }
    }

    pub fn with_image(mut self, image_ref: impl Into<String>) -> Self {
        self.image_ref = Some(image_ref.into());
        self
    }
}

/// Undirected edge; `a < b` always holds for edges stored in a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoEdge {
    pub a: NodeId,
    pub b: NodeId,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopologicalMap {
    nodes: BTreeMap<NodeId, MapNode>,
    edges: BTreeMap<(NodeId, NodeId), f64>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl TopologicalMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: MapNode) -> Result<(), MapError> {
        if self.nodes.contains_key(&node.id) {
            return Err(MapError::DuplicateId(node.id));
        }
        if !node.pose.is_finite() {
            return Err(MapError::InvalidPose {
                id: node.id,
                reason: "coordinate is not finite".into(),
            });
        }
        if node.caption.trim().is_empty() {
            return Err(MapError::EmptyCaption(node.id));
        }
        let mut node = node;
        node.pose.yaw = normalize_yaw(node.pose.yaw);
        self.adjacency.insert(node.id.clone(), BTreeSet::new());
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    /// Adds an undirected edge. A missing cost defaults to the Euclidean
    /// distance between the endpoint poses.
    pub fn add_edge(&mut self, a: &NodeId, b: &NodeId, cost: Option<f64>) -> Result<(), MapError> {
        let pa = self.node(a).ok_or_else(|| MapError::UnknownNode(a.clone()))?.pose;
        let pb = self.node(b).ok_or_else(|| MapError::UnknownNode(b.clone()))?.pose;
        if a == b {
            return Err(MapError::SelfLoop(a.clone()));
        }
        let cost = cost.unwrap_or_else(|| pa.distance(&pb));
        if cost.is_nan() || cost.is_infinite() {
            return Err(MapError::NonFiniteCost {
                a: a.clone(),
                b: b.clone(),
            });
        }
        if cost < 0.0 {
            return Err(MapError::NegativeCost {
                a: a.clone(),
                b: b.clone(),
                cost,
            });
        }
        let key = edge_key(a, b);
        if self.edges.contains_key(&key) {
            return Err(MapError::DuplicateEdge { a: key.0, b: key.1 });
        }
        self.edges.insert(key, cost);
        self.adjacency.get_mut(a).expect("checked").insert(b.clone());
        self.adjacency.get_mut(b).expect("checked").insert(a.clone());
        Ok(())
    }

    pub fn node(&self, id: &NodeId) -> Option<&MapNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &MapNode> {
        self.nodes.values()
    }

    /// Edges in canonical `(a, b)` order.
    pub fn edges(&self) -> impl Iterator<Item = TopoEdge> + '_ {
        self.edges.iter().map(|((a, b), c)| TopoEdge {
            a: a.clone(),
            b: b.clone(),
            cost: *c,
        })
    }

    pub fn edge_cost(&self, a: &NodeId, b: &NodeId) -> Option<f64> {
        self.edges.get(&edge_key(a, b)).copied()
    }

    pub fn neighbors(&self, id: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(id).into_iter().flatten()
    }

    /// Environment size in mapped nodes. Not the number of semantic trees.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first_node(&self) -> Option<&MapNode> {
        self.nodes.values().next()
    }

    /// Minimum-cost node path; ties go to the lexicographically smallest id
    /// sequence.
    pub fn shortest_path(&self, from: &NodeId, to: &NodeId) -> Result<Vec<NodeId>, MapError> {
        path::shortest_path(self, from, to)
    }

    /// True when every consecutive pair of `path` is an edge of the map.
    pub fn is_valid_path(&self, path: &[NodeId]) -> bool {
        !path.is_empty()
            && path.iter().all(|id| self.contains(id))
            && path.windows(2).all(|w| self.edge_cost(&w[0], &w[1]).is_some())
    }

    pub fn path_cost(&self, path: &[NodeId]) -> Option<f64> {
        path.windows(2)
            .try_fold(0.0, |acc, w| self.edge_cost(&w[0], &w[1]).map(|c| acc + c))
    }
}

fn edge_key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, x: f64, y: f64) -> MapNode {
        MapNode::new(id, Pose::xy(x, y), format!("caption {id}"))
    }

    #[test]
    fn add_node_to_empty_map() {
        let mut map = TopologicalMap::new();
        map.add_node(node("A", 0.0, 0.0)).unwrap();
        assert_eq!(map.node_count(), 1);
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut map = TopologicalMap::new();
        map.add_node(node("A", 0.0, 0.0)).unwrap();
        assert_eq!(
            map.add_node(node("A", 1.0, 0.0)),
            Err(MapError::DuplicateId("A".into()))
        );
        assert_eq!(map.node_count(), 1);
    }

    #[test]
    fn nan_pose_rejected() {
        let mut map = TopologicalMap::new();
        map.add_node(node("A", 0.0, 0.0)).unwrap();
        let err = map.add_node(node("B", f64::NAN, 0.0)).unwrap_err();
        assert!(matches!(err, MapError::InvalidPose { .. }));
        assert!(Pose::new(0.0, f64::INFINITY, 0.0, 0.0).is_err());
    }

    #[test]
    fn empty_caption_rejected() {
        let mut map = TopologicalMap::new();
        let err = map.add_node(MapNode::new("A", Pose::xy(0.0, 0.0), "  ")).unwrap_err();
        assert_eq!(err, MapError::EmptyCaption("A".into()));
    }

    #[test]
    fn default_edge_cost_is_euclidean() {
        let mut map = TopologicalMap::new();
        map.add_node(node("A", 0.0, 0.0)).unwrap();
        map.add_node(node("B", 3.0, 4.0)).unwrap();
        map.add_edge(&"A".into(), &"B".into(), None).unwrap();
        assert_eq!(map.edge_cost(&"B".into(), &"A".into()), Some(5.0));
        assert_eq!(map.edge_count(), 1);
    }

    #[test]
    fn edge_errors() {
        let mut map = TopologicalMap::new();
        map.add_node(node("A", 0.0, 0.0)).unwrap();
        map.add_node(node("B", 1.0, 0.0)).unwrap();
        let (a, b) = (NodeId::from("A"), NodeId::from("B"));
        assert_eq!(map.add_edge(&a, &a, None), Err(MapError::SelfLoop(a.clone())));
        assert!(matches!(
            map.add_edge(&a, &b, Some(-1.0)),
            Err(MapError::NegativeCost { .. })
        ));
        assert!(matches!(
            map.add_edge(&a, &"Z".into(), None),
            Err(MapError::UnknownNode(_))
        ));
        map.add_edge(&b, &a, Some(2.0)).unwrap();
        assert!(matches!(
            map.add_edge(&a, &b, None),
            Err(MapError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn yaw_is_wrapped() {
        let p = Pose::new(0.0, 0.0, 0.0, PI).unwrap();
        assert!((p.yaw + PI).abs() < 1e-12);
        let p = Pose::new(0.0, 0.0, 0.0, 3.0 * PI + 0.5).unwrap();
        assert!((p.yaw - (-PI + 0.5)).abs() < 1e-9);
        for raw in [-10.0, -PI, -1e-300, 0.0, 7.0, 1e6] {
            let y = normalize_yaw(raw);
            assert!((-PI..PI).contains(&y), "{raw} -> {y}");
        }
    }
}
