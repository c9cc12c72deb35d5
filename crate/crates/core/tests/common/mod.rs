#![allow(dead_code)]

use erag_core::semantic_forest::{ForestNodeId, SemanticForest};
use erag_core::topo_map::{MapNode, NodeId, Pose, TopologicalMap};
use rand::Rng;

pub const WORDS: &[&str] = &[
    "red", "chair", "lamp", "kitchen", "sink", "desk", "plant", "window", "door", "stairs", "sofa", "shelf", "coffee",
    "machine", "printer", "bench", "tree", "fountain", "clock", "poster",
];

pub fn caption<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..=4);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// `n` nodes uniformly in a square of side `extent`, chained by id.
pub fn random_map<R: Rng>(rng: &mut R, n: usize, extent: f64) -> TopologicalMap {
    let mut map = TopologicalMap::new();
    for i in 0..n {
        let pose = Pose::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), rng.gen_range(0.0..2.0), 0.0).unwrap();
        map.add_node(MapNode::new(format!("n{i:03}"), pose, caption(rng))).unwrap();
    }
    for i in 1..n {
        map.add_edge(&NodeId::new(format!("n{:03}", i - 1)), &NodeId::new(format!("n{i:03}")), None)
            .unwrap();
    }
    map
}

/// Band of a forest node: 0 for leaves, else the number in `Cbb/sssss`.
pub fn band(id: &ForestNodeId) -> usize {
    let s = id.as_str();
    if s.starts_with("L/") {
        0
    } else {
        s[1..s.find('/').expect("cluster ids have a slash")].parse().expect("numeric band")
    }
}

/// Top-level nodes once band `b` is complete, as sorted sets of map-node
/// indices (indices follow map id order), sorted by smallest member.
pub fn frontier_partition(forest: &SemanticForest, map: &TopologicalMap, b: usize) -> Vec<Vec<usize>> {
    let index: std::collections::BTreeMap<&NodeId, usize> = map.nodes().enumerate().map(|(i, n)| (&n.id, i)).collect();
    let mut out: Vec<Vec<usize>> = forest
        .nodes()
        .filter(|n| band(&n.id) <= b && n.parent.as_ref().is_none_or(|p| band(p) > b))
        .map(|n| {
            let mut leaves: Vec<usize> = forest
                .leaves_under(&n.id)
                .unwrap()
                .iter()
                .map(|l| index[forest.node(l).unwrap().map_node.as_ref().unwrap()])
                .collect();
            leaves.sort_unstable();
            leaves
        })
        .collect();
    out.sort_by_key(|c| c[0]);
    out
}
