use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use super::{MapError, NodeId, TopologicalMap};

/// Heap label: total cost, then the node-index sequence. Indices follow id
/// order, so comparing index sequences compares id sequences.
#[derive(Debug, PartialEq)]
struct Label {
    cost: f64,
    path: Vec<usize>,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(super) fn shortest_path(
    map: &TopologicalMap,
    from: &NodeId,
    to: &NodeId,
) -> Result<Vec<NodeId>, MapError> {
    if !map.contains(from) {
        return Err(MapError::UnknownNode(from.clone()));
    }
    if !map.contains(to) {
        return Err(MapError::UnknownNode(to.clone()));
    }
    if from == to {
        return Ok(vec![from.clone()]);
    }

    let ids: Vec<&NodeId> = map.nodes.keys().collect();
    let index: HashMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let adjacency: Vec<Vec<(usize, f64)>> = ids
        .iter()
        .map(|id| {
            map.neighbors(id)
                .map(|n| (index[n], map.edge_cost(id, n).expect("adjacent")))
                .collect()
        })
        .collect();

    let (src, dst) = (index[from], index[to]);
    let mut best: Vec<Option<Label>> = (0..ids.len()).map(|_| None).collect();
    let mut settled = vec![false; ids.len()];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(Label {
        cost: 0.0,
        path: vec![src],
    }));

    while let Some(Reverse(label)) = heap.pop() {
        let u = *label.path.last().expect("nonempty");
        if settled[u] {
            continue;
        }
        settled[u] = true;
        if u == dst {
            return Ok(label.path.into_iter().map(|i| ids[i].clone()).collect());
        }
        for &(v, c) in &adjacency[u] {
            if settled[v] {
                continue;
            }
            let mut path = label.path.clone();
            path.push(v);
            let candidate = Label {
                cost: label.cost + c,
                path,
            };
            let improves = best[v].as_ref().is_none_or(|cur| candidate < *cur);
            if improves {
                heap.push(Reverse(Label {
                    cost: candidate.cost,
                    path: candidate.path.clone(),
                }));
                best[v] = Some(candidate);
            }
        }
    }
    Err(MapError::Unreachable {
        from: from.clone(),
        to: to.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo_map::{MapNode, Pose};
    use proptest::prelude::*;

    fn build(n: usize, edges: &[(usize, usize, f64)]) -> TopologicalMap {
        let mut map = TopologicalMap::new();
        for i in 0..n {
            map.add_node(MapNode::new(format!("n{i}"), Pose::xy(i as f64, 0.0), "c"))
                .unwrap();
        }
        for &(a, b, c) in edges {
            let _ = map.add_edge(&format!("n{a}").into(), &format!("n{b}").into(), Some(c));
        }
        map
    }

    /// Exhaustive enumeration of simple paths; returns the minimum cost and
    /// the lexicographically smallest id sequence achieving it.
    fn enumerate_best(map: &TopologicalMap, from: &NodeId, to: &NodeId) -> Option<(f64, Vec<NodeId>)> {
        fn walk(
            map: &TopologicalMap,
            to: &NodeId,
            path: &mut Vec<NodeId>,
            cost: f64,
            best: &mut Option<(f64, Vec<NodeId>)>,
        ) {
            let last = path.last().unwrap().clone();
            if &last == to {
                let better = match best {
                    None => true,
                    Some((c, p)) => cost < *c || (cost == *c && *path < *p),
                };
                if better {
                    *best = Some((cost, path.clone()));
                }
                return;
            }
            let next: Vec<NodeId> = map.neighbors(&last).cloned().collect();
            for n in next {
                if path.contains(&n) {
                    continue;
                }
                let c = map.edge_cost(&last, &n).unwrap();
                path.push(n);
                walk(map, to, path, cost + c, best);
                path.pop();
            }
        }
        let mut best = None;
        walk(map, to, &mut vec![from.clone()], 0.0, &mut best);
        best
    }

    #[test]
    fn zero_length_path() {
        let map = build(2, &[(0, 1, 1.0)]);
        assert_eq!(map.shortest_path(&"n0".into(), &"n0".into()).unwrap(), vec![NodeId::from("n0")]);
    }

    #[test]
    fn line_graph() {
        let map = build(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let path = map.shortest_path(&"n0".into(), &"n2".into()).unwrap();
        assert_eq!(path, vec!["n0".into(), "n1".into(), NodeId::from("n2")]);
        assert_eq!(Some((2.0, path)), enumerate_best(&map, &"n0".into(), &"n2".into()));
    }

    #[test]
    fn unreachable_component() {
        let map = build(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert!(matches!(
            map.shortest_path(&"n0".into(), &"n3".into()),
            Err(MapError::Unreachable { .. })
        ));
    }

    #[test]
    fn ties_take_smallest_id_sequence() {
        // diamond n0-n1-n3 and n0-n2-n3 with equal costs
        let map = build(4, &[(0, 2, 1.0), (2, 3, 1.0), (0, 1, 1.0), (1, 3, 1.0)]);
        let path = map.shortest_path(&"n0".into(), &"n3".into()).unwrap();
        assert_eq!(path, vec!["n0".into(), "n1".into(), NodeId::from("n3")]);
    }

    #[test]
    fn zero_cost_edges_keep_lexicographic_tie_break() {
        let map = build(4, &[(0, 3, 0.0), (0, 2, 0.0), (2, 1, 0.0), (1, 3, 0.0)]);
        let got = map.shortest_path(&"n0".into(), &"n3".into()).unwrap();
        let (_, want) = enumerate_best(&map, &"n0".into(), &"n3".into()).unwrap();
        assert_eq!(got, want);
    }

    fn graph_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
        (2usize..=8).prop_flat_map(|n| {
            let edge = (0..n, 0..n, prop_oneof![Just(1.0), Just(2.0), 0.0f64..5.0]);
            (Just(n), proptest::collection::vec(edge, 0..20))
        })
    }

    proptest! {
        #[test]
        fn matches_exhaustive_enumeration((n, edges) in graph_strategy(), s in 0usize..8, t in 0usize..8) {
            let map = build(n, &edges);
            let (s, t) = (NodeId::new(format!("n{}", s % n)), NodeId::new(format!("n{}", t % n)));
            match (map.shortest_path(&s, &t), enumerate_best(&map, &s, &t)) {
                (Ok(path), Some((cost, want))) => {
                    prop_assert!(map.is_valid_path(&path));
                    prop_assert_eq!(path.first(), Some(&s));
                    prop_assert_eq!(path.last(), Some(&t));
                    prop_assert_eq!(map.path_cost(&path), Some(cost));
                    prop_assert_eq!(path, want);
                }
                (Err(MapError::Unreachable { .. }), None) => {}
                (got, want) => prop_assert!(false, "got {:?}, oracle {:?}", got, want),
            }
        }
    }
}
