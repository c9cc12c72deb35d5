//! Slow, obviously-correct reference implementations. They share no code
//! with the library and work on plain data so tests can compare the two.

/// Inter-cluster distance rule for [`agglomerate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Complete,
    Average,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Distance between two clusters, computed from every member pair.
pub fn linkage_distance(points: &[[f64; 3]], a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|&i| b.iter().map(move |&j| dist(&points[i], &points[j])));
    match linkage {
        Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
        Linkage::Complete => pairs.fold(0.0, f64::max),
        Linkage::Average => pairs.sum::<f64>() / (a.len() * b.len()) as f64,
    }
}

/// Agglomerative clustering by exhaustive search. Each step scans every
/// cluster pair for the smallest distance; equal distances go to the pair
/// whose smallest members are lexicographically smallest. Returns the
/// partition after all merges within each threshold, clusters sorted by
/// smallest member.
pub fn agglomerate(points: &[[f64; 3]], linkage: Linkage, thresholds: &[f64]) -> Vec<Vec<Vec<usize>>> {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    for &t in thresholds {
        loop {
            let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let d = linkage_distance(points, &clusters[a], &clusters[b], linkage);
                    let key = {
                        let (x, y) = (clusters[a][0], clusters[b][0]);
                        (x.min(y), x.max(y))
                    };
                    let better = match best {
                        None => true,
                        Some((bd, bk, _, _)) => d < bd || (d == bd && key < bk),
                    };
                    if better {
                        best = Some((d, key, a, b));
                    }
                }
            }
            match best {
                Some((d, _, a, b)) if d <= t => {
                    let moved = clusters.remove(b);
                    clusters[a].extend(moved);
                    clusters[a].sort_unstable();
                }
                _ => break,
            }
        }
        let mut snapshot = clusters.clone();
        snapshot.sort_by_key(|c| c[0]);
        out.push(snapshot);
    }
    out
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Ids of the `k` items most similar to `query`, best first, ties by id.
pub fn top_k(query: &[f64], items: &[(String, Vec<f64>)], k: usize) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = items.iter().map(|(id, v)| (cosine(query, v), id.as_str())).collect();
    // selection sort: plain and independent of the library's comparator
    let mut out = Vec::new();
    while out.len() < k && !scored.is_empty() {
        let mut best = 0;
        for i in 1..scored.len() {
            let (s, id) = scored[i];
            let (bs, bid) = scored[best];
            if s > bs || (s == bs && id < bid) {
                best = i;
            }
        }
        out.push(scored.remove(best).1.to_string());
    }
    out
}

/// Hands out `k` descents one at a time in rounds. Each round visits trees
/// from most to fewest leaves (ties by position) and gives one descent to
/// every tree that still has an unvisited leaf.
pub fn round_robin_quotas(leaf_counts: &[usize], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..leaf_counts.len()).collect();
    order.sort_by(|&a, &b| leaf_counts[b].cmp(&leaf_counts[a]).then(a.cmp(&b)));
    let mut quotas = vec![0; leaf_counts.len()];
    let mut left = k;
    loop {
        let mut gave = false;
        for &i in &order {
            if left == 0 {
                return quotas;
            }
            if quotas[i] < leaf_counts[i] {
                quotas[i] += 1;
                left -= 1;
                gave = true;
            }
        }
        if !gave {
            return quotas;
        }
    }
}
