//! Agglomerative clustering cut at a schedule of distance thresholds.
//!
//! Points are indexed in id order; a cluster is named by its smallest member
//! index. Each step merges the closest pair of clusters, and equal distances
//! go to the pair with the smallest `(name, name)`. Merging continues while
//! the closest distance is within the last threshold. The partition for a
//! threshold `t` is the state after every merge at distance `<= t`.
//!
//! Cluster distances are maintained with the Lance-Williams updates, and
//! each cluster caches its nearest neighbour so a merge only rescans the
//! clusters whose neighbour disappeared.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

/// Clusters as sorted member lists, ordered by smallest member.
pub type Partition = Vec<Vec<usize>>;

pub fn euclidean(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Neighbor {
    dist: f64,
    other: usize,
}

struct State {
    linkage: Linkage,
    /// Condensed upper-triangle storage indexed by slot.
    dist: Vec<f64>,
    n: usize,
    active: Vec<bool>,
    /// Smallest member index of the cluster in each slot (its name).
    name: Vec<usize>,
    size: Vec<usize>,
    members: Vec<Vec<usize>>,
    nearest: Vec<Option<Neighbor>>,
}

impl State {
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[self.idx(i, j)]
    }

    fn pair_key(&self, i: usize, j: usize) -> (usize, usize) {
        let (a, b) = (self.name[i], self.name[j]);
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Strict order on candidate merges: distance, then pair names.
    fn better(&self, d1: f64, key1: (usize, usize), d2: f64, key2: (usize, usize)) -> bool {
        d1 < d2 || (d1 == d2 && key1 < key2)
    }

    fn recompute_nearest(&mut self, i: usize) {
        let mut best: Option<Neighbor> = None;
        for j in 0..self.n {
            if j == i || !self.active[j] {
                continue;
            }
            let d = self.d(i, j);
            let take = match best {
                None => true,
                Some(b) => self.better(d, self.pair_key(i, j), b.dist, self.pair_key(i, b.other)),
            };
            if take {
                best = Some(Neighbor { dist: d, other: j });
            }
        }
        self.nearest[i] = best;
    }

    fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.n {
            if !self.active[i] {
                continue;
            }
            if let Some(nb) = self.nearest[i] {
                let take = match best {
                    None => true,
                    Some((bi, bj, bd)) => self.better(nb.dist, self.pair_key(i, nb.other), bd, self.pair_key(bi, bj)),
                };
                if take {
                    best = Some((i, nb.other, nb.dist));
                }
            }
        }
        best
    }

    /// Merges slot `j` into slot `i`.
    fn merge(&mut self, i: usize, j: usize) {
        let (si, sj) = (self.size[i] as f64, self.size[j] as f64);
        for k in 0..self.n {
            if k == i || k == j || !self.active[k] {
                continue;
            }
            let (dik, djk) = (self.d(i, k), self.d(j, k));
            let updated = match self.linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (si * dik + sj * djk) / (si + sj),
            };
            let at = self.idx(i, k);
            self.dist[at] = updated;
        }
        self.active[j] = false;
        self.size[i] += self.size[j];
        self.name[i] = self.name[i].min(self.name[j]);
        let moved = std::mem::take(&mut self.members[j]);
        self.members[i].extend(moved);
        self.members[i].sort_unstable();

        self.recompute_nearest(i);
        for k in 0..self.n {
            if k == i || !self.active[k] {
                continue;
            }
            match self.nearest[k] {
                Some(nb) if nb.other == i || nb.other == j => self.recompute_nearest(k),
                Some(nb) => {
                    let d = self.d(k, i);
                    if self.better(d, self.pair_key(k, i), nb.dist, self.pair_key(k, nb.other)) {
                        self.nearest[k] = Some(Neighbor { dist: d, other: i });
                    }
                }
                None => self.recompute_nearest(k),
            }
        }
    }

    fn partition(&self) -> Partition {
        let mut clusters: Partition = (0..self.n)
            .filter(|&i| self.active[i])
            .map(|i| self.members[i].clone())
            .collect();
        clusters.sort_by_key(|c| c[0]);
        clusters
    }
}

/// One partition per threshold, each coarser than or equal to the previous.
pub fn agglomerate(points: &[[f64; 3]], linkage: Linkage, thresholds: &[f64]) -> Vec<Partition> {
    let n = points.len();
    if n == 0 {
        return vec![Vec::new(); thresholds.len()];
    }
    let mut dist = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dist.push(euclidean(&points[i], &points[j]));
        }
    }
    let mut state = State {
        linkage,
        dist,
        n,
        active: vec![true; n],
        name: (0..n).collect(),
        size: vec![1; n],
        members: (0..n).map(|i| vec![i]).collect(),
        nearest: vec![None; n],
    };
    for i in 0..n {
        state.recompute_nearest(i);
    }

    let mut out = Vec::with_capacity(thresholds.len());
    let mut band = 0;
    while band < thresholds.len() {
        match state.closest_pair() {
            Some((i, j, d)) if d <= thresholds[band] => {
                // keep the surviving slot stable: the one with the smaller name
                let (keep, drop) = if state.name[i] < state.name[j] { (i, j) } else { (j, i) };
                state.merge(keep, drop);
            }
            _ => {
                out.push(state.partition());
                band += 1;
            }
        }
    }
    out
}

/// Splits `items` into groups of at most `max` by recursive farthest-point
/// bisection. Group order follows the input order of each group's first item.
pub fn bisect_groups(items: &[usize], points: &[[f64; 3]], max: usize) -> Vec<Vec<usize>> {
    assert!(max >= 2);
    if items.len() <= max {
        return vec![items.to_vec()];
    }
    let mut far: Option<(f64, usize, usize)> = None;
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            let d = euclidean(&points[items[a]], &points[items[b]]);
            if far.is_none_or(|(fd, _, _)| d > fd) {
                far = Some((d, a, b));
            }
        }
    }
    let (fd, pa, pb) = far.expect("at least two items");
    let (left, right): (Vec<usize>, Vec<usize>) = if fd == 0.0 {
        let mid = items.len() / 2;
        (items[..mid].to_vec(), items[mid..].to_vec())
    } else {
        let (p, q) = (points[items[pa]], points[items[pb]]);
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (pos, &it) in items.iter().enumerate() {
            let to_right = pos == pb || (pos != pa && euclidean(&points[it], &q) < euclidean(&points[it], &p));
            if to_right {
                right.push(it);
            } else {
                left.push(it);
            }
        }
        (left, right)
    };
    let mut groups = bisect_groups(&left, points, max);
    groups.extend(bisect_groups(&right, points, max));
    groups.sort_by_key(|g| items.iter().position(|x| *x == g[0]));
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xy: &[(f64, f64)]) -> Vec<[f64; 3]> {
        xy.iter().map(|&(x, y)| [x, y, 0.0]).collect()
    }

    #[test]
    fn four_point_fixture() {
        let p = pts(&[(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]);
        let parts = agglomerate(&p, Linkage::Average, &[2.0, 20.0]);
        assert_eq!(parts[0], vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(parts[1], vec![vec![0, 1, 2, 3]]);
    }

    #[test]
    fn coincident_points_merge_at_zero() {
        let p = pts(&[(1.0, 1.0), (1.0, 1.0)]);
        assert_eq!(agglomerate(&p, Linkage::Complete, &[0.5]), vec![vec![vec![0, 1]]]);
    }

    #[test]
    fn complete_linkage_ties_follow_pair_names() {
        // d(0,1) = d(1,2) = 1; merging (0,1) first leaves 2 alone under complete linkage
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        let parts = agglomerate(&p, Linkage::Complete, &[1.5]);
        assert_eq!(parts[0], vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn single_point_and_empty() {
        assert_eq!(agglomerate(&pts(&[(0.0, 0.0)]), Linkage::Average, &[1.0, 2.0]), vec![vec![vec![0]]; 2]);
        assert_eq!(agglomerate(&[], Linkage::Average, &[1.0]), vec![Vec::<Vec<usize>>::new()]);
    }

    #[test]
    fn bisection_bounds_group_size() {
        let p: Vec<[f64; 3]> = (0..23).map(|i| [i as f64, (i % 3) as f64, 0.0]).collect();
        let items: Vec<usize> = (0..23).collect();
        let groups = bisect_groups(&items, &p, 4);
        assert!(groups.iter().all(|g| !g.is_empty() && g.len() <= 4));
        let mut all: Vec<usize> = groups.concat();
        all.sort_unstable();
        assert_eq!(all, items);
        // spatially coherent: the two ends never share a group
        assert!(!groups.iter().any(|g| g.contains(&0) && g.contains(&22)));
    }

    #[test]
    fn bisection_of_coincident_points_halves() {
        let p = vec![[0.0; 3]; 5];
        let groups = bisect_groups(&[0, 1, 2, 3, 4], &p, 2);
        assert_eq!(groups, vec![vec![0, 1], vec![2], vec![3, 4]]);
    }
}
