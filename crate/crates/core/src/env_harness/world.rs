//! Seeded synthetic worlds with gold-labelled queries.
//!
//! Regions are equal-width strips along x, side by side. Nodes are laid out
//! as a random exploration walk through each region in turn, so node ids
//! (`r00-0000`, `r00-0001`, ...) follow the walk and region 0 sorts first.
//! Most nodes get a scenery caption from their region; a few are replaced
//! by explicit targets and by the vendor and decoy places of implicit-query
//! families.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{self, RegionSpec};
use super::{GoldQuery, HarnessError};
use crate::retrieval::{Query, QueryKind};
use crate::topo_map::{MapNode, NodeId, Pose, TopologicalMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgePolicy {
    /// Consecutive nodes of the walk are connected.
    ExplorationChain,
    /// Every pair within `radius` meters is connected.
    ProximityRadius { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub seed: u64,
    pub node_count: usize,
    /// Total width along x in meters; each region is `extent / regions` wide
    /// and as deep.
    pub extent: f64,
    pub regions: Vec<RegionSpec>,
    pub edge_policy: EdgePolicy,
    #[serde(default = "default_targets")]
    pub explicit_targets: usize,
    #[serde(default = "default_families")]
    pub implicit_families: usize,
}

fn default_targets() -> usize {
    6
}

fn default_families() -> usize {
    catalog::FAMILIES.len()
}

impl WorldSpec {
    /// `region_count` built-in regions, 10 m of width per 25 nodes.
    pub fn standard(seed: u64, node_count: usize, region_count: usize) -> Self {
        let regions: Vec<RegionSpec> = catalog::builtin_regions().into_iter().take(region_count).collect();
        let per_region = (node_count as f64 / region_count.max(1) as f64).max(1.0);
        let width = 10.0 * (per_region / 25.0).sqrt().max(1.0);
        WorldSpec {
            seed,
            node_count,
            extent: width * region_count as f64,
            regions,
            edge_policy: EdgePolicy::ExplorationChain,
            explicit_targets: default_targets(),
            implicit_families: default_families(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidSpec(m.to_string()));
        if self.node_count == 0 {
            return bad("node_count must be at least 1");
        }
        if self.regions.is_empty() {
            return bad("at least one region is required");
        }
        if !(self.extent.is_finite() && self.extent > 0.0) {
            return bad("extent must be positive");
        }
        if self.regions.iter().any(|r| r.scenery.is_empty() || r.label.trim().is_empty()) {
            return bad("every region needs a label and scenery");
        }
        let labels: BTreeSet<&str> = self.regions.iter().map(|r| r.label.as_str()).collect();
        if labels.len() != self.regions.len() {
            return bad("region labels must be distinct");
        }
        if self.explicit_targets > catalog::TARGETS.len() {
            return bad("more explicit targets than the catalog holds");
        }
        if self.implicit_families > catalog::FAMILIES.len() {
            return bad("more implicit families than the catalog holds");
        }
        if let EdgePolicy::ProximityRadius { radius } = self.edge_policy {
            if !(radius.is_finite() && radius > 0.0) {
                return bad("proximity radius must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub map: TopologicalMap,
    pub queries: Vec<GoldQuery>,
}

struct Walker {
    x0: f64,
    width: f64,
    pos: (f64, f64),
    step: f64,
}

impl Walker {
    fn advance(&mut self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let len = self.step * rng.gen_range(0.5..1.5);
        let reflect = |v: f64, lo: f64, hi: f64| {
            let v = if v < lo { 2.0 * lo - v } else { v };
            let v = if v > hi { 2.0 * hi - v } else { v };
            v.clamp(lo, hi)
        };
        let x = reflect(self.pos.0 + len * angle.cos(), self.x0, self.x0 + self.width);
        let y = reflect(self.pos.1 + len * angle.sin(), 0.0, self.width);
        self.pos = (x, y);
        self.pos
    }
}

pub fn generate_world(spec: &WorldSpec) -> Result<World, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let regions = spec.regions.len();
    let width = spec.extent / regions as f64;

    // Nodes per region, as even as possible with the first regions larger.
    let counts: Vec<usize> = (0..regions)
        .map(|r| spec.node_count / regions + usize::from(r < spec.node_count % regions))
        .collect();

    let mut ids = Vec::with_capacity(spec.node_count);
    let mut poses = Vec::with_capacity(spec.node_count);
    let mut captions = Vec::with_capacity(spec.node_count);
    for (r, &count) in counts.iter().enumerate() {
        let x0 = width * r as f64;
        let mut walker = Walker {
            x0,
            width,
            pos: (x0 + width / 2.0, width / 2.0),
            step: width / (count.max(1) as f64).sqrt(),
        };
        for seq in 0..count {
            let (x, y) = if seq == 0 { walker.pos } else { walker.advance(&mut rng) };
            let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            ids.push(NodeId(format!("r{r:02}-{seq:04}")));
            poses.push(Pose::new(x, y, 0.0, yaw).expect("walk stays finite"));
            let scenery = &spec.regions[r].scenery;
            captions.push(scenery[rng.gen_range(0..scenery.len())].clone());
        }
    }

    // Special places, in slot order: targets first, then whole families.
    let mut slots: Vec<usize> = (0..spec.node_count).collect();
    slots.shuffle(&mut rng);
    let mut slots = slots.into_iter();
    let mut queries = Vec::new();

    let mut targets: Vec<&(&str, &str)> = catalog::TARGETS.iter().collect();
    targets.shuffle(&mut rng);
    for (i, (caption, object)) in targets.into_iter().take(spec.explicit_targets).enumerate() {
        let Some(slot) = slots.next() else { break };
        captions[slot] = caption.to_string();
        let template = catalog::EXPLICIT_TEMPLATES[rng.gen_range(0..catalog::EXPLICIT_TEMPLATES.len())];
        let text = catalog::fill(template, &[("object", object)]);
        queries.push(GoldQuery {
            id: format!("explicit-{i:02}"),
            query: Query::new(text, QueryKind::Explicit).expect("template text is nonempty"),
            gold_leaves: [ids[slot].clone()].into(),
            gold_terms: Vec::new(),
        });
    }

    let mut families: Vec<&catalog::Family> = catalog::FAMILIES.iter().collect();
    families.shuffle(&mut rng);
    for family in families.into_iter().take(spec.implicit_families) {
        if slots.len() < 1 + family.decoys.len() {
            break;
        }
        let vendor = slots.next().expect("checked length");
        captions[vendor] = family.vendor.to_string();
        for decoy in family.decoys {
            captions[slots.next().expect("checked length")] = decoy.to_string();
        }
        for (i, text) in catalog::family_queries(family).into_iter().enumerate() {
            queries.push(GoldQuery {
                id: format!("implicit-{}-{i}", family.name),
                query: Query::new(text, QueryKind::Implicit).expect("template text is nonempty"),
                gold_leaves: [ids[vendor].clone()].into(),
                gold_terms: Vec::new(),
            });
        }
    }

    let labels: Vec<String> = spec.regions.iter().map(|r| r.label.clone()).collect();
    for (i, text) in catalog::GLOBAL_QUERIES.iter().enumerate() {
        queries.push(GoldQuery {
            id: format!("global-{i:02}"),
            query: Query::new(*text, QueryKind::Global).expect("nonempty"),
            gold_leaves: BTreeSet::new(),
            gold_terms: labels.clone(),
        });
    }

    let mut map = TopologicalMap::new();
    for ((id, pose), caption) in ids.iter().zip(&poses).zip(captions) {
        map.add_node(MapNode::new(id.as_str(), *pose, caption))
            .expect("generated nodes are valid");
    }
    match spec.edge_policy {
        EdgePolicy::ExplorationChain => {
            for w in ids.windows(2) {
                map.add_edge(&w[0], &w[1], None).expect("walk edges are valid");
            }
        }
        EdgePolicy::ProximityRadius { radius } => {
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    if poses[i].distance(&poses[j]) <= radius {
                        map.add_edge(&ids[i], &ids[j], None).expect("proximity edges are valid");
                    }
                }
            }
        }
    }
    queries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(World { map, queries })
}
