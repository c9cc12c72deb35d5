//! Line-delimited JSON forest files.
//!
//! ```text
//! {"format":"erag-forest","version":1,"map_digest":"<sha256 hex>"}
//! {"id":"C01/00000","level":1,"children":["L/a","L/b"],"x":0.0,"y":0.5,"z":0.0,"yaw":0.0,"summary":"..."}
//! {"id":"L/a","level":0,"parent":"C01/00000","map_node":"a","x":0.0,"y":0.0,"z":0.0,"yaw":0.0,"summary":"a red chair"}
//! ```
//!
//! Nodes are written in id order with full-precision numbers so a load
//! reproduces the forest exactly. Loading validates every invariant.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ForestError, ForestNode, ForestNodeId, SemanticForest};
use crate::topo_map::{NodeId, Pose};

pub const FOREST_FORMAT: &str = "erag-forest";
pub const FOREST_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    map_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: ForestNodeId,
    level: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<ForestNodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<ForestNodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map_node: Option<NodeId>,
    x: f64,
    y: f64,
    z: f64,
    yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    summary: Option<String>,
}

fn parse_error(line: usize, message: impl Into<String>) -> ForestError {
    ForestError::Parse {
        line,
        message: message.into(),
    }
}

pub fn save_forest<W: Write>(forest: &SemanticForest, mut out: W) -> std::io::Result<()> {
    let header = Header {
        format: FOREST_FORMAT.into(),
        version: FOREST_VERSION,
        map_digest: forest.map_digest().to_string(),
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for n in forest.nodes() {
        let record = Record {
            id: n.id.clone(),
            level: n.level,
            parent: n.parent.clone(),
            children: n.children.clone(),
            map_node: n.map_node.clone(),
            x: n.centroid.x,
            y: n.centroid.y,
            z: n.centroid.z,
            yaw: n.centroid.yaw,
            summary: n.summary.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    out.flush()
}

pub fn load_forest<R: BufRead>(reader: R) -> Result<SemanticForest, ForestError> {
    let mut digest = None;
    let mut nodes = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_error(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if digest.is_none() {
            let header: Header =
                serde_json::from_str(&line).map_err(|e| parse_error(lineno, format!("bad header: {e}")))?;
            if header.format != FOREST_FORMAT {
                return Err(parse_error(lineno, format!("format `{}` is not `{FOREST_FORMAT}`", header.format)));
            }
            if header.version != FOREST_VERSION {
                return Err(parse_error(lineno, format!("unsupported version {}", header.version)));
            }
            digest = Some(header.map_digest);
            continue;
        }
        let r: Record = serde_json::from_str(&line).map_err(|e| parse_error(lineno, e.to_string()))?;
        let centroid = Pose::new(r.x, r.y, r.z, r.yaw).map_err(|reason| parse_error(lineno, reason))?;
        if nodes.contains_key(&r.id) {
            return Err(parse_error(lineno, format!("duplicate forest node id `{}`", r.id)));
        }
        nodes.insert(
            r.id.clone(),
            ForestNode {
                id: r.id,
                level: r.level,
                children: r.children,
                parent: r.parent,
                map_node: r.map_node,
                centroid,
                summary: r.summary,
            },
        );
    }
    let digest = digest.ok_or_else(|| parse_error(0, "missing header"))?;
    let forest = SemanticForest::from_parts(nodes, digest);
    forest.validate()?;
    Ok(forest)
}
