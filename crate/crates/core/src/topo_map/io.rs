//! Line-delimited JSON map files.
//!
//! ```text
//! {"format":"erag-map","version":1}
//! {"kind":"node","id":"A","x":0.0,"y":0.0,"z":0.0,"yaw":0.0,"caption":"a red chair"}
//! {"kind":"edge","a":"A","b":"B","cost":5.0}
//! ```
//!
//! Canonical output sorts nodes by id, then edges by `(a, b)`, and writes
//! every number rounded to 9 significant digits.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MapError, MapNode, NodeId, Pose, TopologicalMap};
use crate::numfmt::round_sig9;

pub const MAP_FORMAT: &str = "erag-map";
pub const MAP_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Node {
        id: NodeId,
        x: f64,
        y: f64,
        z: f64,
        yaw: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image_ref: Option<String>,
        caption: String,
    },
    Edge {
        a: NodeId,
        b: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cost: Option<f64>,
    },
}

fn parse_error(line: usize, message: impl Into<String>) -> MapError {
    MapError::Parse {
        line,
        message: message.into(),
    }
}

fn at_line(line: usize, err: MapError) -> MapError {
    parse_error(line, err.to_string())
}

pub fn load_map<R: BufRead>(reader: R) -> Result<TopologicalMap, MapError> {
    let mut header_seen = false;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_error(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            let header: Header = serde_json::from_str(&line)
                .map_err(|e| parse_error(lineno, format!("bad header: {e}")))?;
            if header.format != MAP_FORMAT {
                return Err(parse_error(lineno, format!("format `{}` is not `{MAP_FORMAT}`", header.format)));
            }
            if header.version != MAP_VERSION {
                return Err(parse_error(lineno, format!("unsupported version {}", header.version)));
            }
            header_seen = true;
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| parse_error(lineno, e.to_string()))?;
        match record {
            Record::Node { .. } => nodes.push((lineno, record)),
            Record::Edge { .. } => edges.push((lineno, record)),
        }
    }
    if !header_seen {
        return Err(parse_error(0, "missing header"));
    }

    let mut map = TopologicalMap::new();
    for (lineno, record) in nodes {
        if let Record::Node { id, x, y, z, yaw, image_ref, caption } = record {
            let pose = Pose::new(x, y, z, yaw).map_err(|reason| {
                at_line(lineno, MapError::InvalidPose { id: id.clone(), reason })
            })?;
            map.add_node(MapNode { id, pose, image_ref, caption })
                .map_err(|e| at_line(lineno, e))?;
        }
    }
    for (lineno, record) in edges {
        if let Record::Edge { a, b, cost } = record {
            map.add_edge(&a, &b, cost).map_err(|e| at_line(lineno, e))?;
        }
    }
    Ok(map)
}

pub fn save_map<W: Write>(map: &TopologicalMap, mut out: W) -> std::io::Result<()> {
    let header = Header {
        format: MAP_FORMAT.into(),
        version: MAP_VERSION,
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for node in map.nodes() {
        let record = Record::Node {
            id: node.id.clone(),
            x: round_sig9(node.pose.x),
            y: round_sig9(node.pose.y),
            z: round_sig9(node.pose.z),
            yaw: round_sig9(node.pose.yaw),
            image_ref: node.image_ref.clone(),
            caption: node.caption.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    for edge in map.edges() {
        let record = Record::Edge {
            a: edge.a,
            b: edge.b,
            cost: Some(round_sig9(edge.cost)),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

/// SHA-256 over the canonical serialization, hex encoded.
pub fn map_digest(map: &TopologicalMap) -> String {
    let mut buf = Vec::new();
    save_map(map, &mut buf).expect("in-memory write");
    hex::encode(Sha256::digest(&buf))
}

impl TopologicalMap {
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        save_map(self, &mut buf).expect("in-memory write");
        buf
    }

    /// The map as it reads back from its own canonical file.
    pub fn canonicalized(&self) -> TopologicalMap {
        load_map(self.to_canonical_bytes().as_slice()).expect("canonical output parses")
    }
}
