//! Dataset directories: a map file plus an optional gold-query sidecar.
//!
//! ```text
//! <dir>/map.jsonl       map file
//! <dir>/queries.jsonl   one gold query per line, e.g.
//!   {"id":"q1","text":"find the red cup","kind":"explicit","gold_leaves":["n17"]}
//!   {"id":"q2","text":"describe this place","kind":"global","gold_terms":["kitchen"]}
//! ```

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{GoldQuery, HarnessError};
use crate::topo_map::{load_map, save_map, TopologicalMap};

pub const MAP_FILE: &str = "map.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Reads gold queries, checking every gold leaf exists in `map`.
pub fn load_queries<R: BufRead>(reader: R, source: &str, map: &TopologicalMap) -> Result<Vec<GoldQuery>, HarnessError> {
    let parse = |line: usize, message: String| HarnessError::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let q: GoldQuery = serde_json::from_str(&line).map_err(|e| parse(lineno, e.to_string()))?;
        q.validate().map_err(|m| parse(lineno, m))?;
        if let Some(missing) = q.gold_leaves.iter().find(|id| !map.contains(id)) {
            return Err(parse(lineno, format!("gold leaf `{missing}` is not a map node")));
        }
        if !ids.insert(q.id.clone()) {
            return Err(parse(lineno, format!("duplicate query id `{}`", q.id)));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn save_queries<W: Write>(queries: &[GoldQuery], mut out: W) -> std::io::Result<()> {
    for q in queries {
        writeln!(out, "{}", serde_json::to_string(q)?)?;
    }
    out.flush()
}

/// Loads a dataset directory, or a bare map file with no queries.
pub fn ingest_dataset(path: &Path) -> Result<(TopologicalMap, Option<Vec<GoldQuery>>), HarnessError> {
    let (map_path, sidecar) = if path.is_dir() {
        (path.join(MAP_FILE), Some(path.join(QUERIES_FILE)))
    } else {
        (path.to_path_buf(), None)
    };
    if !map_path.exists() {
        return Err(HarnessError::Io(format!("map not found: {}", map_path.display())));
    }
    let file = File::open(&map_path).map_err(|e| io_err(&map_path, e))?;
    let map = load_map(BufReader::new(file)).map_err(|e| match e {
        crate::topo_map::MapError::Parse { line, message } => HarnessError::Parse {
            path: map_path.display().to_string(),
            line,
            message,
        },
        other => HarnessError::Map(other),
    })?;
    let queries = match sidecar {
        Some(p) if p.exists() => {
            let file = File::open(&p).map_err(|e| io_err(&p, e))?;
            Some(load_queries(BufReader::new(file), &p.display().to_string(), &map)?)
        }
        _ => None,
    };
    Ok((map, queries))
}

/// Writes `map` and `queries` as a dataset directory.
pub fn export_world(dir: &Path, map: &TopologicalMap, queries: &[GoldQuery]) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let map_path = dir.join(MAP_FILE);
    let file = File::create(&map_path).map_err(|e| io_err(&map_path, e))?;
    save_map(map, BufWriter::new(file)).map_err(|e| io_err(&map_path, e))?;
    let q_path = dir.join(QUERIES_FILE);
    let file = File::create(&q_path).map_err(|e| io_err(&q_path, e))?;
    save_queries(queries, BufWriter::new(file)).map_err(|e| io_err(&q_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_harness::{generate_world, WorldSpec};

    #[test]
    fn unknown_gold_leaf_is_a_parse_error() {
        let world = generate_world(&WorldSpec::standard(2, 10, 1)).unwrap();
        let text = "{\"id\":\"a\",\"text\":\"find the cup\",\"kind\":\"explicit\",\"gold_leaves\":[\"r00-0001\"]}\n\
                    {\"id\":\"b\",\"text\":\"find the cup\",\"kind\":\"explicit\",\"gold_leaves\":[\"ghost\"]}\n";
        let err = load_queries(text.as_bytes(), "q.jsonl", &world.map).unwrap_err();
        assert!(matches!(err, HarnessError::Parse { line: 2, ref message, .. } if message.contains("ghost")), "{err}");
    }

    #[test]
    fn export_then_ingest_round_trips() {
        let world = generate_world(&WorldSpec::standard(4, 40, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_world(dir.path(), &world.map, &world.queries).unwrap();
        let (map, queries) = ingest_dataset(dir.path()).unwrap();
        assert_eq!(map.to_canonical_bytes(), world.map.to_canonical_bytes());
        assert_eq!(queries.unwrap(), world.queries);
    }

    #[test]
    fn missing_map_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = ingest_dataset(&dir.path().join("nope.jsonl")).unwrap_err();
        assert!(err.to_string().contains("map not found"));
    }
}
