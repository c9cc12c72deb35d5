//! End-to-end runs of the `erag` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use erag_core::env_harness::{ingest_dataset, GoldQuery};
use erag_core::retrieval::{render_chain, QueryKind};
use erag_core::semantic_forest::{load_forest, ForestNodeId};
use serde_json::Value;
use tempfile::TempDir;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn erag(args: &[&str]) -> Out {
    let out = Command::new(env!("CARGO_BIN_EXE_erag")).args(args).output().unwrap();
    Out {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A generated world with a built forest.
struct Fixture {
    _dir: TempDir,
    map: PathBuf,
    forest: PathBuf,
    queries: Vec<GoldQuery>,
}

fn fixture(nodes: usize, seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let world = dir.path().join("world");
    let seed = seed.to_string();
    let nodes = nodes.to_string();
    let gen = erag(&["gen-world", "--nodes", &nodes, "--seed", &seed, "--out", s(&world)]);
    assert_eq!(gen.code, 0, "{}", gen.stderr);
    let map = world.join("map.jsonl");
    let forest = dir.path().join("forest.jsonl");
    let build = erag(&["build", "--map", s(&map), "--forest", s(&forest)]);
    assert_eq!(build.code, 0, "{}", build.stderr);
    let (_, queries) = ingest_dataset(&world).unwrap();
    Fixture {
        _dir: dir,
        map,
        forest,
        queries: queries.unwrap(),
    }
}

impl Fixture {
    fn run(&self, cmd: &str, extra: &[&str]) -> Out {
        let mut args = vec![cmd, "--map", s(&self.map), "--forest", s(&self.forest)];
        args.extend_from_slice(extra);
        erag(&args)
    }

    fn first(&self, kind: QueryKind) -> &GoldQuery {
        self.queries.iter().find(|q| q.query.kind() == kind).unwrap()
    }
}

fn json_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).expect("stdout line is JSON")).collect()
}

#[test]
fn build_is_deterministic_and_reports_levels() {
    let f = fixture(200, 4);
    let first = fs::read(&f.forest).unwrap();
    let again = f.forest.with_file_name("again.jsonl");
    let out = erag(&["build", "--map", s(&f.map), "--forest", s(&again)]);
    assert_eq!(out.code, 0);
    assert_eq!(fs::read(&again).unwrap(), first);

    let report = &json_lines(&out.stdout)[0];
    let schedule = report["threshold_schedule"].as_array().unwrap().len() as u64;
    let depth = report["depth"].as_u64().unwrap();
    assert!(depth >= 2 && depth <= schedule + 1, "depth {depth}, schedule {schedule}");
    assert_eq!(report["map_nodes"], 200);
    assert!(report["summarizer_calls"].as_u64().unwrap() > 0);
}

#[test]
fn missing_map_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = erag(&["build", "--map", s(&dir.path().join("nope.jsonl")), "--forest", s(&dir.path().join("f.jsonl"))]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("map not found"), "{}", out.stderr);
    assert!(out.stdout.is_empty());
}

#[test]
fn explicit_query_yields_a_gold_waypoint() {
    let f = fixture(80, 2);
    let q = f.first(QueryKind::Explicit);
    let out = f.run("navigate", &[q.query.text(), "--kind", "explicit"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rec = &json_lines(&out.stdout)[0];
    assert_eq!(rec["result"]["type"], "navigation");
    let node = rec["result"]["map_node"].as_str().unwrap();
    assert!(q.gold_leaves.iter().any(|g| g.as_str() == node));
    assert!(rec["elapsed_ms"].is_number());
}

#[test]
fn rag_retrieval_returns_k_leaves() {
    let f = fixture(80, 2);
    let out = f.run("retrieve", &["find the red umbrella", "--method", "rag", "--k", "10"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rec = &json_lines(&out.stdout)[0];
    assert_eq!(rec["retrieved"].as_array().unwrap().len(), 10);
    assert_eq!(rec["method"], "rag");
}

#[test]
fn global_navigation_is_a_usage_error() {
    let f = fixture(40, 1);
    let out = f.run("navigate", &["describe this place", "--kind", "global"]);
    assert_eq!(out.code, 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn answer_and_trace_round_trip_through_inspect() {
    let f = fixture(60, 3);
    let trace = f.forest.with_file_name("trace.jsonl");
    let q = f.first(QueryKind::Global);
    let out = f.run("answer", &[q.query.text(), "--trace", s(&trace)]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rec = &json_lines(&out.stdout)[0];
    assert!(!rec["result"]["answer"].as_str().unwrap().is_empty());
    let dump = erag(&["inspect", "--trace", s(&trace)]);
    assert_eq!(dump.code, 0);
    assert_eq!(dump.stdout.matches("descent ").count(), 10);
}

#[test]
fn inspect_dumps_trees_and_chains() {
    let f = fixture(50, 6);
    let forest = load_forest(fs::read(&f.forest).unwrap().as_slice()).unwrap();

    let all = f.run("inspect", &[]);
    assert_eq!(all.code, 0);
    assert_eq!(all.stdout.lines().count(), forest.len());

    let root = forest.roots()[0].to_string();
    let tree = f.run("inspect", &[&root]);
    let subtree = forest.nodes().filter(|n| forest.root_of(&n.id).unwrap() == forest.roots()[0]).count();
    assert_eq!(tree.stdout.lines().count(), subtree);
    assert!(tree.stdout.starts_with(&root));

    let leaf = forest.leaves().next().unwrap().id.clone();
    let chain = f.run("inspect", &[leaf.as_str()]);
    assert_eq!(chain.stdout.trim_end(), render_chain(&forest, &leaf).unwrap().rendering);
    let by_map_id = f.run("inspect", &[leaf.as_str().trim_start_matches("L/")]);
    assert_eq!(by_map_id.stdout, chain.stdout);

    let bogus = f.run("inspect", &["C99/00000"]);
    assert_eq!(bogus.code, 2);
    assert!(bogus.stderr.contains("unknown forest node"));
    assert!(forest.node(&ForestNodeId::from("C99/00000")).is_none());
}

#[test]
fn stale_forest_is_refused() {
    let a = fixture(40, 1);
    let b = fixture(40, 2);
    let out = erag(&["navigate", "--map", s(&b.map), "--forest", s(&a.forest), "find the red umbrella"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("digest"), "{}", out.stderr);
    assert!(out.stdout.is_empty());
}

#[test]
fn unreachable_waypoint_is_a_method_failure() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("map.jsonl");
    fs::write(
        &map,
        "{\"format\":\"erag-map\",\"version\":1}\n\
         {\"kind\":\"node\",\"id\":\"a\",\"x\":0.0,\"y\":0.0,\"z\":0.0,\"yaw\":0.0,\"caption\":\"a desk lamp\"}\n\
         {\"kind\":\"node\",\"id\":\"b\",\"x\":1.0,\"y\":0.0,\"z\":0.0,\"yaw\":0.0,\"caption\":\"a red umbrella\"}\n",
    )
    .unwrap();
    let forest = dir.path().join("f.jsonl");
    assert_eq!(erag(&["build", "--map", s(&map), "--forest", s(&forest)]).code, 0);
    let out = erag(&["navigate", "--map", s(&map), "--forest", s(&forest), "find the red umbrella", "--start", "a"]);
    assert_eq!(out.code, 1, "{}", out.stderr);
    let rec = &json_lines(&out.stdout)[0];
    assert!(rec["error"].as_str().unwrap().contains("unreachable"));
}

#[test]
fn eval_prints_a_three_method_table_and_only_records_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = erag(&["eval", "--nodes", "60", "--seed", "5", "--out", s(dir.path())]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    for name in ["semantic_match", "rag", "embodied_rag"] {
        assert!(out.stderr.contains(name));
    }
    let recs = json_lines(&out.stdout);
    assert_eq!(recs.len() % 3, 0);
    assert!(recs.iter().all(|r| r["success"].is_boolean()));
    assert!(dir.path().join("report-k10.json").exists());
    assert!(!dir.path().join("k_series.csv").exists());
}

#[test]
fn k_sweep_writes_four_rows_per_method_and_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = erag(&["eval", "--nodes", "60", "--k-sweep", "1,2,5,10", "--out", s(dir.path())]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let csv = fs::read_to_string(dir.path().join("k_series.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4 * 3 * 3);
    let embodied_implicit = rows.iter().filter(|r| r.contains(",embodied_rag,implicit,")).count();
    assert_eq!(embodied_implicit, 4);
}

#[test]
fn dataset_without_queries_is_a_usage_error() {
    let f = fixture(30, 1);
    let out = erag(&["eval", "--dataset", s(&f.map)]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("no queries"), "{}", out.stderr);
}

#[test]
fn config_file_sets_defaults_that_flags_override() {
    let f = fixture(60, 7);
    let cfg = f.forest.with_file_name("erag.toml");
    fs::write(
        &cfg,
        format!("map = {:?}\nforest = {:?}\nk = 3\n", s(&f.map), s(&f.forest)),
    )
    .unwrap();
    let from_file = erag(&["retrieve", "--config", s(&cfg), "find the red umbrella", "--method", "rag"]);
    assert_eq!(from_file.code, 0, "{}", from_file.stderr);
    assert_eq!(json_lines(&from_file.stdout)[0]["retrieved"].as_array().unwrap().len(), 3);
    let flagged = erag(&["retrieve", "--config", s(&cfg), "find the red umbrella", "--method", "rag", "--k", "5"]);
    assert_eq!(json_lines(&flagged.stdout)[0]["retrieved"].as_array().unwrap().len(), 5);

    fs::write(&cfg, "colour = \"blue\"\n").unwrap();
    assert_eq!(erag(&["retrieve", "--config", s(&cfg), "x"]).code, 2);
}

#[test]
fn bad_flags_exit_with_usage_status() {
    assert_eq!(erag(&["retrieve"]).code, 2);
    assert_eq!(erag(&["eval", "--method", "telepathy"]).code, 2);
    assert_eq!(erag(&["--help"]).code, 0);
}
