//! Command implementations.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use erag_core::env_harness::{
    ablate_k, generate_world, ingest_dataset, EvalOptions, EvalReport, GoldQuery, HarnessError, KSeries, WorldSpec,
    export_world,
};
use erag_core::generation::{AgentState, ResultRecord};
use erag_core::llm_gateway::{Gateway, Role};
use erag_core::retrieval::{
    render_chain, DescentTrace, Method, Query, QueryKind, RetrievalResult, RetrievedItems, Retriever,
};
use erag_core::semantic_forest::{
    build_forest, load_forest, save_forest, ForestError, ForestNodeId, SemanticForest, SummarizeOptions,
};
use erag_core::topo_map::{load_map, map_digest, NodeId, TopologicalMap};
use serde::Serialize;

use crate::config::{cache_path_for, ConfigFile, Overrides, RunConfig};
use crate::{Cli, CliError, Command, EvalArgs, GenWorldArgs, InspectArgs, NavigateArgs, QueryArgs};

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::Summarizer { .. } => CliError::Method(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::NoQueries | HarnessError::NoMethods | HarnessError::InvalidK | HarnessError::InvalidSpec(_) => {
                CliError::Usage(e.to_string())
            }
            HarnessError::Forest(f) => f.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn out_err(e: std::io::Error) -> CliError {
    CliError::Method(format!("writing output: {e}"))
}

pub fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let g = cli.global;
    let file = g.config.as_deref().map(ConfigFile::load).transpose()?;
    let k = match &cli.command {
        Command::Retrieve(a) | Command::Answer(a) => a.k,
        Command::Navigate(a) => a.query.k,
        Command::Eval(a) => a.k,
        _ => None,
    };
    let cfg = RunConfig::resolve(
        file,
        Overrides {
            map: g.map,
            forest: g.forest,
            k,
            concurrency: g.concurrency,
            seed: g.seed,
            backend: g.backend.map(Into::into),
        },
    )?;
    match cli.command {
        Command::Build => cmd_build(&cfg, stdout, stderr),
        Command::Retrieve(a) => cmd_retrieve(&cfg, &a, stdout),
        Command::Navigate(a) => cmd_navigate(&cfg, &a, stdout),
        Command::Answer(a) => cmd_answer(&cfg, &a, stdout),
        Command::Eval(a) => cmd_eval(&cfg, &a, stdout, stderr),
        Command::Inspect(a) => cmd_inspect(&cfg, &a, stdout),
        Command::GenWorld(a) => cmd_gen_world(&cfg, &a, stdout),
    }
}

pub fn read_map(path: &Path) -> Result<TopologicalMap, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("map not found: {}", path.display())));
    }
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    load_map(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_forest(path: &Path) -> Result<SemanticForest, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!("forest not found: {}", path.display())));
    }
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    load_forest(BufReader::new(file)).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Loads the map and forest and refuses a forest built from another map.
fn read_bound(cfg: &RunConfig) -> Result<(TopologicalMap, SemanticForest), CliError> {
    let map = read_map(cfg.map_path()?)?;
    let forest = read_forest(cfg.forest_path()?)?;
    forest.check_against(&map)?;
    Ok((map, forest))
}

fn gateway_for(cfg: &RunConfig) -> Result<Gateway, CliError> {
    let cache = cfg.forest.as_deref().map(cache_path_for);
    cfg.gateway(cache.as_deref())
}

fn write_line(stdout: &mut dyn Write, line: &str) -> Result<(), CliError> {
    writeln!(stdout, "{line}").map_err(out_err)
}

#[derive(Debug, Serialize)]
struct BuildReport<'a> {
    forest: String,
    map_digest: &'a str,
    map_nodes: usize,
    forest_nodes: usize,
    level_counts: Vec<usize>,
    depth: usize,
    roots: usize,
    threshold_schedule: Vec<f64>,
    summarizer_calls: usize,
}

fn cmd_build(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let map = read_map(cfg.map_path()?)?;
    let out = cfg.forest_path()?;
    let clustering = cfg.clustering_for(&map);
    let gateway = gateway_for(cfg)?;
    let opts = SummarizeOptions {
        fanout: cfg.concurrency,
        budget: cfg.summary_budget,
    };
    let forest = build_forest(&map, &clustering, &gateway, opts)?;

    let tmp = out.with_extension("jsonl.tmp");
    let file = File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    save_forest(&forest, BufWriter::new(file)).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, out).map_err(|e| io_err(out, e))?;
    if let Some(cache) = gateway.cache() {
        if let Err(e) = cache.compact() {
            let _ = writeln!(stderr, "warning: {e}");
        }
    }

    let report = BuildReport {
        forest: out.display().to_string(),
        map_digest: forest.map_digest(),
        map_nodes: map.node_count(),
        forest_nodes: forest.len(),
        level_counts: forest.level_counts(),
        depth: forest.depth(),
        roots: forest.roots().len(),
        threshold_schedule: clustering.threshold_schedule,
        summarizer_calls: gateway.stats().role(Role::Summarizer).requests,
    };
    write_line(stdout, &serde_json::to_string(&report).expect("report serializes"))
}

fn query_of(a: &QueryArgs, default_kind: QueryKind) -> Result<Query, CliError> {
    Query::new(a.query.clone(), a.kind.unwrap_or(default_kind)).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_traces(path: &Path, traces: &[DescentTrace]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for t in traces {
        writeln!(w, "{}", serde_json::to_string(t).expect("traces serialize")).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Serialize)]
struct RetrieveRecord<'a> {
    query: &'a str,
    kind: QueryKind,
    method: Method,
    k: usize,
    retrieved: Vec<ForestNodeId>,
    #[serde(flatten)]
    items: &'a RetrievedItems,
    select_calls: usize,
}

fn cmd_retrieve(cfg: &RunConfig, a: &QueryArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let query = query_of(a, QueryKind::Explicit)?;
    let (_, forest) = read_bound(cfg)?;
    let gateway = gateway_for(cfg)?;
    let retriever = Retriever::new(&forest, &gateway);
    let result: RetrievalResult = retriever
        .retrieve(&query, a.method, cfg.k)
        .map_err(|e| CliError::Method(e.to_string()))?;
    if let Some(path) = &a.trace {
        write_traces(path, &result.traces)?;
    }
    let record = RetrieveRecord {
        query: query.text(),
        kind: query.kind(),
        method: result.method,
        k: result.k,
        retrieved: result.leaf_ids(),
        items: &result.items,
        select_calls: result.select_calls,
    };
    write_line(stdout, &serde_json::to_string(&record).expect("records serialize"))
}

fn run_and_emit(
    cfg: &RunConfig,
    a: &QueryArgs,
    query: Query,
    start: Option<&str>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let (map, forest) = read_bound(cfg)?;
    let state = match start {
        Some(id) => AgentState::new(&map, NodeId::new(id)).map_err(|e| CliError::Usage(e.to_string()))?,
        None => AgentState::at_first_node(&map).ok_or_else(|| CliError::Input("map has no nodes".into()))?,
    };
    let gateway = gateway_for(cfg)?;
    let retriever = Retriever::new(&forest, &gateway);
    let (record, run) = ResultRecord::capture(&retriever, &map, &query, a.method, cfg.k, &state);
    if let (Some(path), Some(run)) = (&a.trace, &run) {
        write_traces(path, &run.retrieval.traces)?;
    }
    write_line(stdout, &record.to_json_line())?;
    match record.error {
        Some(e) => Err(CliError::Method(e)),
        None => Ok(()),
    }
}

fn cmd_navigate(cfg: &RunConfig, a: &NavigateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let query = query_of(&a.query, QueryKind::Explicit)?;
    if !query.kind().is_navigation() {
        return Err(CliError::Usage(
            "global queries yield answers, not waypoints; use `answer`".into(),
        ));
    }
    run_and_emit(cfg, &a.query, query, a.start.as_deref(), stdout)
}

fn cmd_answer(cfg: &RunConfig, a: &QueryArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let query = query_of(a, QueryKind::Global)?;
    if query.kind().is_navigation() {
        return Err(CliError::Usage(format!(
            "{} queries yield waypoints; use `navigate`",
            query.kind().as_str()
        )));
    }
    run_and_emit(cfg, a, query, None, stdout)
}

fn cmd_eval(cfg: &RunConfig, a: &EvalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let (map, queries): (TopologicalMap, Vec<GoldQuery>) = match &a.dataset {
        Some(path) => {
            let (map, queries) = ingest_dataset(path)?;
            (map, queries.unwrap_or_default())
        }
        None => {
            let world = generate_world(&WorldSpec::standard(cfg.seed, a.nodes, a.regions))?;
            (world.map, world.queries)
        }
    };
    if queries.is_empty() {
        return Err(HarnessError::NoQueries.into());
    }
    let gateway = gateway_for(cfg)?;
    let forest = match &cfg.forest {
        Some(path) if path.exists() => {
            let forest = read_forest(path)?;
            forest.check_against(&map)?;
            forest
        }
        _ => build_forest(
            &map,
            &cfg.clustering_for(&map),
            &gateway,
            SummarizeOptions {
                fanout: cfg.concurrency,
                budget: cfg.summary_budget,
            },
        )?,
    };
    let methods = if a.method.is_empty() { Method::ALL.to_vec() } else { a.method.clone() };
    let ks = if a.k_sweep.is_empty() { vec![cfg.k] } else { a.k_sweep.clone() };
    if ks.contains(&0) {
        return Err(CliError::Usage("k values must be at least 1".into()));
    }
    let opts = EvalOptions {
        concurrency: cfg.concurrency,
    };
    let reports = ablate_k(&map, &forest, &gateway, &queries, &methods, &ks, opts)?;

    for r in &reports {
        stdout.write_all(r.records_jsonl().as_bytes()).map_err(out_err)?;
        writeln!(stderr, "{}", r.table()).map_err(out_err)?;
        writeln!(
            stderr,
            "{} queries in {:.1} ms (mean {:.2} ms, max {:.2} ms)\n",
            r.timing.queries, r.timing.total_ms, r.timing.mean_query_ms, r.timing.max_query_ms
        )
        .map_err(out_err)?;
    }
    let series = (!a.k_sweep.is_empty()).then(|| KSeries::from_reports(&reports));
    if let Some(s) = &series {
        write!(stderr, "{}", s.to_csv()).map_err(out_err)?;
    }
    if let Some(dir) = &a.out {
        write_eval_artifacts(dir, &reports, series.as_ref())?;
    }
    Ok(())
}

/// `report-k<k>.json`, `records.jsonl`, `table.txt` and, for a sweep,
/// `k_series.csv`.
fn write_eval_artifacts(dir: &Path, reports: &[EvalReport], series: Option<&KSeries>) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))
    };
    let mut records = String::new();
    let mut tables = String::new();
    for r in reports {
        write(&format!("report-k{}.json", r.k), &r.to_json())?;
        records.push_str(&r.records_jsonl());
        tables.push_str(&r.table());
        tables.push('\n');
    }
    write("records.jsonl", &records)?;
    write("table.txt", &tables)?;
    if let Some(s) = series {
        write("k_series.csv", &s.to_csv())?;
    }
    Ok(())
}

/// Accepts a forest id, a leaf id or a map node id.
fn resolve_id(forest: &SemanticForest, raw: &str) -> Result<ForestNodeId, CliError> {
    let id = ForestNodeId::from(raw);
    if forest.node(&id).is_some() {
        return Ok(id);
    }
    forest
        .leaf_for(&NodeId::new(raw))
        .cloned()
        .ok_or_else(|| CliError::Input(ForestError::UnknownNode(id).to_string()))
}

fn dump_subtree(forest: &SemanticForest, id: &ForestNodeId, depth: usize, out: &mut String) {
    let node = forest.node(id).expect("ids come from the forest");
    let p = &node.centroid;
    out.push_str(&format!(
        "{}{} [level {}] ({:.2}, {:.2}, {:.2}) {}\n",
        "  ".repeat(depth),
        node.id,
        node.level,
        p.x,
        p.y,
        p.z,
        node.summary.as_deref().unwrap_or("<unsummarized>")
    ));
    for c in &node.children {
        dump_subtree(forest, c, depth + 1, out);
    }
}

fn dump_traces(path: &Path) -> Result<String, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = String::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: DescentTrace = serde_json::from_str(&line)
            .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push_str(&format!("descent {} from {} -> {}\n", i + 1, t.root, t.leaf));
        for s in &t.steps {
            let ids: Vec<&str> = s.candidates.iter().map(|c| c.as_str()).collect();
            out.push_str(&format!(
                "  at {}: [{}] -> {}{}\n",
                s.visited,
                ids.join(", "),
                s.selected,
                if s.called { "" } else { " (only candidate)" }
            ));
        }
    }
    Ok(out)
}

fn cmd_inspect(cfg: &RunConfig, a: &InspectArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = &a.trace {
        let text = dump_traces(path)?;
        return stdout.write_all(text.as_bytes()).map_err(out_err);
    }
    let forest = read_forest(cfg.forest_path()?)?;
    if let Some(map) = &cfg.map {
        forest.check_against(&read_map(map)?)?;
    }
    let mut out = String::new();
    match &a.id {
        None => {
            for r in forest.roots() {
                dump_subtree(&forest, r, 0, &mut out);
            }
        }
        Some(raw) => {
            let id = resolve_id(&forest, raw)?;
            if forest.get(&id)?.is_leaf() {
                out = render_chain(&forest, &id)?.rendering;
                out.push('\n');
            } else {
                dump_subtree(&forest, &id, 0, &mut out);
            }
        }
    }
    stdout.write_all(out.as_bytes()).map_err(out_err)
}

fn cmd_gen_world(cfg: &RunConfig, a: &GenWorldArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let world = generate_world(&WorldSpec::standard(cfg.seed, a.nodes, a.regions))?;
    export_world(&a.out, &world.map, &world.queries)?;
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    for q in &world.queries {
        *kinds.entry(q.query.kind().as_str()).or_default() += 1;
    }
    let summary = serde_json::json!({
        "out": a.out.display().to_string(),
        "seed": cfg.seed,
        "map_nodes": world.map.node_count(),
        "map_edges": world.map.edge_count(),
        "map_digest": map_digest(&world.map),
        "queries": kinds,
    });
    write_line(stdout, &summary.to_string())
}
