//! Scoring methods against gold queries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{term_coverage, GoldQuery, HarnessError};
use crate::generation::{AgentState, ResultRecord};
use crate::llm_gateway::Gateway;
use crate::retrieval::{Method, QueryKind, Retriever};
use crate::semantic_forest::SemanticForest;
use crate::topo_map::TopologicalMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Queries run at once.
    pub concurrency: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { concurrency: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub success: bool,
    /// Term coverage of the answer, for global queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    #[serde(flatten)]
    pub record: ResultRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodKindScore {
    pub method: Method,
    pub kind: QueryKind,
    pub attempts: usize,
    pub successes: usize,
    /// `successes / attempts`; a global query succeeds at full coverage.
    pub sr: f64,
    /// Mean term coverage, for global queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub queries: usize,
    pub total_ms: f64,
    pub mean_query_ms: f64,
    pub max_query_ms: f64,
}

/// Scores and per-query records. Wall-clock timing is kept apart from the
/// serialized report so that reruns with the same inputs serialize
/// identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub scores: Vec<MethodKindScore>,
    /// Sorted by method, then query id.
    pub records: Vec<EvalRecord>,
    #[serde(skip)]
    pub timing: TimingStats,
}

impl EvalReport {
    pub fn score(&self, method: Method, kind: QueryKind) -> Option<&MethodKindScore> {
        self.scores.iter().find(|s| s.method == method && s.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }

    /// One JSON line per query record.
    pub fn records_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Success rate per method and kind, plus global coverage.
    pub fn table(&self) -> String {
        let mut methods: Vec<Method> = self.scores.iter().map(|s| s.method).collect();
        methods.dedup();
        let mut out = format!(
            "k = {}\n{:<16}{:>10}{:>10}{:>10}{:>10}\n",
            self.k, "method", "explicit", "implicit", "global", "coverage"
        );
        for m in methods {
            let _ = write!(out, "{:<16}", m.as_str());
            for kind in QueryKind::ALL {
                match self.score(m, kind) {
                    Some(s) => {
                        let _ = write!(out, "{:>10.4}", s.sr);
                    }
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            match self.score(m, QueryKind::Global).and_then(|s| s.coverage) {
                Some(c) => {
                    let _ = writeln!(out, "{c:>10.4}");
                }
                None => {
                    let _ = writeln!(out, "{:>10}", "-");
                }
            }
        }
        out
    }
}

fn score_record(gold: &GoldQuery, record: ResultRecord) -> EvalRecord {
    let (success, coverage) = if record.error.is_some() {
        (false, (!gold.query.kind().is_navigation()).then_some(0.0))
    } else if gold.query.kind().is_navigation() {
        (record.map_node().is_some_and(|m| gold.gold_leaves.contains(m)), None)
    } else {
        let c = term_coverage(record.answer().unwrap_or(""), &gold.gold_terms);
        (c == 1.0, Some(c))
    };
    EvalRecord {
        success,
        coverage,
        record,
    }
}

/// Runs every query with every method. Query failures are recorded as
/// unsuccessful with their error and never stop the run.
pub fn evaluate(
    map: &TopologicalMap,
    forest: &SemanticForest,
    gateway: &Gateway,
    queries: &[GoldQuery],
    methods: &[Method],
    k: usize,
    opts: EvalOptions,
) -> Result<EvalReport, HarnessError> {
    if queries.is_empty() {
        return Err(HarnessError::NoQueries);
    }
    if methods.is_empty() {
        return Err(HarnessError::NoMethods);
    }
    if k == 0 {
        return Err(HarnessError::InvalidK);
    }
    forest.check_against(map)?;
    for q in queries {
        q.validate().map_err(HarnessError::InvalidSpec)?;
    }
    let state = AgentState::at_first_node(map).ok_or(HarnessError::Map(crate::topo_map::MapError::UnknownNode(
        "<empty map>".into(),
    )))?;
    let retriever = Retriever::new(forest, gateway);
    let jobs: Vec<(Method, &GoldQuery)> = methods
        .iter()
        .flat_map(|&m| queries.iter().map(move |q| (m, q)))
        .collect();

    let start = Instant::now();
    let next = AtomicUsize::new(0);
    let workers = opts.concurrency.max(1).min(jobs.len());
    let done: Vec<(EvalRecord, f64)> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(&(method, gold)) = jobs.get(i) else { break };
                        let (mut record, _) = ResultRecord::capture(&retriever, map, &gold.query, method, k, &state);
                        let elapsed = record.elapsed_ms.take().unwrap_or(0.0);
                        record.query_id = Some(gold.id.clone());
                        out.push((score_record(gold, record), elapsed));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let total_ms = start.elapsed().as_secs_f64() * 1e3;

    let timing = TimingStats {
        queries: done.len(),
        total_ms,
        mean_query_ms: done.iter().map(|(_, t)| t).sum::<f64>() / done.len() as f64,
        max_query_ms: done.iter().map(|(_, t)| *t).fold(0.0, f64::max),
    };
    let mut records: Vec<EvalRecord> = done.into_iter().map(|(r, _)| r).collect();
    records.sort_by(|a, b| {
        a.record
            .method
            .cmp(&b.record.method)
            .then_with(|| a.record.query_id.cmp(&b.record.query_id))
    });

    let mut tally: BTreeMap<(Method, QueryKind), (usize, usize, f64)> = BTreeMap::new();
    for r in &records {
        let e = tally.entry((r.record.method, r.record.kind)).or_default();
        e.0 += 1;
        e.1 += usize::from(r.success);
        e.2 += r.coverage.unwrap_or(0.0);
    }
    let mut scores = Vec::new();
    for &m in methods {
        for kind in QueryKind::ALL {
            if let Some(&(attempts, successes, cov)) = tally.get(&(m, kind)) {
                scores.push(MethodKindScore {
                    method: m,
                    kind,
                    attempts,
                    successes,
                    sr: successes as f64 / attempts as f64,
                    coverage: (kind == QueryKind::Global).then(|| cov / attempts as f64),
                });
            }
        }
    }
    Ok(EvalReport {
        k,
        scores,
        records,
        timing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSeriesPoint {
    pub k: usize,
    pub method: Method,
    pub kind: QueryKind,
    pub attempts: usize,
    pub successes: usize,
    pub sr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
}

/// Scores by k, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSeries {
    pub points: Vec<KSeriesPoint>,
}

impl KSeries {
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        let points = reports
            .iter()
            .flat_map(|r| {
                r.scores.iter().map(move |s| KSeriesPoint {
                    k: r.k,
                    method: s.method,
                    kind: s.kind,
                    attempts: s.attempts,
                    successes: s.successes,
                    sr: s.sr,
                    coverage: s.coverage,
                })
            })
            .collect();
        KSeries { points }
    }

    pub const CSV_HEADER: &'static str = "k,method,kind,attempts,successes,sr,coverage";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let coverage = p.coverage.map(|c| format!("{c:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.6},{}",
                p.k,
                p.method.as_str(),
                p.kind.as_str(),
                p.attempts,
                p.successes,
                p.sr,
                coverage
            );
        }
        out
    }
}

/// One evaluation per k over the same world.
pub fn ablate_k(
    map: &TopologicalMap,
    forest: &SemanticForest,
    gateway: &Gateway,
    queries: &[GoldQuery],
    methods: &[Method],
    k_values: &[usize],
    opts: EvalOptions,
) -> Result<Vec<EvalReport>, HarnessError> {
    if k_values.is_empty() {
        return Err(HarnessError::InvalidK);
    }
    k_values
        .iter()
        .map(|&k| evaluate(map, forest, gateway, queries, methods, k, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env_harness::{generate_world, WorldSpec};
    use crate::retrieval::Query;
    use crate::semantic_forest::{build_forest, ClusteringConfig, SummarizeOptions};

    fn setup(nodes: usize) -> (TopologicalMap, SemanticForest, Vec<GoldQuery>) {
        let world = generate_world(&WorldSpec::standard(42, nodes, 2)).unwrap();
        let cfg = ClusteringConfig::for_map(&world.map);
        let forest = build_forest(&world.map, &cfg, &Gateway::mock(), SummarizeOptions::default()).unwrap();
        (world.map, forest, world.queries)
    }

    #[test]
    fn sr_is_exact_ratio() {
        let (map, forest, queries) = setup(30);
        let mut picked: Vec<GoldQuery> = queries
            .iter()
            .filter(|q| q.query.kind() == QueryKind::Explicit)
            .take(3)
            .cloned()
            .collect();
        // point one query at a node it cannot reach as an answer
        let wrong = map.nodes().find(|n| !picked[2].gold_leaves.contains(&n.id)).unwrap().id.clone();
        picked[2].gold_leaves = [wrong].into();
        let report = evaluate(&map, &forest, &Gateway::mock(), &picked, &[Method::SemanticMatch], 10, EvalOptions::default()).unwrap();
        let s = report.score(Method::SemanticMatch, QueryKind::Explicit).unwrap();
        assert_eq!((s.attempts, s.successes), (3, 2));
        assert!((s.sr - 0.6667).abs() < 1e-4);
        assert_eq!(s.sr, 2.0 / 3.0);
    }

    #[test]
    fn failures_are_recorded_not_raised() {
        let (map, _, mut queries) = setup(30);
        // without edges every waypoint but the start is unreachable
        let mut bare = TopologicalMap::new();
        for n in map.nodes() {
            bare.add_node(n.clone()).unwrap();
        }
        let forest_bare = {
            let cfg = ClusteringConfig::for_map(&bare);
            build_forest(&bare, &cfg, &Gateway::mock(), SummarizeOptions::default()).unwrap()
        };
        queries.truncate(5);
        let report = evaluate(&bare, &forest_bare, &Gateway::mock(), &queries, &Method::ALL, 3, EvalOptions::default()).unwrap();
        assert_eq!(report.records.len(), 15);
        assert!(report.records.iter().any(|r| r.record.error.as_deref().is_some_and(|e| e.contains("unreachable"))));
    }

    #[test]
    fn rejects_empty_inputs_and_stale_forest() {
        let (map, forest, queries) = setup(20);
        let gw = Gateway::mock();
        assert_eq!(
            evaluate(&map, &forest, &gw, &[], &Method::ALL, 3, EvalOptions::default()),
            Err(HarnessError::NoQueries)
        );
        let (other_map, _, _) = setup(21);
        assert!(matches!(
            evaluate(&other_map, &forest, &gw, &queries, &Method::ALL, 3, EvalOptions::default()),
            Err(HarnessError::Forest(_))
        ));
    }

    #[test]
    fn concurrency_does_not_change_report() {
        let (map, forest, queries) = setup(60);
        let gw = Gateway::mock();
        let a = evaluate(&map, &forest, &gw, &queries, &Method::ALL, 5, EvalOptions { concurrency: 1 }).unwrap();
        let b = evaluate(&map, &forest, &gw, &queries, &Method::ALL, 5, EvalOptions { concurrency: 8 }).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(a.table().contains("embodied_rag"));
    }

    #[test]
    fn single_k_series_matches_direct_run() {
        let (map, forest, queries) = setup(30);
        let gw = Gateway::mock();
        let series = ablate_k(&map, &forest, &gw, &queries, &[Method::Rag], &[4], EvalOptions::default()).unwrap();
        let direct = evaluate(&map, &forest, &gw, &queries, &[Method::Rag], 4, EvalOptions::default()).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].to_json(), direct.to_json());
        let csv = KSeries::from_reports(&series).to_csv();
        assert!(csv.starts_with(KSeries::CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + direct.scores.len());
    }

    #[test]
    fn global_answer_scored_by_coverage() {
        let gold = GoldQuery {
            id: "g".into(),
            query: Query::new("describe", QueryKind::Global).unwrap(),
            gold_leaves: Default::default(),
            gold_terms: vec!["garden".into(), "workshop".into()],
        };
        let record = ResultRecord {
            query_id: Some("g".into()),
            query: "describe".into(),
            kind: QueryKind::Global,
            method: Method::Rag,
            k: 1,
            retrieved: vec![],
            result: Some(crate::generation::QueryOutcome::Answer(crate::generation::AnswerResult {
                answer: "a garden lawn".into(),
                cited_chains: vec![],
            })),
            error: None,
            warnings: vec![],
            elapsed_ms: None,
        };
        let scored = score_record(&gold, record);
        assert_eq!(scored.coverage, Some(0.5));
        assert!(!scored.success);
    }
}
