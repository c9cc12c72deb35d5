//! Bottom-up summarization of non-leaf forest nodes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use super::{ForestError, ForestNodeId, SemanticForest};
use crate::llm_gateway::{Gateway, SummaryRequest};

pub const DEFAULT_FANOUT: usize = 8;
pub const DEFAULT_SUMMARY_BUDGET: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummarizeOptions {
    /// Worker threads per level.
    pub fanout: usize,
    /// Word budget per summary.
    pub budget: usize,
}

impl Default for SummarizeOptions {
    fn default() -> Self {
        SummarizeOptions {
            fanout: DEFAULT_FANOUT,
            budget: DEFAULT_SUMMARY_BUDGET,
        }
    }
}

/// Fills every non-leaf summary from its children's, one level at a time.
/// Nodes within a level are independent and run concurrently. On failure
/// the error for the smallest failing id is returned and the forest keeps
/// whatever levels completed.
pub fn summarize_forest(
    forest: &mut SemanticForest,
    gateway: &Gateway,
    opts: SummarizeOptions,
) -> Result<(), ForestError> {
    let top = forest.nodes().map(|n| n.level).max().unwrap_or(0);
    for level in 1..=top {
        let mut jobs: Vec<(ForestNodeId, SummaryRequest)> = Vec::new();
        for node in forest.nodes().filter(|n| n.level == level) {
            let children = node
                .children
                .iter()
                .map(|c| {
                    forest
                        .summary(c)
                        .map(str::to_string)
                        .ok_or_else(|| ForestError::InvariantViolation(format!("child `{c}` has no summary")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let req = SummaryRequest::new(children, level, opts.budget).map_err(|source| ForestError::Summarizer {
                node: node.id.clone(),
                source,
            })?;
            jobs.push((node.id.clone(), req));
        }

        let results = run_level(&jobs, gateway, opts.fanout.max(1));
        let nodes = forest.nodes_mut();
        let mut first_err = None;
        for ((id, _), result) in jobs.iter().zip(results) {
            match result {
                Ok(text) => nodes.get_mut(id).expect("job node exists").summary = Some(text),
                Err(source) => {
                    if first_err.is_none() {
                        first_err = Some(ForestError::Summarizer { node: id.clone(), source });
                    }
                }
            }
        }
        if let Some(e) = first_err {
            return Err(e);
        }
    }
    Ok(())
}

fn run_level(
    jobs: &[(ForestNodeId, SummaryRequest)],
    gateway: &Gateway,
    fanout: usize,
) -> Vec<Result<String, crate::llm_gateway::GatewayError>> {
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<Result<String, _>>> = (0..jobs.len()).map(|_| None).collect();
    let workers = fanout.min(jobs.len());
    let collected: Vec<Vec<(usize, Result<String, _>)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= jobs.len() {
                            break;
                        }
                        out.push((i, gateway.summarize(&jobs[i].1)));
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("summary worker panicked")).collect()
    });
    for (i, r) in collected.into_iter().flatten() {
        results[i] = Some(r);
    }
    results.into_iter().map(|r| r.expect("every job ran")).collect()
}
