//! Accuracy, latency and size measurement.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::write_csv;
use crate::error::{Error, Result};
use crate::index::{InvertedIndex, SizeReport};
use crate::io::ResultSet;
use crate::search::{exact_search, Hit, SearchParams, SearchResult};
use crate::sparse::Collection;

/// Mean over queries of `|approx_k ∩ exact_k| / k`, comparing id sets.
/// Every query present on one side must be present on the other.
pub fn accuracy(approx: &ResultSet, exact: &ResultSet, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    for (&q, _) in exact.iter() {
        if approx.get(q).is_none() {
            return Err(Error::MissingQuery {
                query: q,
                side: "results",
            });
        }
    }
    let mut total = 0.0;
    for (&q, hits) in approx.iter() {
        let truth = exact.get(q).ok_or(Error::MissingQuery {
            query: q,
            side: "ground truth",
        })?;
        total += recall(hits, truth, k);
    }
    Ok(if approx.is_empty() {
        0.0
    } else {
        total / approx.len() as f64
    })
}

/// Exact top-k of every query, keyed by query position. Parallel over
/// queries.
pub fn ground_truth(collection: &Collection, queries: &Collection, k: usize) -> ResultSet {
    let hits: Vec<Vec<Hit>> = queries
        .vectors()
        .par_iter()
        .map(|q| exact_search(collection, q, k).hits)
        .collect();
    hits.into_iter()
        .enumerate()
        .map(|(i, h)| (i as u32, h))
        .collect()
}

/// `|approx_k ∩ exact_k| / k` for a single query.
pub fn recall(approx: &[Hit], exact: &[Hit], k: usize) -> f64 {
    let truth: HashSet<u32> = exact.iter().take(k).map(|h| h.doc).collect();
    let found = approx
        .iter()
        .take(k)
        .filter(|h| truth.contains(&h.doc))
        .count();
    found as f64 / k as f64
}

/// The configurations swept by the reference experiments: every
/// `cut` in 1..=10 crossed with `heap_factor` in {0.7, 0.8, 0.9, 1.0}.
pub fn fig4_grid(k: usize) -> Vec<SearchParams> {
    let mut grid = Vec::with_capacity(40);
    for cut in 1..=10 {
        for hf in [0.7f32, 0.8, 0.9, 1.0] {
            grid.push(SearchParams::new(k, cut, hf));
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub cut: usize,
    pub heap_factor: f32,
    pub queries: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
    pub accuracy: f64,
    pub docs_scored_mean: f64,
    pub blocks_skipped_mean: f64,
}

impl SweepRow {
    pub fn params(&self) -> SearchParams {
        SearchParams::new(self.k, self.cut, self.heap_factor)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Run configurations concurrently on the shared index. Each query is
    /// still timed individually, but timings then compete for cores.
    pub parallel: bool,
}

/// Runs every configuration over all queries, query `i` being matched with
/// ground-truth id `i`. One untimed warm-up pass precedes the timed pass;
/// only the search call itself is inside the timed region.
pub fn latency_sweep(
    index: &InvertedIndex,
    queries: &Collection,
    exact: &ResultSet,
    grid: &[SearchParams],
    options: SweepOptions,
) -> Result<Vec<SweepRow>> {
    for p in grid {
        p.validate()?;
    }
    for q in 0..queries.len() as u32 {
        if exact.get(q).is_none() {
            return Err(Error::MissingQuery {
                query: q,
                side: "ground truth",
            });
        }
    }
    let run = |p: &SearchParams| sweep_one(index, queries, exact, p);
    if options.parallel {
        grid.par_iter().map(run).collect()
    } else {
        grid.iter().map(run).collect()
    }
}

fn sweep_one(
    index: &InvertedIndex,
    queries: &Collection,
    exact: &ResultSet,
    params: &SearchParams,
) -> Result<SweepRow> {
    let mut searcher = index.searcher();
    for q in queries {
        searcher.search(q, params)?;
    }
    let mut times = Vec::with_capacity(queries.len());
    let mut results: Vec<SearchResult> = Vec::with_capacity(queries.len());
    for q in queries {
        let start = Instant::now();
        let r = searcher.search(q, params)?;
        times.push(start.elapsed().as_secs_f64() * 1e6);
        results.push(r);
    }

    let n = queries.len().max(1) as f64;
    let approx: ResultSet = results
        .iter()
        .enumerate()
        .map(|(i, r)| (i as u32, r.hits.clone()))
        .collect();
    let acc = if queries.is_empty() {
        0.0
    } else {
        accuracy(&approx, &restrict(exact, queries.len()), params.k)?
    };
    times.sort_by(f64::total_cmp);
    Ok(SweepRow {
        k: params.k,
        cut: params.cut,
        heap_factor: params.heap_factor,
        queries: queries.len(),
        mean_us: times.iter().sum::<f64>() / n,
        p50_us: percentile(&times, 0.50),
        p95_us: percentile(&times, 0.95),
        p99_us: percentile(&times, 0.99),
        accuracy: acc,
        docs_scored_mean: results
            .iter()
            .map(|r| r.stats.documents_scored as f64)
            .sum::<f64>()
            / n,
        blocks_skipped_mean: results
            .iter()
            .map(|r| r.stats.blocks_skipped as f64)
            .sum::<f64>()
            / n,
    })
}

fn restrict(exact: &ResultSet, n: usize) -> ResultSet {
    (0..n as u32)
        .filter_map(|q| exact.get(q).map(|h| (q, h.to_vec())))
        .collect()
}

/// Nearest-rank percentile of an ascending slice; 0 for an empty one.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Rows not dominated by another row that is at least as cheap and at
/// least as accurate, ordered by increasing cost.
pub fn pareto_frontier(rows: &[SweepRow], cost: impl Fn(&SweepRow) -> f64) -> Vec<SweepRow> {
    let mut sorted: Vec<SweepRow> = rows.to_vec();
    sorted.sort_by(|a, b| {
        cost(a)
            .total_cmp(&cost(b))
            .then(b.accuracy.total_cmp(&a.accuracy))
    });
    let mut frontier: Vec<SweepRow> = Vec::new();
    for row in sorted {
        if frontier
            .last()
            .is_none_or(|best| row.accuracy > best.accuracy)
        {
            frontier.push(row);
        }
    }
    frontier
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    write_csv(rows, out)
}

/// Serialized byte counts of each index component.
pub fn index_size_report(index: &InvertedIndex) -> SizeReport {
    index.size_report()
}
