//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.
//!
//! Set `SEISMIC_SPLADE_QUERIES=<jsonl>` (with `SEISMIC_SPLADE_DIM`) to add the
//! optional concentration spot-check on real query embeddings.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seismic_core::analysis::{ip_preservation, l1_concentration};
use seismic_core::eval::{
    accuracy, fig4_grid, ground_truth, latency_sweep, SweepOptions, SweepRow,
};
use seismic_core::index::{prune_summary, read_index, write_index};
use seismic_core::io::{self, ResultSet};
use seismic_core::synthetic::{Clustered, ClusteredShape, HeavyTailed};
use seismic_core::{
    exact_search, BlockingStrategy, BuildParams, Collection, Error, InvertedIndex, Quantization,
    SearchParams, SparseVector, Summary, SummaryStrategy,
};

const K: usize = 10;

// Criterion 1
const SAFE_DOCS: usize = 10_000;
const SAFE_DIM: u32 = 1_000;
const SAFE_QUERIES: usize = 200;
const SAFE_BETA: usize = 64;
const SAFE_LIMIT: Duration = Duration::from_secs(60);

// Criterion 2
const ORACLE_INSTANCES: usize = 500;
const ORACLE_MAX_DOCS: usize = 2_000;
const ORACLE_SCORE_RTOL: f64 = 1e-5;

// Criteria 3 to 5: clustered benchmark
const CLUSTERED_DOCS: usize = 100_000;
const CLUSTERED_QUERIES: usize = 200;
const CLUSTERED_LAMBDA: usize = 2_000;
const CLUSTERED_BETA: usize = 100;
const CLUSTERED_ALPHA: f64 = 0.4;
const EFFICACY_ACCURACY: f64 = 0.90;
const EFFICACY_DOC_FRACTION: f64 = 0.2;
const EFFICACY_LIMIT: Duration = Duration::from_secs(600);
const MATCH_TOLERANCE: f64 = 0.10;
const GRID_WIN_FRACTION: f64 = 0.80;
const QUANTIZATION_MAX_DELTA: f64 = 0.01;

// Criterion 6: heavy-tailed summaries
const SUMMARY_DOCS: usize = 20_000;
const SUMMARY_QUERIES: usize = 200;
const SUMMARY_LAMBDA: usize = 3_000;
const SUMMARY_BETA: usize = 40;
const SUMMARY_TOP: usize = 128;
const MASS_RTOL: f64 = 1e-12;

// Criterion 7
const ANALYSIS_TOL: f64 = 1e-9;
const SPLADE_TOP: usize = 10;
const SPLADE_EXPECTED: f64 = 0.75;
const SPLADE_TOL: f64 = 0.05;

// Criterion 8
const ROUND_TRIPS: usize = 1_000;

struct Report {
    failures: usize,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, outcome: Result<String, String>) {
        match outcome {
            Ok(detail) => println!("PASS  criterion {id}: {name} | {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  criterion {id}: {name} | {detail}");
            }
        }
    }
}

fn main() {
    let mut report = Report { failures: 0 };
    let started = Instant::now();

    report.record(1, "safe configuration is exact", safe_configuration());
    report.record(
        2,
        "exact search agrees with a naive oracle",
        oracle_equivalence(),
    );

    let bench = ClusteredBench::new();
    report.record(3, "approximation efficacy", bench.efficacy());
    report.record(
        4,
        "geometric beats fixed blocking",
        bench.blocking_ablation(),
    );
    report.record(5, "quantization fidelity", bench.quantization());
    report.record(6, "alpha-mass summaries", alpha_mass(&bench));
    drop(bench);

    report.record(7, "concentration tooling", concentration_tooling());
    report.record(8, "format round trips", format_round_trips());

    println!(
        "acceptance: {} of 8 criteria passed in {:.1?}",
        8 - report.failures,
        started.elapsed()
    );
    if report.failures > 0 {
        std::process::exit(1);
    }
}

fn check(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_queries(
    index: &InvertedIndex,
    queries: &Collection,
    params: impl Fn(&SparseVector) -> SearchParams,
) -> ResultSet {
    let mut searcher = index.searcher();
    queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            (
                i as u32,
                searcher.search(q, &params(q)).expect("valid query").hits,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// 1

fn safe_configuration() -> Result<String, String> {
    let started = Instant::now();
    let shape = HeavyTailed {
        dim: SAFE_DIM,
        mean_nnz: 40,
        ..HeavyTailed::default()
    };
    let docs = shape.generate(SAFE_DOCS, 11);
    let queries = HeavyTailed {
        mean_nnz: 20,
        ..shape
    }
    .generate(SAFE_QUERIES, 12);
    let params = BuildParams {
        lambda: SAFE_DOCS,
        beta: SAFE_BETA,
        alpha: 1.0,
        quantization: Quantization::None,
        ..BuildParams::default()
    };
    let index = InvertedIndex::build(&docs, &params).map_err(|e| e.to_string())?;
    let approx = run_queries(&index, &queries, |q| SearchParams::new(K, q.nnz(), 1.0));
    let exact = ground_truth(&docs, &queries, K);
    let acc = accuracy(&approx, &exact, K).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    check(
        acc == 1.0 && elapsed < SAFE_LIMIT,
        format!("accuracy {acc} (required 1.0), {elapsed:.1?} (limit {SAFE_LIMIT:?})"),
    )
}

// ---------------------------------------------------------------------------
// 2

fn random_instance(rng: &mut ChaCha8Rng) -> (Collection, SparseVector) {
    let dim = rng.random_range(1..=400u32);
    let n = rng.random_range(1..=ORACLE_MAX_DOCS);
    let mut vector = |max_nnz: usize| {
        let nnz = rng.random_range(0..=max_nnz.min(dim as usize));
        let mut m = BTreeMap::new();
        while m.len() < nnz {
            m.insert(rng.random_range(0..dim), rng.random_range(0.001f32..10.0));
        }
        SparseVector::from_pairs(m).unwrap()
    };
    let docs = (0..n).map(|_| vector(30)).collect();
    let query = vector(20);
    (Collection::new(dim, docs).unwrap(), query)
}

/// Every document against every query entry by a double loop; products are
/// summed in ascending coordinate order.
fn naive_top_k(collection: &Collection, query: &SparseVector, k: usize) -> Vec<(u32, f32, f64)> {
    let mut scored: Vec<(u32, f32, f64)> = Vec::with_capacity(collection.len());
    for (doc, x) in collection.iter().enumerate() {
        let mut s = 0.0f32;
        let mut s64 = 0.0f64;
        for (i, &xc) in x.coordinates().iter().enumerate() {
            for (j, &qc) in query.coordinates().iter().enumerate() {
                if xc == qc {
                    s += x.values()[i] * query.values()[j];
                    s64 += x.values()[i] as f64 * query.values()[j] as f64;
                }
            }
        }
        scored.push((doc as u32, s, s64));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for instance in 0..ORACLE_INSTANCES {
        let (docs, query) = random_instance(&mut rng);
        let engine = exact_search(&docs, &query, K).hits;
        let naive = naive_top_k(&docs, &query, K);
        let engine_ids: Vec<u32> = engine.iter().map(|h| h.doc).collect();
        let naive_ids: Vec<u32> = naive.iter().map(|t| t.0).collect();
        if engine_ids != naive_ids {
            return Err(format!(
                "instance {instance}: ids {engine_ids:?} vs {naive_ids:?}"
            ));
        }
        for (h, &(_, _, s64)) in engine.iter().zip(&naive) {
            let rel = (h.score as f64 - s64).abs() / s64.abs().max(f64::MIN_POSITIVE);
            let rel = if s64 == 0.0 {
                (h.score as f64).abs()
            } else {
                rel
            };
            worst = worst.max(rel);
            if rel > ORACLE_SCORE_RTOL {
                return Err(format!("instance {instance}: score {} vs {s64}", h.score));
            }
        }
    }
    Ok(format!(
        "{ORACLE_INSTANCES} instances, ids identical, worst relative score error {worst:.2e} (tolerance {ORACLE_SCORE_RTOL:e})"
    ))
}

// ---------------------------------------------------------------------------
// 3 to 5

struct ClusteredBench {
    docs: Collection,
    queries: Collection,
    exact: ResultSet,
    geometric: InvertedIndex,
    geometric_rows: Vec<SweepRow>,
    setup: Duration,
}

impl ClusteredBench {
    fn new() -> Self {
        let started = Instant::now();
        let model = Clustered::new(ClusteredShape::default(), 7);
        let docs = model.documents(CLUSTERED_DOCS, 8);
        let queries = model.queries(CLUSTERED_QUERIES, 9);
        let exact = ground_truth(&docs, &queries, K);
        let geometric = InvertedIndex::build(
            &docs,
            &Self::params(BlockingStrategy::Geometric, Quantization::U8),
        )
        .expect("valid build");
        let geometric_rows = sweep(&geometric, &queries, &exact);
        ClusteredBench {
            docs,
            queries,
            exact,
            geometric,
            geometric_rows,
            setup: started.elapsed(),
        }
    }

    fn params(blocking: BlockingStrategy, quantization: Quantization) -> BuildParams {
        BuildParams {
            lambda: CLUSTERED_LAMBDA,
            beta: CLUSTERED_BETA,
            alpha: CLUSTERED_ALPHA,
            blocking,
            quantization,
            ..BuildParams::default()
        }
    }

    fn efficacy(&self) -> Result<String, String> {
        let budget = EFFICACY_DOC_FRACTION * CLUSTERED_DOCS as f64;
        let best = self
            .geometric_rows
            .iter()
            .filter(|r| r.docs_scored_mean <= budget)
            .max_by(|a, b| {
                a.accuracy
                    .total_cmp(&b.accuracy)
                    .then(b.docs_scored_mean.total_cmp(&a.docs_scored_mean))
            });
        let cheapest = self
            .geometric_rows
            .iter()
            .filter(|r| r.accuracy >= EFFICACY_ACCURACY && r.docs_scored_mean <= budget)
            .min_by(|a, b| a.docs_scored_mean.total_cmp(&b.docs_scored_mean));
        let within = self.setup < EFFICACY_LIMIT;
        match cheapest {
            Some(r) if within => Ok(format!(
                "cut={} heap_factor={} reaches accuracy {:.3} scoring {:.0} docs/query (budget {budget:.0}); best in budget {:.3}; {:.1?}",
                r.cut,
                r.heap_factor,
                r.accuracy,
                r.docs_scored_mean,
                best.map_or(0.0, |b| b.accuracy),
                self.setup
            )),
            _ => Err(format!(
                "best accuracy within budget {:.3} (required {EFFICACY_ACCURACY}); {:.1?} (limit {EFFICACY_LIMIT:?})",
                best.map_or(0.0, |b| b.accuracy),
                self.setup
            )),
        }
    }

    fn blocking_ablation(&self) -> Result<String, String> {
        let block_size = CLUSTERED_LAMBDA / CLUSTERED_BETA;
        let fixed = InvertedIndex::build(
            &self.docs,
            &Self::params(BlockingStrategy::Fixed { block_size }, Quantization::U8),
        )
        .map_err(|e| e.to_string())?;
        let fixed_rows = sweep(&fixed, &self.queries, &self.exact);
        let mut matched = 0;
        let mut wins = 0;
        for g in &self.geometric_rows {
            let best_fixed = fixed_rows
                .iter()
                .filter(|f| {
                    (f.docs_scored_mean - g.docs_scored_mean).abs()
                        <= MATCH_TOLERANCE * g.docs_scored_mean
                })
                .map(|f| f.accuracy)
                .reduce(f64::max);
            if let Some(best) = best_fixed {
                matched += 1;
                if g.accuracy >= best {
                    wins += 1;
                }
            }
        }
        let points = self.geometric_rows.len();
        let required = (GRID_WIN_FRACTION * points as f64).ceil() as usize;
        check(
            wins >= required,
            format!(
                "geometric >= best cost-matched fixed (block size {block_size}) at {wins} of {points} grid points ({matched} had a match within {:.0}%; required {required})",
                MATCH_TOLERANCE * 100.0
            ),
        )
    }

    fn quantization(&self) -> Result<String, String> {
        let (blocks, worst) = quantization_error(&self.geometric, &self.docs)?;
        let mut small_blocks = 0;
        let mut small_worst = 0.0f64;
        for (i, params) in small_build_variants().iter().enumerate() {
            let docs = HeavyTailed::default().generate(1500, 300 + i as u64);
            let index = InvertedIndex::build(&docs, params).map_err(|e| e.to_string())?;
            let (b, w) = quantization_error(&index, &docs)?;
            small_blocks += b;
            small_worst = small_worst.max(w);
        }

        let raw = InvertedIndex::build(
            &self.docs,
            &Self::params(BlockingStrategy::Geometric, Quantization::None),
        )
        .map_err(|e| e.to_string())?;
        let q_size = self.geometric.size_report();
        let r_size = raw.size_report();
        let entries: usize = self.geometric.blocks().map(|(_, b)| b.summary.nnz()).sum();
        let bytes_ok = q_size.summary_values == entries
            && r_size.summary_values == 4 * entries
            && q_size.summary_coordinates == r_size.summary_coordinates;

        let raw_rows = sweep(&raw, &self.queries, &self.exact);
        let delta = self
            .geometric_rows
            .iter()
            .zip(&raw_rows)
            .map(|(q, r)| (q.accuracy - r.accuracy).abs())
            .fold(0.0, f64::max);
        check(
            bytes_ok && delta <= QUANTIZATION_MAX_DELTA,
            format!(
                "{} blocks, worst |error|/step {:.3} (must be <= 1); value bytes {} quantized vs {} raw for {entries} entries; max accuracy delta over grid {delta:.4} (limit {QUANTIZATION_MAX_DELTA})",
                blocks + small_blocks,
                worst.max(small_worst),
                q_size.summary_values,
                r_size.summary_values,
            ),
        )
        .and_then(|d| {
            if worst > 1.0 || small_worst > 1.0 {
                Err(d)
            } else {
                Ok(d)
            }
        })
    }
}

fn sweep(index: &InvertedIndex, queries: &Collection, exact: &ResultSet) -> Vec<SweepRow> {
    latency_sweep(
        index,
        queries,
        exact,
        &fig4_grid(K),
        SweepOptions::default(),
    )
    .expect("valid sweep")
}

fn small_build_variants() -> Vec<BuildParams> {
    let base = BuildParams {
        lambda: 300,
        beta: 20,
        ..BuildParams::default()
    };
    vec![
        base,
        BuildParams { alpha: 1.0, ..base },
        BuildParams {
            alpha: 0.1,
            seed: 5,
            ..base
        },
        BuildParams {
            summary: SummaryStrategy::FixedTop { s: 16 },
            ..base
        },
        BuildParams {
            blocking: BlockingStrategy::Fixed { block_size: 7 },
            ..base
        },
    ]
}

/// Independent maximum over block members.
fn naive_block_max(docs: &Collection, ids: &[u32]) -> BTreeMap<u32, f32> {
    let mut m: BTreeMap<u32, f32> = BTreeMap::new();
    for &d in ids {
        for e in docs[d as usize].entries() {
            let slot = m.entry(e.coordinate).or_insert(e.value);
            *slot = slot.max(e.value);
        }
    }
    m
}

/// Checks every quantized block against the pruned summary it encodes;
/// returns the block count and the worst error measured in steps.
fn quantization_error(index: &InvertedIndex, docs: &Collection) -> Result<(usize, f64), String> {
    let mut blocks = 0;
    let mut worst = 0.0f64;
    for (c, block) in index.blocks() {
        let Summary::Quantized(q) = &block.summary else {
            return Err(format!("list {c}: block is not quantized"));
        };
        let full = naive_block_max(docs, &block.doc_ids);
        let full = SparseVector::from_pairs(full).map_err(|e| e.to_string())?;
        let original = prune_summary(&full, index.params()).map_err(|e| e.to_string())?;
        if q.coordinates() != original.coordinates() {
            return Err(format!(
                "list {c}: quantized coordinates differ from the summary"
            ));
        }
        for (&r, &v) in q.reconstructed_values().iter().zip(original.values()) {
            let err = (r as f64 - v as f64).abs();
            let ratio = if q.step() == 0.0 {
                if err == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                err / q.step() as f64
            };
            worst = worst.max(ratio);
        }
        blocks += 1;
    }
    Ok((blocks, worst))
}

// ---------------------------------------------------------------------------
// 6

fn alpha_mass(bench: &ClusteredBench) -> Result<String, String> {
    // Mass bound, on every summary of an unquantized alpha-mass build.
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut mass_bound = |index: &InvertedIndex, docs: &Collection| -> Result<(), String> {
        let alpha = index.params().alpha;
        for (_, block) in index.blocks() {
            let Summary::Raw(kept) = &block.summary else {
                return Err("expected raw summaries".into());
            };
            let full = naive_block_max(docs, &block.doc_ids);
            for (&c, &v) in kept.coordinates().iter().zip(kept.values()) {
                if full.get(&c) != Some(&v) {
                    return Err(format!("summary entry {c} is not the block maximum"));
                }
            }
            if kept.nnz() < 2 {
                continue;
            }
            checked += 1;
            let kept_mass: f64 = kept.values().iter().map(|&v| v as f64).sum();
            let full_mass: f64 = full.values().map(|&v| v as f64).sum();
            if kept_mass > alpha * full_mass * (1.0 + MASS_RTOL) {
                violations += 1;
            }
        }
        Ok(())
    };
    let raw_clustered = InvertedIndex::build(
        &bench.docs,
        &ClusteredBench::params(BlockingStrategy::Geometric, Quantization::None),
    )
    .map_err(|e| e.to_string())?;
    mass_bound(&raw_clustered, &bench.docs)?;
    drop(raw_clustered);
    for (i, alpha) in [0.1, 0.25, 0.4, 0.7].into_iter().enumerate() {
        let docs = HeavyTailed::default().generate(2000, 600 + i as u64);
        let params = BuildParams {
            lambda: 500,
            beta: 16,
            alpha,
            quantization: Quantization::None,
            ..BuildParams::default()
        };
        let index = InvertedIndex::build(&docs, &params).map_err(|e| e.to_string())?;
        mass_bound(&index, &docs)?;
    }

    // Bytes and accuracy against fixed-length summaries.
    let shape = HeavyTailed {
        dim: 5_000,
        mean_nnz: 100,
        coordinate_skew: 0.8,
        value_shape: 2.5,
    };
    let docs = shape.generate(SUMMARY_DOCS, 1);
    let queries = HeavyTailed {
        mean_nnz: 20,
        ..shape
    }
    .generate(SUMMARY_QUERIES, 2);
    let exact = ground_truth(&docs, &queries, K);
    let build = |summary| {
        InvertedIndex::build(
            &docs,
            &BuildParams {
                lambda: SUMMARY_LAMBDA,
                beta: SUMMARY_BETA,
                alpha: 0.4,
                summary,
                ..BuildParams::default()
            },
        )
        .map_err(|e| e.to_string())
    };
    let importance = build(SummaryStrategy::AlphaMass)?;
    let fixed_top = build(SummaryStrategy::FixedTop { s: SUMMARY_TOP })?;
    let importance_bytes = importance.size_report().summaries();
    let fixed_bytes = fixed_top.size_report().summaries();
    let a_rows = sweep(&importance, &queries, &exact);
    let f_rows = sweep(&fixed_top, &queries, &exact);
    let at_least = a_rows
        .iter()
        .zip(&f_rows)
        .filter(|(a, f)| a.accuracy >= f.accuracy)
        .count();
    let points = a_rows.len();
    let required = (GRID_WIN_FRACTION * points as f64).ceil() as usize;
    let mean = |rows: &[SweepRow]| rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64;

    check(
        violations == 0 && importance_bytes < fixed_bytes && at_least >= required,
        format!(
            "{checked} summaries checked, {violations} exceed alpha mass; summary bytes {importance_bytes} (alpha 0.4) vs {fixed_bytes} (top {SUMMARY_TOP}); accuracy >= at {at_least} of {points} grid points (required {required}), grid means {:.4} vs {:.4}",
            mean(&a_rows),
            mean(&f_rows)
        ),
    )
}

// ---------------------------------------------------------------------------
// 7

fn brute_l1(docs: &Collection, t: usize) -> f64 {
    let mut sum = 0.0;
    let mut count = 0;
    for v in docs {
        if v.is_empty() {
            continue;
        }
        let mut vals: Vec<f64> = v.values().iter().map(|&x| x as f64).collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total: f64 = vals.iter().sum();
        let top: f64 = vals.iter().take(t).sum();
        sum += top / total;
        count += 1;
    }
    sum / count as f64
}

fn truncate(v: &SparseVector, keep: usize) -> BTreeMap<u32, f64> {
    let mut pairs: Vec<(u32, f32)> = v
        .coordinates()
        .iter()
        .copied()
        .zip(v.values().iter().copied())
        .collect();
    pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    pairs
        .into_iter()
        .take(keep)
        .map(|(c, x)| (c, x as f64))
        .collect()
}

fn dot(a: &BTreeMap<u32, f64>, b: &BTreeMap<u32, f64>) -> f64 {
    a.iter().filter_map(|(c, x)| b.get(c).map(|y| x * y)).sum()
}

fn brute_ip(
    docs: &Collection,
    queries: &Collection,
    q_keep: usize,
    d_keep: usize,
) -> (f64, f64, usize) {
    let mut ratios = Vec::new();
    for q in queries {
        let full_q = truncate(q, usize::MAX);
        let cut_q = truncate(q, q_keep);
        for (doc, _, _) in naive_top_k(docs, q, K) {
            let x = &docs[doc as usize];
            let full = dot(&full_q, &truncate(x, usize::MAX));
            if full > 0.0 {
                ratios.push(dot(&cut_q, &truncate(x, d_keep)) / full);
            }
        }
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, 1.96 * sd / n.sqrt(), ratios.len())
}

fn concentration_tooling() -> Result<String, String> {
    let docs = HeavyTailed::default().generate(3000, 70);
    let queries = HeavyTailed {
        mean_nnz: 20,
        ..HeavyTailed::default()
    }
    .generate(50, 71);
    let mut worst = 0.0f64;
    let counts = [1, 2, 5, 10, 20, 40, 100];
    for row in l1_concentration(&docs, &counts) {
        worst = worst.max((row.mean_fraction - brute_l1(&docs, row.top_count)).abs());
    }
    for row in l1_concentration(&queries, &counts) {
        worst = worst.max((row.mean_fraction - brute_l1(&queries, row.top_count)).abs());
    }
    for (q_keep, d_keep) in [(1, 1), (5, 10), (9, 20), (12, 25), (100, 100)] {
        let row = ip_preservation(&docs, &queries, K, q_keep, d_keep);
        let (mean, half, pairs) = brute_ip(&docs, &queries, q_keep, d_keep);
        if row.pairs != pairs {
            return Err(format!("pair count {} vs {pairs}", row.pairs));
        }
        worst = worst
            .max((row.mean_fraction - mean).abs())
            .max((row.ci95_low - (mean - half)).abs())
            .max((row.ci95_high - (mean + half)).abs());
    }
    let mut detail =
        format!("worst deviation from brute force {worst:.2e} (tolerance {ANALYSIS_TOL:e})");
    let mut ok = worst <= ANALYSIS_TOL;
    match splade_check() {
        Some(Ok((fraction, pass))) => {
            detail += &format!(
                "; real queries top-{SPLADE_TOP} L1 fraction {fraction:.3} (expected {SPLADE_EXPECTED} +/- {SPLADE_TOL})"
            );
            ok &= pass;
        }
        Some(Err(e)) => {
            detail += &format!("; real-embedding check failed: {e}");
            ok = false;
        }
        None => detail += "; real-embedding check skipped (SEISMIC_SPLADE_QUERIES not set)",
    }
    check(ok, detail)
}

fn splade_check() -> Option<Result<(f64, bool), String>> {
    let path = std::env::var("SEISMIC_SPLADE_QUERIES").ok()?;
    let dim = std::env::var("SEISMIC_SPLADE_DIM")
        .ok()
        .and_then(|d| d.parse().ok())
        .unwrap_or(30_522);
    Some((|| {
        let file = File::open(&path).map_err(|e| e.to_string())?;
        let queries =
            io::ingest_jsonl_queries(BufReader::new(file), dim).map_err(|e| e.to_string())?;
        let fraction = l1_concentration(&queries, &[SPLADE_TOP])[0].mean_fraction;
        Ok((fraction, (fraction - SPLADE_EXPECTED).abs() <= SPLADE_TOL))
    })())
}

// ---------------------------------------------------------------------------
// 8

type CorruptCase = (&'static str, Vec<u8>, fn(&Error) -> bool);

fn format_round_trips() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for i in 0..ROUND_TRIPS {
        let dim = rng.random_range(0..=2000u32);
        let n = rng.random_range(0..=40usize);
        let docs = (0..n)
            .map(|_| {
                if dim == 0 {
                    return SparseVector::empty();
                }
                let nnz = rng.random_range(0..=30.min(dim as usize));
                let mut m = BTreeMap::new();
                while m.len() < nnz {
                    let bits = rng.random::<u32>() & 0x7f7f_ffff;
                    let v = f32::from_bits(bits);
                    if v != 0.0 {
                        m.insert(rng.random_range(0..dim), v);
                    }
                }
                SparseVector::from_pairs(m).unwrap()
            })
            .collect();
        let c = Collection::new(dim, docs).unwrap();
        let mut first = Vec::new();
        io::write_collection(&c, &mut first).map_err(|e| e.to_string())?;
        let back = io::read_collection(&first[..]).map_err(|e| format!("collection {i}: {e}"))?;
        let mut second = Vec::new();
        io::write_collection(&back, &mut second).map_err(|e| e.to_string())?;
        if first != second || back != c {
            return Err(format!("collection {i} did not survive a round trip"));
        }
    }

    // Index files too, over a handful of builds.
    let docs = HeavyTailed::default().generate(800, 81);
    for params in small_build_variants() {
        let index = InvertedIndex::build(&docs, &params).map_err(|e| e.to_string())?;
        let mut first = Vec::new();
        write_index(&index, &mut first).map_err(|e| e.to_string())?;
        let back = read_index(&first[..]).map_err(|e| e.to_string())?;
        let mut second = Vec::new();
        write_index(&back, &mut second).map_err(|e| e.to_string())?;
        if first != second || back != index {
            return Err("index did not survive a round trip".into());
        }
    }

    let mut named = Vec::new();
    let mut collection_bytes = Vec::new();
    io::write_collection(&docs, &mut collection_bytes).unwrap();
    let mut index_bytes = Vec::new();
    write_index(
        &InvertedIndex::build(&docs, &BuildParams::default()).unwrap(),
        &mut index_bytes,
    )
    .unwrap();
    for (label, bytes) in [("collection", &collection_bytes), ("index", &index_bytes)] {
        let read = |b: &[u8]| -> Result<(), Error> {
            if label == "collection" {
                io::read_collection(b).map(|_| ())
            } else {
                read_index(b).map(|_| ())
            }
        };
        let mut bad_magic = bytes.clone();
        bad_magic[0] ^= 0xff;
        let mut bad_version = bytes.clone();
        bad_version[4] = 99;
        let cases: [CorruptCase; 4] = [
            ("magic", bad_magic, |e| matches!(e, Error::BadMagic { .. })),
            ("version", bad_version, |e| {
                matches!(e, Error::UnsupportedVersion { .. })
            }),
            ("truncated header", bytes[..10].to_vec(), |e| {
                matches!(e, Error::Truncated { .. })
            }),
            ("truncated body", bytes[..bytes.len() - 3].to_vec(), |e| {
                matches!(e, Error::Truncated { .. })
            }),
        ];
        for (what, corrupt, expected) in cases {
            match read(&corrupt) {
                Err(e) if expected(&e) => named.push(format!("{label} {what}")),
                Err(e) => return Err(format!("{label} {what}: wrong error {e:?}")),
                Ok(()) => return Err(format!("{label} {what}: accepted")),
            }
        }
    }
    Ok(format!(
        "{ROUND_TRIPS} collections byte-identical; {} index builds byte-identical; {} corruptions rejected with named errors",
        small_build_variants().len(),
        named.len()
    ))
}
