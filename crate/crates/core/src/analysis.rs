//! Concentration-of-importance measurements.
//!
//! Two quantities, both averaged over a collection:
//!
//! * the fraction of a vector's L1 mass held by its `t` largest entries;
//! * the fraction of the query-document inner product preserved when the
//!   query keeps only its `q_keep` largest entries and each of its exact
//!   top-k documents keeps its `d_keep` largest.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::search::exact_search;
use crate::sparse::Collection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L1Row {
    pub top_count: usize,
    pub mean_fraction: f64,
    /// Non-empty vectors averaged over.
    pub vectors: usize,
}

/// Mean fraction of L1 mass in the `t` largest entries, for each requested
/// `t`. Empty vectors are left out of the average.
pub fn l1_concentration(collection: &Collection, top_counts: &[usize]) -> Vec<L1Row> {
    let mut sums = vec![0.0f64; top_counts.len()];
    let mut vectors = 0usize;
    for v in collection {
        if v.is_empty() {
            continue;
        }
        vectors += 1;
        let mut mags: Vec<f64> = v.values().iter().map(|x| x.abs() as f64).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let mut prefix = Vec::with_capacity(mags.len() + 1);
        prefix.push(0.0f64);
        for m in &mags {
            prefix.push(prefix.last().unwrap() + m);
        }
        let total = *prefix.last().unwrap();
        for (sum, &t) in sums.iter_mut().zip(top_counts) {
            *sum += prefix[t.min(mags.len())] / total;
        }
    }
    top_counts
        .iter()
        .zip(sums)
        .map(|(&top_count, sum)| L1Row {
            top_count,
            mean_fraction: if vectors == 0 {
                0.0
            } else {
                sum / vectors as f64
            },
            vectors,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpRow {
    pub q_keep: usize,
    pub d_keep: usize,
    pub mean_fraction: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    /// Query-document pairs averaged over.
    pub pairs: usize,
    /// Pairs left out because their full inner product is zero.
    pub excluded: usize,
}

/// Inner-product preservation under truncation, pooled over all
/// (query, exact top-k document) pairs with a positive full inner product.
/// The interval is a normal approximation, `mean ± 1.96 · sd / sqrt(n)`.
pub fn ip_preservation(
    collection: &Collection,
    queries: &Collection,
    k: usize,
    q_keep: usize,
    d_keep: usize,
) -> IpRow {
    let neighbours: Vec<Vec<u32>> = queries
        .vectors()
        .par_iter()
        .map(|q| exact_search(collection, q, k).doc_ids())
        .collect();
    ip_preservation_with_neighbours(collection, queries, &neighbours, q_keep, d_keep)
}

/// As [`ip_preservation`], reusing precomputed top-k neighbour lists.
pub fn ip_preservation_with_neighbours(
    collection: &Collection,
    queries: &Collection,
    neighbours: &[Vec<u32>],
    q_keep: usize,
    d_keep: usize,
) -> IpRow {
    let mut ratios = Vec::new();
    let mut excluded = 0usize;
    for (q, docs) in queries.iter().zip(neighbours) {
        let q_cut = q.top_s_subvector(q_keep);
        for &d in docs {
            let x = &collection[d as usize];
            let full = q.inner_product_f64(x);
            if full <= 0.0 {
                excluded += 1;
                continue;
            }
            let partial = q_cut.inner_product_f64(&x.top_s_subvector(d_keep));
            ratios.push(partial / full);
        }
    }
    let n = ratios.len();
    let mean = if n == 0 {
        0.0
    } else {
        ratios.iter().sum::<f64>() / n as f64
    };
    let half_width = if n < 2 {
        0.0
    } else {
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * (var / n as f64).sqrt()
    };
    IpRow {
        q_keep,
        d_keep,
        mean_fraction: mean,
        ci95_low: mean - half_width,
        ci95_high: mean + half_width,
        pairs: n,
        excluded,
    }
}

/// Writes rows as CSV with a header line.
pub fn write_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::Error::InvalidParameter(format!("csv: {other:?}")),
    }
}
