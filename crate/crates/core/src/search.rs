//! Query processing.
//!
//! [`Searcher::search`] traverses the lists of the `cut` largest query
//! coordinates, one coordinate at a time. A block is skipped when the top-k
//! heap is full and the block's summary score falls below
//! `heap_min / heap_factor`; otherwise every not-yet-seen document in it is
//! scored exactly through the forward index.
//!
//! [`exact_search`] scores the whole collection and is the accuracy oracle.

use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::sparse::{Collection, SparseVector};
use crate::topk::TopK;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub score: f32,
    pub doc: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub k: usize,
    /// Number of largest query entries whose lists are traversed.
    pub cut: usize,
    /// Relaxation of the skip test, in (0, 1]; 1 skips only blocks whose
    /// summary score is below the current k-th score.
    pub heap_factor: f32,
}

impl SearchParams {
    pub fn new(k: usize, cut: usize, heap_factor: f32) -> Self {
        SearchParams {
            k,
            cut,
            heap_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.cut < 1 {
            return Err(Error::InvalidParameter("cut must be at least 1".into()));
        }
        if !(self.heap_factor > 0.0 && self.heap_factor <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "heap_factor must lie in (0, 1], got {}",
                self.heap_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SearchStats {
    pub blocks_visited: usize,
    pub blocks_skipped: usize,
    pub documents_scored: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchResult {
    /// Best first: score descending, ties by ascending doc id.
    pub hits: Vec<Hit>,
    pub stats: SearchStats,
}

impl SearchResult {
    pub fn doc_ids(&self) -> Vec<u32> {
        self.hits.iter().map(|h| h.doc).collect()
    }
}

/// Coordinates of the `cut` largest-magnitude entries of `query`, largest
/// first (ties by ascending coordinate).
pub fn query_cut(query: &SparseVector, cut: usize) -> Result<Vec<u32>> {
    if query.is_empty() {
        return Err(Error::EmptyVector);
    }
    let mut order = query.positions_by_magnitude();
    order.truncate(cut);
    Ok(order.into_iter().map(|p| query.coordinates()[p]).collect())
}

/// Executes queries against one index, reusing scratch buffers between
/// calls. Each searcher is single-threaded; run one per thread for
/// concurrent querying.
pub struct Searcher<'a> {
    index: &'a InvertedIndex,
    dense: Vec<f32>,
    visited: Vec<u32>,
    epoch: u32,
}

impl<'a> Searcher<'a> {
    pub fn new(index: &'a InvertedIndex) -> Self {
        Searcher {
            index,
            dense: vec![0.0; index.dim() as usize],
            visited: vec![0; index.n_docs()],
            epoch: 0,
        }
    }

    pub fn search(&mut self, query: &SparseVector, params: &SearchParams) -> Result<SearchResult> {
        params.validate()?;
        let dim = self.index.dim();
        if let Some(c) = query.max_coordinate() {
            if c >= dim {
                return Err(Error::DimensionMismatch { coordinate: c, dim });
            }
        }
        if query.is_empty() {
            return Ok(SearchResult::default());
        }

        self.epoch = match self.epoch.checked_add(1) {
            Some(e) => e,
            None => {
                self.visited.fill(0);
                1
            }
        };
        let epoch = self.epoch;
        for e in query.entries() {
            self.dense[e.coordinate as usize] = e.value;
        }

        let forward = self.index.forward();
        let dense = &self.dense;
        let visited = &mut self.visited;
        let mut heap = TopK::new(params.k);
        let mut stats = SearchStats::default();

        for coordinate in query_cut(query, params.cut)? {
            for block in &self.index.lists()[coordinate as usize].blocks {
                if heap.is_full() {
                    let r = block.summary.score_dense(dense);
                    let threshold = heap.min_score().unwrap() / params.heap_factor;
                    if r < threshold {
                        stats.blocks_skipped += 1;
                        continue;
                    }
                }
                stats.blocks_visited += 1;
                for &doc in &block.doc_ids {
                    let seen = &mut visited[doc as usize];
                    if *seen == epoch {
                        continue;
                    }
                    *seen = epoch;
                    stats.documents_scored += 1;
                    heap.push(forward.score_dense(dense, doc), doc);
                }
            }
        }

        for &c in query.coordinates() {
            self.dense[c as usize] = 0.0;
        }
        Ok(SearchResult {
            hits: heap.into_sorted(),
            stats,
        })
    }
}

/// Exhaustive top-k over the whole collection.
pub fn exact_search(collection: &Collection, query: &SparseVector, k: usize) -> SearchResult {
    let width =
        (collection.dim() as usize).max(query.max_coordinate().map_or(0, |c| c as usize + 1));
    let mut dense = vec![0.0f32; width];
    for e in query.entries() {
        dense[e.coordinate as usize] = e.value;
    }
    let mut heap = TopK::new(k);
    for (doc, v) in collection.iter().enumerate() {
        heap.push(v.dot_dense(&dense), doc as u32);
    }
    SearchResult {
        hits: heap.into_sorted(),
        stats: SearchStats {
            blocks_visited: 0,
            blocks_skipped: 0,
            documents_scored: collection.len(),
        },
    }
}
