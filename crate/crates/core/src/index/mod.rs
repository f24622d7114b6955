//! Construction of the blocked, summarized inverted index.
//!
//! For every coordinate the documents with a non-zero value are sorted by
//! that value (descending), truncated to the `lambda` highest-impact ones,
//! partitioned into at most `beta` blocks, and each block receives a summary:
//! the coordinate-wise maximum of its members, pruned to its alpha-mass
//! subvector (or its top `s` entries) and optionally 8-bit quantized.

mod blocking;
mod format;
mod summary;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{ForwardIndex, Precision};
use crate::search::{SearchParams, SearchResult, Searcher};
use crate::sparse::{Collection, SparseVector};

pub use blocking::{fixed_blocking, geometric_blocking};
pub use format::{
    load_index, read_index, save_index, write_index, SizeReport, INDEX_MAGIC, INDEX_VERSION,
};
use summary::BlockMax;
pub use summary::{dequantize, quantize_values, summarize, QuantizedSummary, Summary, LEVELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockingStrategy {
    /// Random representatives, assignment by maximum inner product.
    Geometric,
    /// Consecutive chunks of the impact-sorted list.
    Fixed { block_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryStrategy {
    /// Keep the alpha-mass subvector of the block maximum.
    AlphaMass,
    /// Keep the `s` largest entries of the block maximum.
    FixedTop { s: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantization {
    U8,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildParams {
    /// Maximum posting-list length after static pruning.
    pub lambda: usize,
    /// Maximum number of blocks per list (geometric blocking).
    pub beta: usize,
    /// Fraction of summary L1 mass retained (alpha-mass summaries).
    pub alpha: f64,
    pub blocking: BlockingStrategy,
    pub summary: SummaryStrategy,
    pub quantization: Quantization,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            lambda: 6000,
            beta: 400,
            alpha: 0.4,
            blocking: BlockingStrategy::Geometric,
            summary: SummaryStrategy::AlphaMass,
            quantization: Quantization::U8,
            precision: Precision::Full,
            seed: 0,
        }
    }
}

impl BuildParams {
    /// Parameters under which every list is complete, forms a single block
    /// and keeps an exact summary.
    pub fn unpruned(n_docs: usize) -> Self {
        BuildParams {
            lambda: n_docs.max(1),
            beta: 1,
            alpha: 1.0,
            quantization: Quantization::None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.lambda < 1 {
            return bad("lambda must be at least 1".into());
        }
        if self.beta < 1 {
            return bad("beta must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if let SummaryStrategy::FixedTop { s: 0 } = self.summary {
            return bad("fixed summary size must be at least 1".into());
        }
        if let BlockingStrategy::Fixed { block_size: 0 } = self.blocking {
            return bad("fixed block size must be at least 1".into());
        }
        Ok(())
    }
}

impl fmt::Display for BlockingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockingStrategy::Geometric => write!(f, "geometric"),
            BlockingStrategy::Fixed { block_size } => write!(f, "fixed:{block_size}"),
        }
    }
}

impl FromStr for BlockingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "geometric" => Ok(BlockingStrategy::Geometric),
            Some(("fixed", n)) => n
                .parse()
                .ok()
                .filter(|&b| b >= 1)
                .map(|block_size| BlockingStrategy::Fixed { block_size })
                .ok_or_else(|| Error::InvalidParameter(format!("bad block size in {s:?}"))),
            _ => Err(Error::InvalidParameter(format!(
                "blocking must be `geometric` or `fixed:<size>`, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for SummaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SummaryStrategy::AlphaMass => write!(f, "alpha-mass"),
            SummaryStrategy::FixedTop { s } => write!(f, "fixed:{s}"),
        }
    }
}

impl FromStr for SummaryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "alpha-mass" => Ok(SummaryStrategy::AlphaMass),
            Some(("fixed", n)) => n
                .parse()
                .ok()
                .filter(|&v| v >= 1)
                .map(|s| SummaryStrategy::FixedTop { s })
                .ok_or_else(|| Error::InvalidParameter(format!("bad summary size in {s:?}"))),
            _ => Err(Error::InvalidParameter(format!(
                "summary must be `alpha-mass` or `fixed:<s>`, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Quantization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantization::U8 => "u8",
            Quantization::None => "none",
        })
    }
}

impl FromStr for Quantization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(Quantization::U8),
            "none" => Ok(Quantization::None),
            _ => Err(Error::InvalidParameter(format!(
                "quantization must be `u8` or `none`, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Full => "full",
            Precision::Half => "half",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Precision::Full),
            "half" => Ok(Precision::Half),
            _ => Err(Error::InvalidParameter(format!(
                "precision must be `full` or `half`, got {s:?}"
            ))),
        }
    }
}

/// A set of documents from one posting list that is evaluated atomically.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub doc_ids: Vec<u32>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PostingList {
    pub blocks: Vec<Block>,
}

impl PostingList {
    /// Number of documents across all blocks.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.doc_ids.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.iter().flat_map(|b| b.doc_ids.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(crate) dim: u32,
    pub(crate) params: BuildParams,
    pub(crate) lists: Vec<PostingList>,
    pub(crate) forward: ForwardIndex,
}

/// Documents with a non-zero value at `coordinate`, sorted by that value
/// (descending, ties by ascending id), truncated to `lambda`.
pub fn build_postings(collection: &Collection, coordinate: u32, lambda: usize) -> Vec<u32> {
    let mut hits: Vec<(f32, u32)> = collection
        .iter()
        .enumerate()
        .filter_map(|(doc, v)| {
            let x = v.get(coordinate);
            (x != 0.0).then_some((x, doc as u32))
        })
        .collect();
    sort_by_impact(&mut hits);
    hits.truncate(lambda);
    hits.into_iter().map(|(_, d)| d).collect()
}

fn sort_by_impact(hits: &mut [(f32, u32)]) {
    hits.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
}

/// All posting lists at once: a counting-sort transpose of the collection.
fn transpose(collection: &Collection) -> (Vec<usize>, Vec<(f32, u32)>) {
    let dim = collection.dim() as usize;
    let mut offsets = vec![0usize; dim + 1];
    for v in collection {
        for &c in v.coordinates() {
            offsets[c as usize + 1] += 1;
        }
    }
    for i in 0..dim {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut entries = vec![(0.0f32, 0u32); collection.nnz()];
    for (doc, v) in collection.iter().enumerate() {
        for e in v.entries() {
            let slot = &mut cursor[e.coordinate as usize];
            entries[*slot] = (e.value, doc as u32);
            *slot += 1;
        }
    }
    (offsets, entries)
}

/// Per-thread scratch for [`build_list`].
struct ListScratch {
    assign: blocking::AssignScratch,
    block_max: BlockMax,
}

fn build_list(
    scratch: &mut ListScratch,
    collection: &Collection,
    coordinate: u32,
    impacts: &mut [(f32, u32)],
    params: &BuildParams,
) -> Result<PostingList> {
    sort_by_impact(impacts);
    let postings: Vec<u32> = impacts
        .iter()
        .take(params.lambda)
        .map(|&(_, d)| d)
        .collect();
    if postings.is_empty() {
        return Ok(PostingList::default());
    }
    let partition = match params.blocking {
        BlockingStrategy::Geometric => scratch.assign.geometric_blocking(
            &postings,
            collection,
            params.beta,
            blocking::list_seed(params.seed, coordinate),
        ),
        BlockingStrategy::Fixed { block_size } => fixed_blocking(&postings, block_size),
    };
    let blocks = partition
        .into_iter()
        .map(|doc_ids| {
            let full = scratch
                .block_max
                .summarize(doc_ids.iter().map(|&d| &collection[d as usize]))?;
            let pruned = prune_summary(&full, params)?;
            let summary = match params.quantization {
                Quantization::None => Summary::Raw(pruned),
                Quantization::U8 => Summary::Quantized(QuantizedSummary::quantize(&pruned)?),
            };
            Ok(Block { doc_ids, summary })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PostingList { blocks })
}

/// Applies the configured summary pruning to a block maximum.
pub fn prune_summary(full: &SparseVector, params: &BuildParams) -> Result<SparseVector> {
    match params.summary {
        SummaryStrategy::AlphaMass => full.alpha_mass_subvector(params.alpha),
        SummaryStrategy::FixedTop { s } => Ok(full.top_s_subvector(s)),
    }
}

impl InvertedIndex {
    /// Builds the index. Lists are built in parallel on the current rayon
    /// pool; the result does not depend on the schedule.
    pub fn build(collection: &Collection, params: &BuildParams) -> Result<Self> {
        params.validate()?;
        collection.check_nonnegative()?;
        let (offsets, mut entries) = transpose(collection);

        let mut slices: Vec<&mut [(f32, u32)]> = Vec::with_capacity(offsets.len() - 1);
        let mut rest: &mut [(f32, u32)] = &mut entries;
        for w in offsets.windows(2) {
            let (head, tail) = rest.split_at_mut(w[1] - w[0]);
            slices.push(head);
            rest = tail;
        }
        let lists = slices
            .into_par_iter()
            .enumerate()
            .map_init(
                || ListScratch {
                    assign: blocking::AssignScratch::new(collection.dim()),
                    block_max: BlockMax::new(collection.dim()),
                },
                |scratch, (c, impacts)| build_list(scratch, collection, c as u32, impacts, params),
            )
            .collect::<Result<Vec<_>>>()?;

        Ok(InvertedIndex {
            dim: collection.dim(),
            params: *params,
            lists,
            forward: ForwardIndex::build(collection, params.precision),
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn n_docs(&self) -> usize {
        self.forward.len()
    }

    pub fn params(&self) -> &BuildParams {
        &self.params
    }

    pub fn lists(&self) -> &[PostingList] {
        &self.lists
    }

    pub fn list(&self, coordinate: u32) -> Option<&PostingList> {
        self.lists.get(coordinate as usize)
    }

    pub fn forward(&self) -> &ForwardIndex {
        &self.forward
    }

    pub fn n_blocks(&self) -> usize {
        self.lists.iter().map(|l| l.blocks.len()).sum()
    }

    pub fn blocks(&self) -> impl Iterator<Item = (u32, &Block)> + '_ {
        self.lists
            .iter()
            .enumerate()
            .flat_map(|(c, l)| l.blocks.iter().map(move |b| (c as u32, b)))
    }

    /// A reusable query executor holding per-query scratch space.
    pub fn searcher(&self) -> Searcher<'_> {
        Searcher::new(self)
    }

    pub fn search(&self, query: &SparseVector, params: &SearchParams) -> Result<SearchResult> {
        self.searcher().search(query, params)
    }

    pub fn size_report(&self) -> SizeReport {
        SizeReport::of(self)
    }
}
