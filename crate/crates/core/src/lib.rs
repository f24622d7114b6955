//! Approximate top-k maximum inner product search over learned sparse
//! embeddings.
//!
//! The index pairs a statically pruned inverted index, whose lists are split
//! into geometrically cohesive blocks each carrying a (optionally pruned and
//! 8-bit quantized) upper-bound summary, with a forward index that holds the
//! exact document vectors. At query time the largest query coordinates are
//! traversed one at a time; a block is evaluated only if its summary score is
//! competitive with the current top-k threshold.
//!
//! ```
//! use seismic_core::{BuildParams, Collection, InvertedIndex, SearchParams, SparseVector};
//!
//! let docs = Collection::new(
//!     8,
//!     vec![
//!         SparseVector::from_pairs([(1, 1.0), (3, 0.5)]).unwrap(),
//!         SparseVector::from_pairs([(1, 2.0), (5, 1.0)]).unwrap(),
//!     ],
//! )
//! .unwrap();
//! let index = InvertedIndex::build(&docs, &BuildParams::default()).unwrap();
//! let query = SparseVector::from_pairs([(1, 1.0)]).unwrap();
//! let result = index.search(&query, &SearchParams::new(1, 4, 1.0)).unwrap();
//! assert_eq!(result.hits[0].doc, 1);
//! ```

pub mod analysis;
pub mod error;
pub mod eval;
pub mod forward;
pub mod index;
pub mod io;
pub mod search;
pub mod sparse;
pub mod synthetic;
pub mod topk;

pub use error::{Error, Result};
pub use forward::{ForwardIndex, Precision};
pub use index::{
    Block, BlockingStrategy, BuildParams, InvertedIndex, PostingList, Quantization,
    QuantizedSummary, SizeReport, Summary, SummaryStrategy,
};
pub use search::{exact_search, query_cut, Hit, SearchParams, SearchResult, SearchStats, Searcher};
pub use sparse::{Collection, Entry, SparseVector};
