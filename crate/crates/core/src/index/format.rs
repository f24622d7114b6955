//! Index file, version 1. All integers and floats little-endian.
//!
//! ```text
//! header
//!   magic          b"SVI1"
//!   version        u32 = 1
//!   lambda         u64
//!   beta           u64
//!   alpha          f64
//!   blocking       u8 (0 geometric, 1 fixed)   block_size u64 (0 if geometric)
//!   summary        u8 (0 alpha-mass, 1 fixed)  s u64 (0 if alpha-mass)
//!   quantization   u8 (0 none, 1 u8)
//!   precision      u8 (0 full, 1 half)
//!   seed           u64
//!   dim            u32
//!   n_docs         u64
//!   total_entries  u64   forward-index entry count
//!   n_lists        u32   non-empty posting lists
//! forward index
//!   n_docs x u64         end offset of each document
//!   total_entries x u32  coordinates
//!   total_entries x f32|f16 values
//! posting lists, ascending coordinate, non-empty only
//!   coordinate u32, n_blocks u32
//!   n_blocks x block
//!     n_docs u32, n_docs x u32 doc ids
//!     nnz u32, nnz x u32 summary coordinates
//!     quantized: min f32, step f32, nnz x u8 codes
//!     raw:       nnz x f32 values
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use half::f16;

use super::{
    Block, BlockingStrategy, BuildParams, InvertedIndex, PostingList, Quantization,
    QuantizedSummary, Summary, SummaryStrategy,
};
use crate::error::{Error, Result};
use crate::forward::{ForwardIndex, Precision, Values};
use crate::io::{put_f32s, put_u32s, ByteReader};
use crate::sparse::SparseVector;

pub const INDEX_MAGIC: [u8; 4] = *b"SVI1";
pub const INDEX_VERSION: u32 = 1;
pub(crate) const HEADER_BYTES: usize =
    4 + 4 + 8 + 8 + 8 + (1 + 8) + (1 + 8) + 1 + 1 + 8 + 4 + 8 + 8 + 4;

/// Serialized size of each index component, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeReport {
    pub header: usize,
    /// List headers, block lengths and document ids.
    pub postings: usize,
    /// Summary coordinates.
    pub summary_coordinates: usize,
    /// Summary values: 1 byte per entry quantized, 4 raw.
    pub summary_values: usize,
    /// Per-summary length field, plus min and step when quantized.
    pub summary_overhead: usize,
    pub forward: usize,
    pub total: usize,
}

impl SizeReport {
    pub fn summaries(&self) -> usize {
        self.summary_coordinates + self.summary_values + self.summary_overhead
    }

    pub(crate) fn of(index: &InvertedIndex) -> Self {
        let mut r = SizeReport {
            header: HEADER_BYTES,
            forward: index.forward.size_bytes() - 8, // leading zero offset is implicit
            ..Default::default()
        };
        for list in index.lists.iter().filter(|l| !l.is_empty()) {
            r.postings += 8;
            for block in &list.blocks {
                r.postings += 4 + 4 * block.doc_ids.len();
                let nnz = block.summary.nnz();
                r.summary_coordinates += 4 * nnz;
                match &block.summary {
                    Summary::Raw(_) => {
                        r.summary_overhead += 4;
                        r.summary_values += 4 * nnz;
                    }
                    Summary::Quantized(_) => {
                        r.summary_overhead += 4 + 8;
                        r.summary_values += nnz;
                    }
                }
            }
        }
        r.total = r.header + r.postings + r.summaries() + r.forward;
        r
    }
}

fn blocking_tag(b: BlockingStrategy) -> (u8, u64) {
    match b {
        BlockingStrategy::Geometric => (0, 0),
        BlockingStrategy::Fixed { block_size } => (1, block_size as u64),
    }
}

fn summary_tag(s: SummaryStrategy) -> (u8, u64) {
    match s {
        SummaryStrategy::AlphaMass => (0, 0),
        SummaryStrategy::FixedTop { s } => (1, s as u64),
    }
}

pub(crate) fn encode_index(index: &InvertedIndex) -> Vec<u8> {
    let report = SizeReport::of(index);
    let mut out = Vec::with_capacity(report.total);
    let p = &index.params;
    out.extend_from_slice(&INDEX_MAGIC);
    out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
    out.extend_from_slice(&(p.lambda as u64).to_le_bytes());
    out.extend_from_slice(&(p.beta as u64).to_le_bytes());
    out.extend_from_slice(&p.alpha.to_le_bytes());
    let (tag, size) = blocking_tag(p.blocking);
    out.push(tag);
    out.extend_from_slice(&size.to_le_bytes());
    let (tag, s) = summary_tag(p.summary);
    out.push(tag);
    out.extend_from_slice(&s.to_le_bytes());
    out.push(match p.quantization {
        Quantization::None => 0,
        Quantization::U8 => 1,
    });
    out.push(match p.precision {
        Precision::Full => 0,
        Precision::Half => 1,
    });
    out.extend_from_slice(&p.seed.to_le_bytes());
    out.extend_from_slice(&index.dim.to_le_bytes());
    let fwd = &index.forward;
    out.extend_from_slice(&(fwd.len() as u64).to_le_bytes());
    out.extend_from_slice(&(fwd.total_entries() as u64).to_le_bytes());
    let non_empty = index.lists.iter().filter(|l| !l.is_empty()).count();
    out.extend_from_slice(&(non_empty as u32).to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_BYTES);

    for off in &fwd.offsets()[1..] {
        out.extend_from_slice(&off.to_le_bytes());
    }
    put_u32s(&mut out, fwd.raw_coordinates());
    match fwd.raw_values() {
        Values::Full(v) => put_f32s(&mut out, v),
        Values::Half(v) => {
            for h in v {
                out.extend_from_slice(&h.to_le_bytes());
            }
        }
    }

    for (coordinate, list) in index.lists.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        out.extend_from_slice(&(coordinate as u32).to_le_bytes());
        out.extend_from_slice(&(list.blocks.len() as u32).to_le_bytes());
        for block in &list.blocks {
            out.extend_from_slice(&(block.doc_ids.len() as u32).to_le_bytes());
            put_u32s(&mut out, &block.doc_ids);
            out.extend_from_slice(&(block.summary.nnz() as u32).to_le_bytes());
            put_u32s(&mut out, block.summary.coordinates());
            match &block.summary {
                Summary::Raw(v) => put_f32s(&mut out, v.values()),
                Summary::Quantized(q) => {
                    out.extend_from_slice(&q.min().to_le_bytes());
                    out.extend_from_slice(&q.step().to_le_bytes());
                    out.extend_from_slice(q.codes());
                }
            }
        }
    }
    debug_assert_eq!(out.len(), report.total);
    out
}

/// Serializes the index; returns the number of bytes written.
pub fn write_index<W: Write>(index: &InvertedIndex, mut out: W) -> Result<u64> {
    let bytes = encode_index(index);
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(bytes.len() as u64)
}

pub fn read_index<R: Read>(mut source: R) -> Result<InvertedIndex> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    decode_index(&buf)
}

pub fn save_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<u64> {
    write_index(index, BufWriter::new(File::create(path)?))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<InvertedIndex> {
    read_index(BufReader::new(File::open(path)?))
}

fn invalid(message: impl Into<String>) -> Error {
    Error::InvalidParameter(format!("index file: {}", message.into()))
}

pub(crate) fn decode_index(bytes: &[u8]) -> Result<InvertedIndex> {
    let mut r = ByteReader::new(bytes);
    let magic = r.array::<4>("index magic")?;
    if magic != INDEX_MAGIC {
        return Err(Error::BadMagic {
            expected: INDEX_MAGIC,
            found: magic,
        });
    }
    let version = r.u32("index version")?;
    if version != INDEX_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: INDEX_VERSION,
            found: version,
        });
    }
    let lambda = r.u64("lambda")? as usize;
    let beta = r.u64("beta")? as usize;
    let alpha = r.f64("alpha")?;
    let blocking = match (r.u8("blocking")?, r.u64("block size")?) {
        (0, _) => BlockingStrategy::Geometric,
        (1, n) => BlockingStrategy::Fixed {
            block_size: n as usize,
        },
        (t, _) => return Err(invalid(format!("unknown blocking tag {t}"))),
    };
    let summary = match (r.u8("summary")?, r.u64("summary size")?) {
        (0, _) => SummaryStrategy::AlphaMass,
        (1, s) => SummaryStrategy::FixedTop { s: s as usize },
        (t, _) => return Err(invalid(format!("unknown summary tag {t}"))),
    };
    let quantization = match r.u8("quantization")? {
        0 => Quantization::None,
        1 => Quantization::U8,
        t => return Err(invalid(format!("unknown quantization tag {t}"))),
    };
    let precision = match r.u8("precision")? {
        0 => Precision::Full,
        1 => Precision::Half,
        t => return Err(invalid(format!("unknown precision tag {t}"))),
    };
    let seed = r.u64("seed")?;
    let params = BuildParams {
        lambda,
        beta,
        alpha,
        blocking,
        summary,
        quantization,
        precision,
        seed,
    };
    params.validate()?;
    let dim = r.u32("dim")?;
    let n_docs = r.u64("n_docs")? as usize;
    let total = r.u64("total entries")? as usize;
    let n_lists = r.u32("list count")? as usize;

    if n_docs > r.remaining() / 8 {
        return Err(Error::Truncated {
            context: "forward offsets",
        });
    }
    let mut offsets = Vec::with_capacity(n_docs + 1);
    offsets.push(0u64);
    for _ in 0..n_docs {
        offsets.push(r.u64("forward offsets")?);
    }
    let coordinates = r.u32_vec(total, "forward coordinates")?;
    let values = match precision {
        Precision::Full => Values::Full(r.f32_vec(total, "forward values")?),
        Precision::Half => {
            let raw = r.take(
                total.checked_mul(2).ok_or(Error::Truncated {
                    context: "forward values",
                })?,
                "forward values",
            )?;
            Values::Half(
                raw.chunks_exact(2)
                    .map(|c| f16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            )
        }
    };
    let forward = ForwardIndex::from_parts(dim, offsets, coordinates, values)?;

    let mut lists = vec![PostingList::default(); dim as usize];
    let mut previous: Option<u32> = None;
    for _ in 0..n_lists {
        let coordinate = r.u32("list coordinate")?;
        if coordinate >= dim || previous.is_some_and(|p| p >= coordinate) {
            return Err(invalid(format!(
                "list coordinate {coordinate} out of order or range"
            )));
        }
        previous = Some(coordinate);
        let n_blocks = r.u32("block count")? as usize;
        if n_blocks == 0 {
            return Err(invalid(format!("list {coordinate} has no blocks")));
        }
        let mut blocks = Vec::with_capacity(n_blocks.min(r.remaining() / 8));
        for _ in 0..n_blocks {
            let n = r.u32("block length")? as usize;
            let doc_ids = r.u32_vec(n, "block doc ids")?;
            if doc_ids.is_empty() || doc_ids.iter().any(|&d| d as usize >= n_docs) {
                return Err(invalid(format!("list {coordinate}: bad block membership")));
            }
            let nnz = r.u32("summary nnz")? as usize;
            let coords = r.u32_vec(nnz, "summary coordinates")?;
            if coords.windows(2).any(|w| w[0] >= w[1]) || coords.last().is_some_and(|&c| c >= dim) {
                return Err(invalid(format!(
                    "list {coordinate}: bad summary coordinates"
                )));
            }
            let summary = match quantization {
                Quantization::None => {
                    let v = r.f32_vec(nnz, "summary values")?;
                    let v = SparseVector::from_raw(coords, v);
                    v.validate(coordinate as usize)?;
                    Summary::Raw(v)
                }
                Quantization::U8 => {
                    let min = r.f32("summary min")?;
                    let step = r.f32("summary step")?;
                    let codes = r.take(nnz, "summary codes")?.to_vec();
                    Summary::Quantized(QuantizedSummary::from_parts(coords, codes, min, step))
                }
            };
            blocks.push(Block { doc_ids, summary });
        }
        lists[coordinate as usize] = PostingList { blocks };
    }
    r.finish("index")?;

    Ok(InvertedIndex {
        dim,
        params,
        lists,
        forward,
    })
}
