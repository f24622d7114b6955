//! On-disk formats for collections, JSONL ingestion and ranked result files.
//!
//! Collection file (all integers little-endian):
//!
//! ```text
//! magic   b"SVC1"
//! version u32 = 1
//! dim     u32
//! count   u64
//! count x { nnz u32, nnz x coordinate u32, nnz x value f32 }
//! ```
//!
//! Ranked results (ground truth and approximate runs alike) are tab-separated
//! text, one line per hit: `query_id  rank  doc_id  score`, ranks 1-based.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::search::Hit;
use crate::sparse::{Collection, SparseVector};

pub const COLLECTION_MAGIC: [u8; 4] = *b"SVC1";
pub const COLLECTION_VERSION: u32 = 1;
/// magic + version + dim + count.
pub const COLLECTION_HEADER_BYTES: u64 = 4 + 4 + 4 + 8;

/// Little-endian cursor over an in-memory buffer.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated { context });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn array<const N: usize>(&mut self, context: &'static str) -> Result<[u8; N]> {
        Ok(self.take(N, context)?.try_into().unwrap())
    }

    pub(crate) fn u8(&mut self, context: &'static str) -> Result<u8> {
        Ok(self.array::<1>(context)?[0])
    }

    pub(crate) fn u32(&mut self, context: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(context)?))
    }

    pub(crate) fn u64(&mut self, context: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(context)?))
    }

    pub(crate) fn f32(&mut self, context: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array(context)?))
    }

    pub(crate) fn f64(&mut self, context: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(context)?))
    }

    pub(crate) fn u32_vec(&mut self, n: usize, context: &'static str) -> Result<Vec<u32>> {
        let bytes = self.take(
            n.checked_mul(4).ok_or(Error::Truncated { context })?,
            context,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn f32_vec(&mut self, n: usize, context: &'static str) -> Result<Vec<f32>> {
        let bytes = self.take(
            n.checked_mul(4).ok_or(Error::Truncated { context })?,
            context,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(self, context: &'static str) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            extra => Err(Error::TrailingData { context, extra }),
        }
    }
}

pub(crate) fn put_u32s(out: &mut Vec<u8>, xs: &[u32]) {
    out.reserve(xs.len() * 4);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, xs: &[f32]) {
    out.reserve(xs.len() * 4);
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

/// Serializes `collection`, returning the number of bytes written.
pub fn write_collection<W: Write>(collection: &Collection, mut out: W) -> Result<u64> {
    let mut buf = Vec::with_capacity(
        COLLECTION_HEADER_BYTES as usize + collection.len() * 4 + collection.nnz() * 8,
    );
    buf.extend_from_slice(&COLLECTION_MAGIC);
    buf.extend_from_slice(&COLLECTION_VERSION.to_le_bytes());
    buf.extend_from_slice(&collection.dim().to_le_bytes());
    buf.extend_from_slice(&(collection.len() as u64).to_le_bytes());
    for v in collection {
        buf.extend_from_slice(&(v.nnz() as u32).to_le_bytes());
        put_u32s(&mut buf, v.coordinates());
        put_f32s(&mut buf, v.values());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(buf.len() as u64)
}

/// Parses and validates a collection file.
pub fn read_collection<R: Read>(mut source: R) -> Result<Collection> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    decode_collection(&buf)
}

pub fn decode_collection(bytes: &[u8]) -> Result<Collection> {
    let mut r = ByteReader::new(bytes);
    let magic = r.array::<4>("collection magic")?;
    if magic != COLLECTION_MAGIC {
        return Err(Error::BadMagic {
            expected: COLLECTION_MAGIC,
            found: magic,
        });
    }
    let version = r.u32("collection version")?;
    if version != COLLECTION_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: COLLECTION_VERSION,
            found: version,
        });
    }
    let dim = r.u32("collection dim")?;
    let count = r.u64("collection count")?;
    // Each vector needs at least its nnz field.
    if count > (r.remaining() / 4) as u64 {
        return Err(Error::Truncated {
            context: "collection vectors",
        });
    }
    let mut vectors = Vec::with_capacity(count as usize);
    for vector in 0..count as usize {
        let nnz = r.u32("vector nnz")? as usize;
        let coordinates = r.u32_vec(nnz, "vector coordinates")?;
        let values = r.f32_vec(nnz, "vector values")?;
        let v = SparseVector::from_raw(coordinates, values);
        v.validate(vector)?;
        if let Some(c) = v.max_coordinate() {
            if c >= dim {
                return Err(Error::CoordinateOutOfRange {
                    vector,
                    coordinate: c,
                    dim,
                });
            }
        }
        vectors.push(v);
    }
    r.finish("collection")?;
    Collection::new(dim, vectors)
}

pub fn save_collection(collection: &Collection, path: impl AsRef<Path>) -> Result<u64> {
    write_collection(collection, BufWriter::new(File::create(path)?))
}

pub fn load_collection(path: impl AsRef<Path>) -> Result<Collection> {
    read_collection(BufReader::new(File::open(path)?))
}

/// Reads one JSON object per line mapping coordinate strings to values.
/// Negative values are rejected (documents must be nonnegative).
pub fn ingest_jsonl<R: BufRead>(source: R, dim: u32) -> Result<Collection> {
    ingest(source, dim, false)
}

/// Like [`ingest_jsonl`], but negative values only raise a warning.
pub fn ingest_jsonl_queries<R: BufRead>(source: R, dim: u32) -> Result<Collection> {
    ingest(source, dim, true)
}

fn ingest<R: BufRead>(source: R, dim: u32, allow_negative: bool) -> Result<Collection> {
    let mut vectors = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let malformed = |message: String| Error::Malformed {
            line: lineno,
            message,
        };
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let mut pairs = Vec::with_capacity(map.len());
        let mut warned_negative = false;
        for (key, value) in &map {
            let coordinate: u32 = key
                .trim()
                .parse()
                .map_err(|_| malformed(format!("key {key:?} is not a coordinate")))?;
            let value = value
                .as_f64()
                .ok_or_else(|| malformed(format!("value for {key:?} is not a number")))?
                as f32;
            if coordinate >= dim {
                return Err(Error::CoordinateOutOfRange {
                    vector: i,
                    coordinate,
                    dim,
                });
            }
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    vector: i,
                    coordinate,
                    value,
                });
            }
            if value < 0.0 {
                if !allow_negative {
                    return Err(Error::NegativeValue {
                        vector: i,
                        coordinate,
                        value,
                    });
                }
                if !warned_negative {
                    warn!("line {lineno}: negative query value at coordinate {coordinate}");
                    warned_negative = true;
                }
            }
            pairs.push((coordinate, value));
        }
        let v = SparseVector::from_pairs(pairs).map_err(|e| malformed(e.to_string()))?;
        if v.is_empty() {
            warn!("line {lineno}: vector has no non-zero entries");
        }
        vectors.push(v);
    }
    Collection::new(dim, vectors)
}

/// Ranked hits per query id, as stored in a ground-truth or run file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultSet {
    pub queries: BTreeMap<u32, Vec<Hit>>,
}

impl ResultSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: u32, hits: Vec<Hit>) {
        self.queries.insert(query, hits);
    }

    pub fn get(&self, query: u32) -> Option<&[Hit]> {
        self.queries.get(&query).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u32, &Vec<Hit>)> + '_ {
        self.queries.iter()
    }
}

impl FromIterator<(u32, Vec<Hit>)> for ResultSet {
    fn from_iter<I: IntoIterator<Item = (u32, Vec<Hit>)>>(iter: I) -> Self {
        ResultSet {
            queries: iter.into_iter().collect(),
        }
    }
}

pub fn write_results<W: Write>(results: &ResultSet, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for (query, hits) in &results.queries {
        for (rank, hit) in hits.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", query, rank + 1, hit.doc, hit.score)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses a results file, checking that ranks run 1..k per query and scores
/// never increase.
pub fn read_results<R: BufRead>(source: R) -> Result<ResultSet> {
    let mut results = ResultSet::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(malformed(format!(
                "expected 4 fields, found {}",
                fields.len()
            )));
        }
        let query: u32 = fields[0]
            .parse()
            .map_err(|_| malformed(format!("bad query id {:?}", fields[0])))?;
        let rank: usize = fields[1]
            .parse()
            .map_err(|_| malformed(format!("bad rank {:?}", fields[1])))?;
        let doc: u32 = fields[2]
            .parse()
            .map_err(|_| malformed(format!("bad doc id {:?}", fields[2])))?;
        let score: f32 = fields[3]
            .parse()
            .map_err(|_| malformed(format!("bad score {:?}", fields[3])))?;
        let hits = results.queries.entry(query).or_default();
        if rank != hits.len() + 1 {
            return Err(malformed(format!(
                "query {query}: expected rank {}, found {rank}",
                hits.len() + 1
            )));
        }
        if let Some(prev) = hits.last() {
            if score > prev.score {
                return Err(malformed(format!(
                    "query {query}: scores increase at rank {rank}"
                )));
            }
        }
        hits.push(Hit { score, doc });
    }
    Ok(results)
}

pub fn save_results(results: &ResultSet, path: impl AsRef<Path>) -> Result<()> {
    write_results(results, File::create(path)?)
}

pub fn load_results(path: impl AsRef<Path>) -> Result<ResultSet> {
    read_results(BufReader::new(File::open(path)?))
}
