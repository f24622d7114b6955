//! Forward index: document id to exact vector.
//!
//! All documents live in two flat arrays (coordinates and values) addressed
//! through an offsets table, so scoring a scattered set of documents touches
//! contiguous memory per document. Values may be stored at half precision.

use half::f16;

use crate::error::{Error, Result};
use crate::sparse::{Collection, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Full,
    Half,
}

impl Precision {
    pub fn value_bytes(self) -> usize {
        match self {
            Precision::Full => 4,
            Precision::Half => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Values {
    Full(Vec<f32>),
    Half(Vec<f16>),
}

impl Values {
    fn len(&self) -> usize {
        match self {
            Values::Full(v) => v.len(),
            Values::Half(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardIndex {
    dim: u32,
    offsets: Vec<u64>,
    coordinates: Vec<u32>,
    values: Values,
}

impl ForwardIndex {
    pub fn build(collection: &Collection, precision: Precision) -> Self {
        let total = collection.nnz();
        let mut offsets = Vec::with_capacity(collection.len() + 1);
        let mut coordinates = Vec::with_capacity(total);
        let mut full = Vec::with_capacity(total);
        offsets.push(0);
        for v in collection {
            coordinates.extend_from_slice(v.coordinates());
            full.extend_from_slice(v.values());
            offsets.push(coordinates.len() as u64);
        }
        let values = match precision {
            Precision::Full => Values::Full(full),
            Precision::Half => Values::Half(full.iter().map(|&v| f16::from_f32(v)).collect()),
        };
        ForwardIndex {
            dim: collection.dim(),
            offsets,
            coordinates,
            values,
        }
    }

    pub(crate) fn from_parts(
        dim: u32,
        offsets: Vec<u64>,
        coordinates: Vec<u32>,
        values: Values,
    ) -> Result<Self> {
        let malformed =
            |message: &str| Error::InvalidParameter(format!("forward index: {message}"));
        if offsets.first() != Some(&0) {
            return Err(malformed("offsets must start at 0"));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(malformed("offsets decrease"));
        }
        if *offsets.last().unwrap() as usize != coordinates.len()
            || coordinates.len() != values.len()
        {
            return Err(malformed("entry count disagrees with offsets"));
        }
        for w in offsets.windows(2) {
            let doc = &coordinates[w[0] as usize..w[1] as usize];
            if doc.windows(2).any(|p| p[0] >= p[1]) || doc.last().is_some_and(|&c| c >= dim) {
                return Err(malformed("document coordinates unsorted or out of range"));
            }
        }
        Ok(ForwardIndex {
            dim,
            offsets,
            coordinates,
            values,
        })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn precision(&self) -> Precision {
        match self.values {
            Values::Full(_) => Precision::Full,
            Values::Half(_) => Precision::Half,
        }
    }

    pub fn total_entries(&self) -> usize {
        self.coordinates.len()
    }

    pub(crate) fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub(crate) fn raw_coordinates(&self) -> &[u32] {
        &self.coordinates
    }

    pub(crate) fn raw_values(&self) -> &Values {
        &self.values
    }

    /// Bytes used by offsets, coordinates and values.
    pub fn size_bytes(&self) -> usize {
        self.offsets.len() * 8
            + self.coordinates.len() * 4
            + self.values.len() * self.precision().value_bytes()
    }

    #[inline]
    fn range(&self, doc: usize) -> std::ops::Range<usize> {
        self.offsets[doc] as usize..self.offsets[doc + 1] as usize
    }

    /// Reconstructs document `doc`.
    pub fn lookup(&self, doc: u32) -> Result<SparseVector> {
        self.check(doc)?;
        let range = self.range(doc as usize);
        let coordinates = self.coordinates[range.clone()].to_vec();
        let values = match &self.values {
            Values::Full(v) => v[range].to_vec(),
            Values::Half(v) => v[range].iter().map(|h| h.to_f32()).collect(),
        };
        Ok(SparseVector::from_parts_unchecked(coordinates, values))
    }

    fn check(&self, doc: u32) -> Result<()> {
        if (doc as usize) < self.len() {
            Ok(())
        } else {
            Err(Error::DocumentOutOfRange {
                doc,
                len: self.len(),
            })
        }
    }

    /// Inner product of `query` with the stored vector of `doc`.
    pub fn score(&self, query: &SparseVector, doc: u32) -> Result<f32> {
        self.check(doc)?;
        let range = self.range(doc as usize);
        let coords = &self.coordinates[range.clone()];
        let (qc, qv) = (query.coordinates(), query.values());
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0f32;
        while i < qc.len() && j < coords.len() {
            match qc[i].cmp(&coords[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += qv[i] * self.value_at(range.start + j);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(acc)
    }

    #[inline]
    fn value_at(&self, pos: usize) -> f32 {
        match &self.values {
            Values::Full(v) => v[pos],
            Values::Half(v) => v[pos].to_f32(),
        }
    }

    /// Scores `doc` against a densified query (`dense.len() >= dim`). Terms
    /// are accumulated in coordinate order, so at full precision this equals
    /// [`SparseVector::inner_product`] bit for bit.
    #[inline]
    pub fn score_dense(&self, dense: &[f32], doc: u32) -> f32 {
        let range = self.range(doc as usize);
        let coords = &self.coordinates[range.clone()];
        match &self.values {
            Values::Full(v) => coords
                .iter()
                .zip(&v[range])
                .fold(0.0f32, |acc, (&c, &x)| acc + dense[c as usize] * x),
            Values::Half(v) => coords
                .iter()
                .zip(&v[range])
                .fold(0.0f32, |acc, (&c, x)| acc + dense[c as usize] * x.to_f32()),
        }
    }
}
