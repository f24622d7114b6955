//! Sparse vectors and collections.
//!
//! A [`SparseVector`] stores its non-zero entries as two parallel arrays,
//! coordinates strictly increasing. Every other structure in the crate
//! (documents, queries, block summaries) is built on top of it.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A coordinate and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub coordinate: u32,
    pub value: f32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    coordinates: Vec<u32>,
    values: Vec<f32>,
}

impl SparseVector {
    /// Builds a vector from parallel arrays, rejecting unsorted or duplicate
    /// coordinates and zero or non-finite values.
    pub fn new(coordinates: Vec<u32>, values: Vec<f32>) -> Result<Self> {
        if coordinates.len() != values.len() {
            return Err(Error::LengthMismatch {
                coordinates: coordinates.len(),
                values: values.len(),
            });
        }
        let v = SparseVector {
            coordinates,
            values,
        };
        v.validate(0)?;
        Ok(v)
    }

    /// Builds a vector from unordered `(coordinate, value)` pairs. Zero values
    /// are dropped; duplicated coordinates are an error.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f32)>,
    {
        let mut pairs: Vec<(u32, f32)> = pairs.into_iter().filter(|&(_, v)| v != 0.0).collect();
        pairs.sort_by_key(|&(c, _)| c);
        let (coordinates, values) = pairs.into_iter().unzip();
        Self::new(coordinates, values)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Caller guarantees the invariants.
    pub(crate) fn from_parts_unchecked(coordinates: Vec<u32>, values: Vec<f32>) -> Self {
        debug_assert_eq!(coordinates.len(), values.len());
        debug_assert!(coordinates.windows(2).all(|w| w[0] < w[1]));
        SparseVector {
            coordinates,
            values,
        }
    }

    /// No checks at all; callers must [`validate`](Self::validate) afterwards.
    pub(crate) fn from_raw(coordinates: Vec<u32>, values: Vec<f32>) -> Self {
        SparseVector {
            coordinates,
            values,
        }
    }

    /// Checks sortedness and value validity, attributing failures to
    /// `vector` (its position in an enclosing collection).
    pub(crate) fn validate(&self, vector: usize) -> Result<()> {
        for (position, w) in self.coordinates.windows(2).enumerate() {
            if w[0] >= w[1] {
                return Err(Error::UnsortedCoordinates {
                    vector,
                    position: position + 1,
                });
            }
        }
        for (&coordinate, &value) in self.coordinates.iter().zip(&self.values) {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    vector,
                    coordinate,
                    value,
                });
            }
            if value == 0.0 {
                return Err(Error::ZeroValue { vector, coordinate });
            }
        }
        Ok(())
    }

    pub fn coordinates(&self) -> &[u32] {
        &self.coordinates
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.coordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coordinates.is_empty()
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = Entry> + '_ {
        self.coordinates
            .iter()
            .zip(&self.values)
            .map(|(&coordinate, &value)| Entry { coordinate, value })
    }

    /// Value at `coordinate`, zero when absent.
    pub fn get(&self, coordinate: u32) -> f32 {
        match self.coordinates.binary_search(&coordinate) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_coordinate(&self) -> Option<u32> {
        self.coordinates.last().copied()
    }

    /// Sorted-merge inner product.
    pub fn inner_product(&self, other: &SparseVector) -> f32 {
        let (a_idx, a_val) = (&self.coordinates, &self.values);
        let (b_idx, b_val) = (&other.coordinates, &other.values);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0f32;
        while i < a_idx.len() && j < b_idx.len() {
            match a_idx[i].cmp(&b_idx[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += a_val[i] * b_val[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Inner product accumulated in double precision.
    pub fn inner_product_f64(&self, other: &SparseVector) -> f64 {
        let (a_idx, a_val) = (&self.coordinates, &self.values);
        let (b_idx, b_val) = (&other.coordinates, &other.values);
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0f64;
        while i < a_idx.len() && j < b_idx.len() {
            match a_idx[i].cmp(&b_idx[j]) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    acc += a_val[i] as f64 * b_val[j] as f64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Inner product against a densified vector. Sums over this vector's
    /// entries in coordinate order, so for vectors without negative zeros the
    /// result is bit-identical to [`SparseVector::inner_product`].
    #[inline]
    pub fn dot_dense(&self, dense: &[f32]) -> f32 {
        self.coordinates
            .iter()
            .zip(&self.values)
            .map(|(&c, &v)| dense[c as usize] * v)
            .fold(0.0f32, |acc, p| acc + p)
    }

    /// L1 mass, summed in double precision.
    pub fn l1_mass(&self) -> f64 {
        self.values.iter().map(|v| v.abs() as f64).sum()
    }

    /// Entry positions sorted by decreasing absolute value, ties broken by
    /// ascending coordinate.
    pub(crate) fn positions_by_magnitude(&self) -> Vec<usize> {
        // For finite floats the bit pattern of |v| orders like |v|, and
        // positions order like coordinates, so one integer sort suffices.
        let mut keys: Vec<u64> = self
            .values
            .iter()
            .enumerate()
            .map(|(p, v)| ((v.abs().to_bits() as u64) << 32) | (u32::MAX - p as u32) as u64)
            .collect();
        keys.sort_unstable_by(|a, b| b.cmp(a));
        keys.into_iter()
            .map(|k| (u32::MAX - k as u32) as usize)
            .collect()
    }

    fn select_positions(&self, mut positions: Vec<usize>) -> SparseVector {
        positions.sort_unstable();
        let coordinates = positions.iter().map(|&p| self.coordinates[p]).collect();
        let values = positions.iter().map(|&p| self.values[p]).collect();
        SparseVector::from_parts_unchecked(coordinates, values)
    }

    /// The largest-magnitude prefix whose cumulative absolute mass stays
    /// within `alpha` times the vector's L1 mass. At least one entry is always
    /// kept.
    pub fn alpha_mass_subvector(&self, alpha: f64) -> Result<SparseVector> {
        if self.is_empty() {
            return Err(Error::EmptyVector);
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        let order = self.positions_by_magnitude();
        // Total accumulated in the same order as the prefix sums so that
        // alpha = 1 retains every entry.
        let total: f64 = order.iter().map(|&p| self.values[p].abs() as f64).sum();
        let threshold = alpha * total;
        let mut mass = 0.0f64;
        let mut keep = 0;
        for &p in &order {
            mass += self.values[p].abs() as f64;
            if mass > threshold {
                break;
            }
            keep += 1;
        }
        let keep = keep.max(1);
        Ok(self.select_positions(order[..keep].to_vec()))
    }

    /// The `s` largest-magnitude entries (the whole vector when `s >= nnz`).
    pub fn top_s_subvector(&self, s: usize) -> SparseVector {
        if s >= self.nnz() {
            return self.clone();
        }
        let mut order = self.positions_by_magnitude();
        order.truncate(s);
        self.select_positions(order)
    }
}

/// Documents (or queries) indexed by their position.
#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    dim: u32,
    vectors: Vec<SparseVector>,
}

impl Collection {
    /// Validates every vector against `dim`.
    pub fn new(dim: u32, vectors: Vec<SparseVector>) -> Result<Self> {
        for (i, v) in vectors.iter().enumerate() {
            v.validate(i)?;
            if let Some(c) = v.max_coordinate() {
                if c >= dim {
                    return Err(Error::CoordinateOutOfRange {
                        vector: i,
                        coordinate: c,
                        dim,
                    });
                }
            }
        }
        Ok(Collection { dim, vectors })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&SparseVector> {
        self.vectors.get(id)
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SparseVector> {
        self.vectors.iter()
    }

    pub fn into_vectors(self) -> Vec<SparseVector> {
        self.vectors
    }

    /// Total number of stored entries.
    pub fn nnz(&self) -> usize {
        self.vectors.iter().map(SparseVector::nnz).sum()
    }

    /// Rejects the first negative value found. Documents must pass this;
    /// queries need not.
    pub fn check_nonnegative(&self) -> Result<()> {
        for (vector, v) in self.vectors.iter().enumerate() {
            if let Some(e) = v.entries().find(|e| e.value < 0.0) {
                return Err(Error::NegativeValue {
                    vector,
                    coordinate: e.coordinate,
                    value: e.value,
                });
            }
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Collection {
    type Output = SparseVector;

    fn index(&self, id: usize) -> &SparseVector {
        &self.vectors[id]
    }
}

impl<'a> IntoIterator for &'a Collection {
    type Item = &'a SparseVector;
    type IntoIter = std::slice::Iter<'a, SparseVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.vectors.iter()
    }
}
