//! Block summaries: coordinate-wise maxima, optionally pruned and quantized
//! to one byte per retained coordinate.

use crate::error::{Error, Result};
use crate::sparse::SparseVector;

/// Number of quantization levels per summary.
pub const LEVELS: usize = 256;

/// Coordinate-wise maximum over the member vectors of a block. For any
/// nonnegative query its inner product upper-bounds the members' scores.
pub fn summarize<'a, I>(members: I) -> Result<SparseVector>
where
    I: IntoIterator<Item = &'a SparseVector>,
{
    let mut pairs: Vec<(u32, f32)> = Vec::new();
    let mut count = 0usize;
    for v in members {
        count += 1;
        pairs.extend(v.entries().map(|e| (e.coordinate, e.value)));
    }
    if count == 0 {
        return Err(Error::EmptyVector);
    }
    pairs.sort_unstable_by_key(|&(c, _)| c);
    let mut coordinates: Vec<u32> = Vec::with_capacity(pairs.len());
    let mut values: Vec<f32> = Vec::with_capacity(pairs.len());
    for (c, v) in pairs {
        if coordinates.last() == Some(&c) {
            let last = values.last_mut().unwrap();
            if v > *last {
                *last = v;
            }
        } else {
            coordinates.push(c);
            values.push(v);
        }
    }
    Ok(SparseVector::from_parts_unchecked(coordinates, values))
}

/// Dense accumulator computing the same maximum as [`summarize`] in time
/// linear in the members' entries.
pub(crate) struct BlockMax {
    dense: Vec<f32>,
    touched: Vec<u32>,
}

impl BlockMax {
    pub(crate) fn new(dim: u32) -> Self {
        BlockMax {
            dense: vec![0.0; dim as usize],
            touched: Vec::new(),
        }
    }

    /// Members must have strictly positive values.
    pub(crate) fn summarize<'a, I>(&mut self, members: I) -> Result<SparseVector>
    where
        I: IntoIterator<Item = &'a SparseVector>,
    {
        for v in members {
            for e in v.entries() {
                let slot = &mut self.dense[e.coordinate as usize];
                if *slot == 0.0 {
                    self.touched.push(e.coordinate);
                }
                if e.value > *slot {
                    *slot = e.value;
                }
            }
        }
        if self.touched.is_empty() {
            return Err(Error::EmptyVector);
        }
        self.touched.sort_unstable();
        let values = self
            .touched
            .iter()
            .map(|&c| std::mem::take(&mut self.dense[c as usize]))
            .collect();
        let coordinates = std::mem::take(&mut self.touched);
        Ok(SparseVector::from_parts_unchecked(coordinates, values))
    }
}

/// Reconstructed value for `code`.
#[inline(always)]
pub fn dequantize(min: f32, step: f32, code: u8) -> f32 {
    min + code as f32 * step
}

/// A summary whose values are replaced by the index of one of 256 equal
/// sub-intervals spanning `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSummary {
    coordinates: Vec<u32>,
    codes: Vec<u8>,
    min: f32,
    step: f32,
}

impl QuantizedSummary {
    /// `min` is the smallest value and `step = (max - min) / 256`; each value
    /// maps to `floor((v - min) / step)` clamped to 255. If the f32
    /// reconstruction of some value would land more than `step` away (a
    /// rounding artifact of at most a few ulps), `step` is nudged up by one
    /// ulp at a time until every value honours the bound.
    pub fn quantize(summary: &SparseVector) -> Result<Self> {
        let (min, step, codes) = quantize_values(summary.values())?;
        Ok(QuantizedSummary {
            coordinates: summary.coordinates().to_vec(),
            codes,
            min,
            step,
        })
    }

    pub(crate) fn from_parts(coordinates: Vec<u32>, codes: Vec<u8>, min: f32, step: f32) -> Self {
        QuantizedSummary {
            coordinates,
            codes,
            min,
            step,
        }
    }

    pub fn coordinates(&self) -> &[u32] {
        &self.coordinates
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn min(&self) -> f32 {
        self.min
    }

    pub fn step(&self) -> f32 {
        self.step
    }

    pub fn nnz(&self) -> usize {
        self.coordinates.len()
    }

    pub fn reconstructed_values(&self) -> Vec<f32> {
        self.codes
            .iter()
            .map(|&c| dequantize(self.min, self.step, c))
            .collect()
    }

    /// Inner product with a densified query, dequantizing on the fly.
    #[inline]
    pub fn score_dense(&self, dense: &[f32]) -> f32 {
        let (min, step) = (self.min, self.step);
        self.coordinates
            .iter()
            .zip(&self.codes)
            .fold(0.0f32, |acc, (&c, &code)| {
                acc + dense[c as usize] * dequantize(min, step, code)
            })
    }
}

/// Scalar-quantizes raw values into `(min, step, codes)`. The values must
/// be finite and span less than `f32::MAX`.
pub fn quantize_values(values: &[f32]) -> Result<(f32, f32, Vec<u8>)> {
    if values.is_empty() {
        return Err(Error::EmptyVector);
    }
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut step = (max - min) / LEVELS as f32;
    if step == 0.0 {
        return Ok((min, 0.0, vec![0; values.len()]));
    }
    let mut nudge = 1u32;
    for _ in 0..MAX_STEP_NUDGES {
        if !step.is_finite() {
            break;
        }
        if let Some(codes) = encode(values, min, step) {
            return Ok((min, step, codes));
        }
        step = f32::from_bits(step.to_bits().saturating_add(nudge));
        nudge = nudge.saturating_mul(2);
    }
    Err(Error::InvalidParameter(format!(
        "cannot quantize values spanning [{min}, {max}]"
    )))
}

/// Nudges double in size, so this spans the whole exponent range.
const MAX_STEP_NUDGES: usize = 40;

fn encode(values: &[f32], min: f32, step: f32) -> Option<Vec<u8>> {
    let within =
        |v: f32, code: u8| ((dequantize(min, step, code) as f64) - v as f64).abs() <= step as f64;
    let mut codes = Vec::with_capacity(values.len());
    for &v in values {
        let raw = ((v as f64 - min as f64) / step as f64).floor();
        let mut code = raw.clamp(0.0, (LEVELS - 1) as f64) as u8;
        while code < u8::MAX && (v as f64) - dequantize(min, step, code) as f64 > step as f64 {
            code += 1;
        }
        while code > 0 && dequantize(min, step, code) as f64 - (v as f64) > step as f64 {
            code -= 1;
        }
        if !within(v, code) {
            return None;
        }
        codes.push(code);
    }
    Some(codes)
}

/// A block summary as stored in the index.
#[derive(Debug, Clone, PartialEq)]
pub enum Summary {
    Raw(SparseVector),
    Quantized(QuantizedSummary),
}

impl Summary {
    pub fn nnz(&self) -> usize {
        match self {
            Summary::Raw(v) => v.nnz(),
            Summary::Quantized(q) => q.nnz(),
        }
    }

    pub fn coordinates(&self) -> &[u32] {
        match self {
            Summary::Raw(v) => v.coordinates(),
            Summary::Quantized(q) => q.coordinates(),
        }
    }

    /// Values as used for scoring (dequantized when quantized).
    pub fn values(&self) -> Vec<f32> {
        match self {
            Summary::Raw(v) => v.values().to_vec(),
            Summary::Quantized(q) => q.reconstructed_values(),
        }
    }

    #[inline]
    pub fn score_dense(&self, dense: &[f32]) -> f32 {
        match self {
            Summary::Raw(v) => v.dot_dense(dense),
            Summary::Quantized(q) => q.score_dense(dense),
        }
    }
}
