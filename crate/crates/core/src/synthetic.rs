//! Synthetic collections with the statistics of learned sparse embeddings:
//! a few popular coordinates shared by many vectors, and values whose L1
//! mass concentrates in a handful of entries.

use std::collections::BTreeMap;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Pareto, Zipf};

use crate::sparse::{Collection, SparseVector};

/// Independent vectors with Zipf-distributed coordinate popularity and
/// Pareto-distributed values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTailed {
    pub dim: u32,
    /// Each vector draws its nnz uniformly from `[mean/2, 3*mean/2]`.
    pub mean_nnz: usize,
    /// Zipf exponent of coordinate popularity.
    pub coordinate_skew: f64,
    /// Pareto shape of the values; smaller is heavier.
    pub value_shape: f64,
}

impl Default for HeavyTailed {
    fn default() -> Self {
        HeavyTailed {
            dim: 1000,
            mean_nnz: 40,
            coordinate_skew: 1.0,
            value_shape: 1.5,
        }
    }
}

impl HeavyTailed {
    pub fn generate(&self, n: usize, seed: u64) -> Collection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = Zipf::new(self.dim as f64, self.coordinate_skew).expect("valid zipf");
        let values = Pareto::new(1.0, self.value_shape).expect("valid pareto");
        let lo = (self.mean_nnz / 2).max(1);
        let hi = (self.mean_nnz * 3 / 2).max(lo);
        let vectors = (0..n)
            .map(|_| {
                let nnz = rng.random_range(lo..=hi).min(self.dim as usize);
                let mut entries = BTreeMap::new();
                for c in distinct_zipf(&mut rng, &coords, self.dim, nnz) {
                    entries.insert(c, values.sample(&mut rng) as f32);
                }
                SparseVector::from_pairs(entries).expect("distinct positive entries")
            })
            .collect();
        Collection::new(self.dim, vectors).expect("coordinates below dim")
    }
}

/// Vectors drawn around planted topics. Each topic owns a weighted set of
/// coordinates (popular coordinates recur across topics); a vector takes a
/// weighted sample of its topic's coordinates plus background noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustered {
    dim: u32,
    topics: Vec<Vec<(u32, f64)>>,
    shape: ClusteredShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteredShape {
    pub dim: u32,
    pub clusters: usize,
    pub topic_size: usize,
    pub doc_topic_nnz: usize,
    pub doc_noise_nnz: usize,
    pub query_topic_nnz: usize,
    pub query_noise_nnz: usize,
    /// Zipf exponent of coordinate popularity, for topics and noise alike.
    pub coordinate_skew: f64,
    /// Log-normal sigma of topic coordinate weights.
    pub weight_sigma: f64,
    /// Log-normal sigma of the per-vector multiplicative jitter.
    pub value_sigma: f64,
}

impl Default for ClusteredShape {
    fn default() -> Self {
        ClusteredShape {
            dim: 3000,
            clusters: 100,
            topic_size: 80,
            doc_topic_nnz: 40,
            doc_noise_nnz: 40,
            query_topic_nnz: 24,
            query_noise_nnz: 4,
            coordinate_skew: 0.5,
            weight_sigma: 0.2,
            value_sigma: 0.5,
        }
    }
}

impl Clustered {
    pub fn new(shape: ClusteredShape, seed: u64) -> Self {
        assert!(shape.clusters >= 1 && shape.topic_size >= 1);
        assert!(
            shape.doc_topic_nnz <= shape.topic_size && shape.query_topic_nnz <= shape.topic_size
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zipf = Zipf::new(shape.dim as f64, shape.coordinate_skew).expect("valid zipf");
        let weight = LogNormal::new(0.0, shape.weight_sigma).expect("valid lognormal");
        let topics = (0..shape.clusters)
            .map(|_| {
                distinct_zipf(&mut rng, &zipf, shape.dim, shape.topic_size)
                    .into_iter()
                    .map(|c| (c, weight.sample(&mut rng)))
                    .collect()
            })
            .collect();
        Clustered {
            dim: shape.dim,
            topics,
            shape,
        }
    }

    pub fn shape(&self) -> &ClusteredShape {
        &self.shape
    }

    /// `n` documents; document `i` belongs to topic `i % clusters`.
    pub fn documents(&self, n: usize, seed: u64) -> Collection {
        self.sample(n, seed, self.shape.doc_topic_nnz, self.shape.doc_noise_nnz)
    }

    /// `n` queries; query `i` is drawn from topic `i % clusters`.
    pub fn queries(&self, n: usize, seed: u64) -> Collection {
        self.sample(
            n,
            seed,
            self.shape.query_topic_nnz,
            self.shape.query_noise_nnz,
        )
    }

    pub fn topic_of(&self, id: usize) -> usize {
        id % self.topics.len()
    }

    fn sample(&self, n: usize, seed: u64, topic_nnz: usize, noise_nnz: usize) -> Collection {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zipf = Zipf::new(self.dim as f64, self.shape.coordinate_skew).expect("valid zipf");
        let jitter = LogNormal::new(0.0, self.shape.value_sigma).expect("valid lognormal");
        let vectors = (0..n)
            .map(|i| {
                let topic = &self.topics[self.topic_of(i)];
                let mut entries: BTreeMap<u32, f32> = BTreeMap::new();
                for c in distinct_zipf(&mut rng, &zipf, self.dim, noise_nnz) {
                    entries.insert(c, rng.random_range(0.01f32..0.3));
                }
                let picked = rand::seq::index::sample_weighted(
                    &mut rng,
                    topic.len(),
                    |j| topic[j].1,
                    topic_nnz,
                )
                .expect("positive weights");
                for j in picked {
                    let (c, w) = topic[j];
                    let v = (w * jitter.sample(&mut rng)) as f32;
                    *entries.entry(c).or_insert(0.0) += v;
                }
                SparseVector::from_pairs(entries).expect("distinct positive entries")
            })
            .collect();
        Collection::new(self.dim, vectors).expect("coordinates below dim")
    }
}

/// `count` distinct zero-based coordinates drawn from `zipf`.
fn distinct_zipf<R: Rng>(rng: &mut R, zipf: &Zipf<f64>, dim: u32, count: usize) -> Vec<u32> {
    let dim = dim as usize;
    let count = count.min(dim);
    let mut seen = std::collections::HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        let c = if draws > 64 * count + 1024 {
            // popularity is too concentrated to finish by rejection
            rng.random_range(0..dim as u32)
        } else {
            (zipf.sample(rng) as u32).saturating_sub(1)
        };
        if seen.insert(c) {
            out.push(c);
        }
    }
    out
}
