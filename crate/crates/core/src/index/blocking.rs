//! Partitioning of an impact-sorted posting list into blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sparse::Collection;

/// Shallow k-means: samples `min(beta, len)` distinct representatives
/// uniformly at random and assigns every document to the representative
/// with the largest inner product (ties to the lower representative).
/// Clusters left empty are dropped. Representatives are ordered by their
/// position in `postings`, and so are the documents within each block.
pub fn geometric_blocking(
    postings: &[u32],
    collection: &Collection,
    beta: usize,
    seed: u64,
) -> Vec<Vec<u32>> {
    let mut scratch = AssignScratch::new(collection.dim());
    scratch.geometric_blocking(postings, collection, beta, seed)
}

/// Dense per-coordinate tables reused across lists by one build thread.
pub(crate) struct AssignScratch {
    count: Vec<u32>,
    start: Vec<u32>,
    touched: Vec<u32>,
    pairs: Vec<(u32, f32)>,
    scores: Vec<f32>,
}

impl AssignScratch {
    pub(crate) fn new(dim: u32) -> Self {
        AssignScratch {
            count: vec![0; dim as usize],
            start: vec![0; dim as usize],
            touched: Vec::new(),
            pairs: Vec::new(),
            scores: Vec::new(),
        }
    }

    pub(crate) fn geometric_blocking(
        &mut self,
        postings: &[u32],
        collection: &Collection,
        beta: usize,
        seed: u64,
    ) -> Vec<Vec<u32>> {
        if postings.is_empty() || beta == 0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampled =
            rand::seq::index::sample(&mut rng, postings.len(), beta.min(postings.len())).into_vec();
        sampled.sort_unstable();
        let representatives: Vec<u32> = sampled.iter().map(|&p| postings[p]).collect();

        // coordinate -> [(representative, value)] laid out contiguously, so a
        // document is scored against every representative in one pass over
        // its own entries.
        for &rep in &representatives {
            for &c in collection[rep as usize].coordinates() {
                if self.count[c as usize] == 0 {
                    self.touched.push(c);
                }
                self.count[c as usize] += 1;
            }
        }
        let mut next = 0u32;
        for &c in &self.touched {
            self.start[c as usize] = next;
            next += self.count[c as usize];
            self.count[c as usize] = 0;
        }
        self.pairs.clear();
        self.pairs.resize(next as usize, (0, 0.0));
        for (j, &rep) in representatives.iter().enumerate() {
            for e in collection[rep as usize].entries() {
                let c = e.coordinate as usize;
                self.pairs[(self.start[c] + self.count[c]) as usize] = (j as u32, e.value);
                self.count[c] += 1;
            }
        }

        self.scores.clear();
        self.scores.resize(representatives.len(), 0.0);
        let mut clusters: Vec<Vec<u32>> = vec![Vec::new(); representatives.len()];
        for &doc in postings {
            self.scores.fill(0.0);
            for e in collection[doc as usize].entries() {
                let c = e.coordinate as usize;
                let n = self.count[c] as usize;
                if n == 0 {
                    continue;
                }
                let s = self.start[c] as usize;
                for &(j, v) in &self.pairs[s..s + n] {
                    self.scores[j as usize] += e.value * v;
                }
            }
            let mut best = 0;
            for (j, &s) in self.scores.iter().enumerate().skip(1) {
                if s > self.scores[best] {
                    best = j;
                }
            }
            clusters[best].push(doc);
        }

        for &c in &self.touched {
            self.count[c as usize] = 0;
        }
        self.touched.clear();
        clusters.retain(|c| !c.is_empty());
        clusters
    }
}

/// Consecutive chunks of `block_size` documents; the last may be shorter.
pub fn fixed_blocking(postings: &[u32], block_size: usize) -> Vec<Vec<u32>> {
    assert!(block_size >= 1, "block size must be positive");
    postings.chunks(block_size).map(<[u32]>::to_vec).collect()
}

/// Per-list seed derived from the build seed, independent of scheduling.
pub(crate) fn list_seed(seed: u64, coordinate: u32) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (coordinate as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
