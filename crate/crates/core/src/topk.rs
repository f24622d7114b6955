//! Bounded top-k selection over `(score, doc)` pairs.
//!
//! Ranking is by score descending, then doc id ascending. The heap root is
//! the current worst retained hit, so admission and eviction are O(log k).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::search::Hit;

/// Orders hits so that the *worse* hit compares greater.
#[derive(Debug, Clone, Copy)]
struct Worst(Hit);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Worst {}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

/// Total order on hits: better hits sort first.
pub fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    b.score.total_cmp(&a.score).then(a.doc.cmp(&b.doc))
}

#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    /// Score of the worst retained hit.
    pub fn min_score(&self) -> Option<f32> {
        self.heap.peek().map(|w| w.0.score)
    }

    /// Offers a hit; returns whether it was retained.
    pub fn push(&mut self, score: f32, doc: u32) -> bool {
        let hit = Hit { score, doc };
        if self.k == 0 {
            return false;
        }
        if self.heap.len() < self.k {
            self.heap.push(Worst(hit));
            return true;
        }
        let worst = self.heap.peek().expect("full heap").0;
        if rank_order(&hit, &worst) == Ordering::Less {
            self.heap.pop();
            self.heap.push(Worst(hit));
            true
        } else {
            false
        }
    }

    /// Retained hits, best first.
    pub fn into_sorted(self) -> Vec<Hit> {
        let mut hits: Vec<Hit> = self.heap.into_iter().map(|w| w.0).collect();
        hits.sort_by(rank_order);
        hits
    }
}
