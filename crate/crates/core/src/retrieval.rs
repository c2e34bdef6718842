//! Exact top-K retrieval by inner product.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::embedding::{dot, EmbeddingStore};
use crate::graph::InteractionGraph;

/// Number of neighbors returned for item-to-item queries by default.
pub const DEFAULT_ITEM_NEIGHBORS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct RankedEntry {
    pub item: u32,
    pub item_id: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum QueryKey {
    User(String),
    Item(String),
}

/// Items in descending score order, ties broken by ascending item index.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub query: QueryKey,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    /// One `rank \t item_id \t score` line per entry, 1-based ranks.
    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .enumerate()
            .map(|(r, e)| format!("{}\t{}\t{:.6}\n", r + 1, e.item_id, e.score))
            .collect()
    }
}

/// Candidate ordering: higher score first, then lower index.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    score: f64,
    item: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    /// `Less` means ranked earlier.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.item.cmp(&other.item))
    }
}

/// A searchable collection of item vectors.
pub trait NeighborIndex {
    /// The `k` best `(item, score)` pairs for `query`, skipping items for
    /// which `exclude` returns true.
    fn search(&self, query: &[f32], k: usize, exclude: &dyn Fn(u32) -> bool) -> Vec<(u32, f64)>;
}

/// Brute-force scan keeping a bounded heap of the best `k`.
pub struct ExactIndex<'a> {
    items: &'a [f32],
    dim: usize,
}

impl<'a> ExactIndex<'a> {
    pub fn new(store: &'a EmbeddingStore) -> Self {
        ExactIndex {
            items: store.item_matrix(),
            dim: store.dim(),
        }
    }
}

impl NeighborIndex for ExactIndex<'_> {
    fn search(&self, query: &[f32], k: usize, exclude: &dyn Fn(u32) -> bool) -> Vec<(u32, f64)> {
        if k == 0 {
            return Vec::new();
        }
        // Max-heap on rank order: the top is the worst kept candidate.
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        for (i, row) in self.items.chunks_exact(self.dim).enumerate() {
            let item = i as u32;
            if exclude(item) {
                continue;
            }
            let c = Candidate {
                score: dot(query, row),
                item,
            };
            if heap.len() < k {
                heap.push(c);
            } else if c < *heap.peek().unwrap() {
                heap.pop();
                heap.push(c);
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| (c.item, c.score))
            .collect()
    }
}

fn entries(store: &EmbeddingStore, hits: Vec<(u32, f64)>) -> Vec<RankedEntry> {
    hits.into_iter()
        .map(|(item, score)| RankedEntry {
            item,
            item_id: store.item_ids()[item as usize].clone(),
            score,
        })
        .collect()
}

/// Top-`k` items for `user`. With `exclude_train`, the user's neighbors in
/// `graph` are skipped. Fewer than `k` candidates yields a shorter list.
pub fn topk_for_user(
    store: &EmbeddingStore,
    graph: Option<&InteractionGraph>,
    user: usize,
    k: usize,
    exclude_train: bool,
) -> RankedList {
    let mut seen = Vec::new();
    if let (true, Some(g)) = (exclude_train, graph) {
        seen = vec![false; store.item_count()];
        for &i in g.neighbor_items(user) {
            seen[i as usize] = true;
        }
    }
    let hits = ExactIndex::new(store).search(store.user(user), k, &|i| {
        seen.get(i as usize).copied().unwrap_or(false)
    });
    RankedList {
        query: QueryKey::User(store.user_ids()[user].clone()),
        entries: entries(store, hits),
    }
}

/// Top-`k` items most similar to `item`, never including `item` itself.
pub fn topk_for_item(store: &EmbeddingStore, item: usize, k: usize) -> RankedList {
    let query = item as u32;
    let hits = ExactIndex::new(store).search(store.item(item), k, &|i| i == query);
    RankedList {
        query: QueryKey::Item(store.item_ids()[item].clone()),
        entries: entries(store, hits),
    }
}
