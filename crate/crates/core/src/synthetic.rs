//! Synthetic interaction graphs for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EdgeRecord, InteractionGraph};

/// Block-diagonal bipartite graph: user `u<n>` belongs to block
/// `n / users_per_block` and links to each item `i<m>` of the same block
/// (`m / items_per_block` equal) with probability `density`. Every user
/// keeps at least one edge.
pub fn planted_blocks(
    blocks: usize,
    users_per_block: usize,
    items_per_block: usize,
    density: f64,
    seed: u64,
) -> InteractionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for b in 0..blocks {
        let block_items = b * items_per_block..(b + 1) * items_per_block;
        for u in b * users_per_block..(b + 1) * users_per_block {
            let mut items: Vec<usize> = block_items
                .clone()
                .filter(|_| density >= 1.0 || rng.gen::<f64>() < density)
                .collect();
            if items.is_empty() {
                items.push(rng.gen_range(block_items.clone()));
            }
            records.extend(
                items
                    .into_iter()
                    .map(|i| EdgeRecord::new(format!("u{u}"), format!("i{i}"), 1.0)),
            );
        }
    }
    InteractionGraph::ingest(records).expect("planted graph is non-empty")
}

/// Block of a `u<n>` or `i<n>` id produced by [`planted_blocks`].
pub fn planted_block_of(id: &str, per_block: usize) -> usize {
    id[1..].parse::<usize>().expect("planted ids are <letter><index>") / per_block
}

/// Every user gets `edges_per_user` distinct items drawn uniformly.
pub fn random_graph(users: usize, items: usize, edges_per_user: usize, seed: u64) -> InteractionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<usize> = (0..items).collect();
    let per_user = edges_per_user.clamp(1, items.max(1));
    let mut records = Vec::with_capacity(users * per_user);
    for u in 0..users {
        for &i in pool.choose_multiple(&mut rng, per_user) {
            records.push(EdgeRecord::new(format!("u{u}"), format!("i{i}"), 1.0));
        }
    }
    InteractionGraph::ingest(records).expect("random graph is non-empty")
}
