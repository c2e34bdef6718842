//! Shared fixtures for the criterion benchmarks.

use recnet_core::synthetic::random_graph;
use recnet_core::{InteractionGraph, TrainConfig};

/// Uniform random graph with 2000 items and 20 edges per user.
pub fn fixture(users: usize) -> InteractionGraph {
    random_graph(users, 2_000, 20, 1)
}

/// One epoch at the default hyperparameters.
pub fn one_epoch() -> TrainConfig {
    TrainConfig {
        epochs: 1,
        ..Default::default()
    }
}
