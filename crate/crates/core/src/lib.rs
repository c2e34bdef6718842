//! Bipartite user-item graph embeddings for top-K recommendation.
//!
//! The pipeline: ingest an interaction graph ([`graph`]), draw per-user
//! behavior sequences and negatives ([`sampler`]), train user and item
//! embeddings with negative-sampling SGD ([`trainer`], or the simulated
//! parameter server in [`param_server`]), then retrieve ([`retrieval`]) and
//! evaluate ([`evaluator`]) recommendations.

pub mod alias;
pub mod embedding;
pub mod error;
pub mod evaluator;
pub mod graph;
pub mod param_server;
pub mod report;
pub mod retrieval;
pub mod rng;
pub mod sampler;
pub mod synthetic;
pub mod trainer;

pub use alias::AliasTable;
pub use embedding::{EmbeddingStore, Format};
pub use error::{Error, Result};
pub use evaluator::{cross_validate, evaluate, nested_subsamples, split, EvalReport, SplitSpec, TestPair};
pub use graph::{EdgeRecord, InteractionGraph};
pub use param_server::{ps_train, ps_train_on, ShardedStore, VertexKey, WorkerTask};
pub use report::KvDocument;
pub use retrieval::{topk_for_item, topk_for_user, RankedList};
pub use sampler::{NegativeSampler, PositiveSampler, SelectionParams};
pub use trainer::{exact_kl_loss, sampled_loss, sgd_step, train, TrainConfig, TrainReport};
