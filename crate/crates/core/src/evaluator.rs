//! Offline evaluation: random edge split and full-ranking HR/NDCG/MRR.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::embedding::{dot, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::rng::{self, Stream, StreamRng};
use crate::trainer::{check_shapes, train, TrainConfig};

pub const DEFAULT_KS: [usize; 4] = [5, 10, 50, 100];

const SUBSAMPLE_KEY: u64 = 0x7375_6273;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.9,
            seed: 1,
        }
    }
}

/// A held-out `(user, item)` pair in the original graph's index space.
pub type TestPair = (u32, u32);

#[derive(Clone, Debug)]
pub struct Split {
    /// Same id spaces as the source graph; degrees cover training edges only.
    pub train: InteractionGraph,
    pub test: Vec<TestPair>,
}

/// Sends each edge to the test side independently with probability
/// `1 - train_fraction`.
pub fn split(graph: &InteractionGraph, spec: SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    if graph.edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut rng = rng::stream(spec.seed, Stream::Split);
    let in_train: Vec<Vec<bool>> = (0..graph.user_count())
        .map(|u| {
            (0..graph.user_edge_count(u))
                .map(|_| rng.gen::<f64>() < spec.train_fraction)
                .collect()
        })
        .collect();
    partition(graph, &in_train)
}

fn partition(graph: &InteractionGraph, in_train: &[Vec<bool>]) -> Result<Split> {
    let mut test = Vec::new();
    for (u, flags) in in_train.iter().enumerate() {
        for (&item, &keep) in graph.neighbor_items(u).iter().zip(flags) {
            if !keep {
                test.push((u as u32, item));
            }
        }
    }
    if test.is_empty() {
        return Err(Error::SplitDegenerate("test partition is empty".into()));
    }
    if test.len() == graph.edge_count() {
        return Err(Error::SplitDegenerate("train partition is empty".into()));
    }
    let train = graph.retain_edges(|u, pos| in_train[u][pos]);
    Ok(Split { train, test })
}

/// `folds` disjoint validation splits of `graph`, each edge landing in
/// exactly one validation fold.
pub fn kfold(graph: &InteractionGraph, folds: usize, seed: u64) -> Result<Vec<Split>> {
    if folds < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    let mut rng = rng::stream(seed, Stream::Split);
    let assignment: Vec<Vec<usize>> = (0..graph.user_count())
        .map(|u| {
            (0..graph.user_edge_count(u))
                .map(|_| rng.gen_range(0..folds))
                .collect()
        })
        .collect();
    (0..folds)
        .map(|f| {
            let in_train: Vec<Vec<bool>> = assignment
                .iter()
                .map(|row| row.iter().map(|&a| a != f).collect())
                .collect();
            partition(graph, &in_train)
        })
        .collect()
}

/// Edge subsamples for scaling runs. Each edge draws one uniform key and is
/// kept wherever the key falls below the fraction, so smaller samples are
/// subsets of larger ones. Id spaces are preserved.
pub fn nested_subsamples(graph: &InteractionGraph, fractions: &[f64], seed: u64) -> Result<Vec<InteractionGraph>> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidConfig(format!("subsample fraction {f} outside (0, 1]")));
    }
    let mut rng = StreamRng::seed_from_u64(rng::derive_seed(seed, Stream::Split, &[SUBSAMPLE_KEY]));
    let keys: Vec<Vec<f64>> = (0..graph.user_count())
        .map(|u| (0..graph.user_edge_count(u)).map(|_| rng.gen::<f64>()).collect())
        .collect();
    Ok(fractions
        .iter()
        .map(|&f| graph.retain_edges(|u, pos| keys[u][pos] < f))
        .collect())
}

/// Per-pair metric values at cutoff `k` for a 1-based `rank`.
pub fn metrics_at(rank: usize, k: usize) -> (f64, f64, f64) {
    if rank == 0 || rank > k {
        (0.0, 0.0, 0.0)
    } else {
        (1.0, 1.0 / (rank as f64 + 1.0).log2(), 1.0 / rank as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsAtK {
    pub k: usize,
    pub hr: f64,
    pub ndcg: f64,
    pub mrr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metrics: Vec<MetricsAtK>,
    pub evaluated_pairs: usize,
    pub dropped_users: usize,
    pub dropped_pairs: usize,
    pub seconds: f64,
}

impl EvalReport {
    pub fn at(&self, k: usize) -> Option<&MetricsAtK> {
        self.metrics.iter().find(|m| m.k == k)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>6}  {:>8}  {:>8}  {:>8}", "K", "HR", "NDCG", "MRR");
        for m in &self.metrics {
            let _ = writeln!(out, "{:>6}  {:>8.4}  {:>8.4}  {:>8.4}", m.k, m.hr, m.ndcg, m.mrr);
        }
        let _ = writeln!(
            out,
            "evaluated pairs: {}  dropped users: {} ({} pairs)  time: {:.2}s",
            self.evaluated_pairs, self.dropped_users, self.dropped_pairs, self.seconds
        );
        out
    }
}

/// 1-based rank of each test item among all items outside the user's
/// training set. `None` marks pairs whose user has no training edges.
pub fn rank_test_pairs(store: &EmbeddingStore, train: &InteractionGraph, test: &[TestPair]) -> Result<Vec<Option<usize>>> {
    check_shapes(store, train)?;
    let mut order: Vec<usize> = (0..test.len()).collect();
    order.sort_by_key(|&p| test[p]);
    let mut groups: Vec<&[usize]> = Vec::new();
    let mut rest = &order[..];
    while let Some(&first) = rest.first() {
        let user = test[first].0;
        let len = rest.iter().take_while(|&&p| test[p].0 == user).count();
        groups.push(&rest[..len]);
        rest = &rest[len..];
    }
    for &(u, i) in test {
        if u as usize >= train.user_count() || i as usize >= train.item_count() {
            return Err(Error::DimensionMismatch(format!("test pair ({u}, {i}) out of range")));
        }
    }

    let ranked: Vec<Vec<(usize, Option<usize>)>> = groups
        .par_iter()
        .map(|group| {
            let user = test[group[0]].0 as usize;
            if train.user_edge_count(user) == 0 {
                return group.iter().map(|&p| (p, None)).collect();
            }
            let query = store.user(user);
            let scores: Vec<f64> = (0..store.item_count()).map(|i| dot(query, store.item(i))).collect();
            let mut excluded = vec![false; scores.len()];
            for &i in train.neighbor_items(user) {
                excluded[i as usize] = true;
            }
            group
                .iter()
                .map(|&p| {
                    let target = test[p].1 as usize;
                    let s = scores[target];
                    let ahead = scores
                        .iter()
                        .enumerate()
                        .filter(|&(j, sj)| {
                            !excluded[j]
                                && j != target
                                && match sj.total_cmp(&s) {
                                    std::cmp::Ordering::Greater => true,
                                    std::cmp::Ordering::Equal => j < target,
                                    std::cmp::Ordering::Less => false,
                                }
                        })
                        .count();
                    (p, Some(ahead + 1))
                })
                .collect()
        })
        .collect();

    let mut ranks = vec![None; test.len()];
    for (p, r) in ranked.into_iter().flatten() {
        ranks[p] = r;
    }
    Ok(ranks)
}

/// Aggregates per-pair ranks into mean metrics; `None` ranks are dropped.
pub fn summarize(ranks: &[Option<usize>], test: &[TestPair], ks: &[usize]) -> EvalReport {
    let evaluated: Vec<usize> = ranks.iter().flatten().copied().collect();
    let mut dropped: Vec<u32> = ranks
        .iter()
        .zip(test)
        .filter(|(r, _)| r.is_none())
        .map(|(_, &(u, _))| u)
        .collect();
    let dropped_pairs = dropped.len();
    dropped.sort_unstable();
    dropped.dedup();

    let n = evaluated.len().max(1) as f64;
    let metrics = ks
        .iter()
        .map(|&k| {
            let (mut hr, mut ndcg, mut mrr) = (0.0, 0.0, 0.0);
            for &rank in &evaluated {
                let (h, g, r) = metrics_at(rank, k);
                hr += h;
                ndcg += g;
                mrr += r;
            }
            MetricsAtK {
                k,
                hr: hr / n,
                ndcg: ndcg / n,
                mrr: mrr / n,
            }
        })
        .collect();
    EvalReport {
        metrics,
        evaluated_pairs: evaluated.len(),
        dropped_users: dropped.len(),
        dropped_pairs,
        seconds: 0.0,
    }
}

pub fn evaluate(store: &EmbeddingStore, train: &InteractionGraph, test: &[TestPair], ks: &[usize]) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig("cutoffs must be positive".into()));
    }
    let started = Instant::now();
    let ranks = rank_test_pairs(store, train, test)?;
    let mut report = summarize(&ranks, test, ks);
    report.seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Trains on each fold's training part and averages the validation metrics.
pub fn cross_validate(
    graph: &InteractionGraph,
    config: &TrainConfig,
    folds: usize,
    seed: u64,
    ks: &[usize],
) -> Result<EvalReport> {
    let started = Instant::now();
    let splits = kfold(graph, folds, seed)?;
    let mut reports = Vec::with_capacity(folds);
    for s in &splits {
        let (store, _) = train(&s.train, config)?;
        reports.push(evaluate(&store, &s.train, &s.test, ks)?);
    }
    let n = reports.len() as f64;
    let metrics = ks
        .iter()
        .enumerate()
        .map(|(idx, &k)| MetricsAtK {
            k,
            hr: reports.iter().map(|r| r.metrics[idx].hr).sum::<f64>() / n,
            ndcg: reports.iter().map(|r| r.metrics[idx].ndcg).sum::<f64>() / n,
            mrr: reports.iter().map(|r| r.metrics[idx].mrr).sum::<f64>() / n,
        })
        .collect();
    Ok(EvalReport {
        metrics,
        evaluated_pairs: reports.iter().map(|r| r.evaluated_pairs).sum(),
        dropped_users: reports.iter().map(|r| r.dropped_users).sum(),
        dropped_pairs: reports.iter().map(|r| r.dropped_pairs).sum(),
        seconds: started.elapsed().as_secs_f64(),
    })
}
