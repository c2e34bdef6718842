//! Negative-sampling SGD over sampled behavior sequences.
//!
//! Each epoch draws `m` positives per active user from the
//! [`PositiveSampler`], pairs every positive with `k` negatives from the
//! [`NegativeSampler`] and applies one update per positive. The minimized
//! per-edge objective is
//!
//! ```text
//! L(u, i) = -log σ(e_u · e_i) - Σ_j log σ(-e_u · e_j)
//! ```
//!
//! whose gradient gives the update `e_u += λ Σ_z (1[z = i] - σ(e_u · e_z)) e_z`
//! and `e_z += λ (1[z = i] - σ(e_u · e_z)) e_u`, both evaluated at the
//! pre-update rows.
//!
//! With more than one worker the embedding matrices are shared without
//! locks: workers read and write overlapping rows concurrently and lost
//! updates are accepted as noise. Single-worker runs are bit-deterministic.

use std::sync::atomic::{AtomicU32, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::embedding::{dot, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::rng::{self, Stream};
use crate::sampler::{NegativeSampler, PositiveSampler, SelectionParams, DEFAULT_DECAY_BASE, DEFAULT_GAMMA};

/// Inputs to `σ` are clamped to `[-SIGMOID_CLAMP, SIGMOID_CLAMP]`.
pub const SIGMOID_CLAMP: f64 = 30.0;
/// Floor of the linear learning-rate decay, as a fraction of the initial rate.
pub const MIN_LR_FRACTION: f64 = 1e-4;
/// Largest `|E| * T` for which [`exact_kl_loss`] will run.
pub const EXACT_LOSS_LIMIT: u128 = 100_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub negatives: usize,
    pub samples_per_user: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub gamma: f64,
    pub decay_base: f64,
    pub workers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 128,
            negatives: 5,
            samples_per_user: 10,
            learning_rate: 0.025,
            epochs: 5,
            gamma: DEFAULT_GAMMA,
            decay_base: DEFAULT_DECAY_BASE,
            workers: 1,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.samples_per_user == 0 {
            return bad("samples_per_user must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.decay_base > 0.0 && self.decay_base <= 1.0) {
            return bad("decay_base must lie in (0, 1]");
        }
        if !self.gamma.is_finite() {
            return bad("gamma must be finite");
        }
        Ok(())
    }

    pub fn selection_params(&self) -> SelectionParams {
        SelectionParams {
            gamma: self.gamma,
            decay_base: self.decay_base,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean sampled loss over the epoch's positives, measured before each update.
    pub mean_loss: f64,
    pub seconds: f64,
    pub positives: u64,
    /// Embedding rows written (one user row plus `k + 1` item rows per positive).
    pub row_updates: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub active_users: usize,
    pub epochs: Vec<EpochStats>,
    /// Parameter-server reads of rows older than the current iteration.
    pub stale_reads: u64,
}

impl TrainReport {
    pub fn total_positives(&self) -> u64 {
        self.epochs.iter().map(|e| e.positives).sum()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// `ln(1 + e^x)`, stable for large `|x|`.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Row storage the update kernel runs against.
pub(crate) trait Rows {
    fn dim(&self) -> usize;
    fn load_user(&self, user: u32, out: &mut [f32]);
    fn store_user(&mut self, user: u32, row: &[f32]);
    fn load_item(&self, item: u32, out: &mut [f32]);
    fn store_item(&mut self, item: u32, row: &[f32]);
}

impl Rows for EmbeddingStore {
    fn dim(&self) -> usize {
        EmbeddingStore::dim(self)
    }
    fn load_user(&self, user: u32, out: &mut [f32]) {
        out.copy_from_slice(self.user(user as usize));
    }
    fn store_user(&mut self, user: u32, row: &[f32]) {
        self.user_mut(user as usize).copy_from_slice(row);
    }
    fn load_item(&self, item: u32, out: &mut [f32]) {
        out.copy_from_slice(self.item(item as usize));
    }
    fn store_item(&mut self, item: u32, row: &[f32]) {
        self.item_mut(item as usize).copy_from_slice(row);
    }
}

/// Embedding matrices shared between workers without locking. Relaxed
/// atomics compile to plain loads and stores; a read-modify-write of a row
/// is not atomic, so concurrent writers may lose updates.
pub(crate) struct SharedMatrices {
    dim: usize,
    users: Vec<AtomicU32>,
    items: Vec<AtomicU32>,
}

impl SharedMatrices {
    pub(crate) fn from_store(store: &EmbeddingStore) -> Self {
        let wrap = |m: &[f32]| m.iter().map(|v| AtomicU32::new(v.to_bits())).collect();
        SharedMatrices {
            dim: store.dim(),
            users: wrap(store.user_matrix()),
            items: wrap(store.item_matrix()),
        }
    }

    pub(crate) fn write_back(&self, store: &mut EmbeddingStore) {
        let (users, items) = store.matrices_mut();
        for (dst, src) in users.iter_mut().zip(&self.users) {
            *dst = f32::from_bits(src.load(Ordering::Relaxed));
        }
        for (dst, src) in items.iter_mut().zip(&self.items) {
            *dst = f32::from_bits(src.load(Ordering::Relaxed));
        }
    }

    fn is_finite(&self) -> bool {
        self.users
            .iter()
            .chain(&self.items)
            .all(|v| f32::from_bits(v.load(Ordering::Relaxed)).is_finite())
    }

    fn load(matrix: &[AtomicU32], row: usize, dim: usize, out: &mut [f32]) {
        for (o, v) in out.iter_mut().zip(&matrix[row * dim..(row + 1) * dim]) {
            *o = f32::from_bits(v.load(Ordering::Relaxed));
        }
    }

    fn store(matrix: &[AtomicU32], row: usize, dim: usize, values: &[f32]) {
        for (v, x) in matrix[row * dim..(row + 1) * dim].iter().zip(values) {
            v.store(x.to_bits(), Ordering::Relaxed);
        }
    }
}

impl Rows for &SharedMatrices {
    fn dim(&self) -> usize {
        self.dim
    }
    fn load_user(&self, user: u32, out: &mut [f32]) {
        SharedMatrices::load(&self.users, user as usize, self.dim, out);
    }
    fn store_user(&mut self, user: u32, row: &[f32]) {
        SharedMatrices::store(&self.users, user as usize, self.dim, row);
    }
    fn load_item(&self, item: u32, out: &mut [f32]) {
        SharedMatrices::load(&self.items, item as usize, self.dim, out);
    }
    fn store_item(&mut self, item: u32, row: &[f32]) {
        SharedMatrices::store(&self.items, item as usize, self.dim, row);
    }
}

#[derive(Default)]
pub(crate) struct Scratch {
    user: Vec<f32>,
    items: Vec<f32>,
    row: Vec<f32>,
    coeffs: Vec<f64>,
    grad: Vec<f64>,
}

impl Scratch {
    fn prepare(&mut self, dim: usize, rows: usize) {
        self.user.resize(dim, 0.0);
        self.row.resize(dim, 0.0);
        self.items.resize(dim * rows, 0.0);
        self.grad.clear();
        self.grad.resize(dim, 0.0);
        self.coeffs.clear();
    }
}

/// One SGD update for the positive `(user, item)` against `negatives`.
/// Returns the sampled loss at the pre-update rows.
pub(crate) fn apply_step<R: Rows + ?Sized>(
    rows: &mut R,
    user: u32,
    item: u32,
    negatives: &[u32],
    lr: f64,
    s: &mut Scratch,
) -> f64 {
    let d = rows.dim();
    s.prepare(d, negatives.len() + 1);
    rows.load_user(user, &mut s.user);

    let mut loss = 0.0;
    for (slot, &z) in std::iter::once(&item).chain(negatives).enumerate() {
        let row = &mut s.items[slot * d..(slot + 1) * d];
        rows.load_item(z, row);
        let score = dot(&s.user, row);
        let (label, l) = if slot == 0 {
            (1.0, softplus(-score))
        } else {
            (0.0, softplus(score))
        };
        loss += l;
        s.coeffs.push(label - sigmoid(score));
    }

    for (slot, &g) in s.coeffs.iter().enumerate() {
        let row = &s.items[slot * d..(slot + 1) * d];
        for (acc, &x) in s.grad.iter_mut().zip(row) {
            *acc += g * x as f64;
        }
    }

    for (&z, &g) in std::iter::once(&item).chain(negatives).zip(&s.coeffs) {
        let step = lr * g;
        rows.load_item(z, &mut s.row);
        for (x, &uv) in s.row.iter_mut().zip(&s.user) {
            *x += (step * uv as f64) as f32;
        }
        rows.store_item(z, &s.row);
    }

    for (x, &g) in s.user.iter_mut().zip(&s.grad) {
        *x += (lr * g) as f32;
    }
    rows.store_user(user, &s.user);
    loss
}

/// Applies one update in place, as used by training.
pub fn sgd_step(store: &mut EmbeddingStore, user: usize, item: usize, negatives: &[u32], lr: f64) {
    let mut scratch = Scratch::default();
    apply_step(store, user as u32, item as u32, negatives, lr, &mut scratch);
}

/// `-log σ(e_u · e_i) - Σ_j log σ(-e_u · e_j)`.
pub fn sampled_loss(store: &EmbeddingStore, user: usize, item: usize, negatives: &[u32]) -> f64 {
    softplus(-store.score(user, item))
        + negatives
            .iter()
            .map(|&j| softplus(store.score(user, j as usize)))
            .sum::<f64>()
}

/// Gradient of [`sampled_loss`] with respect to the touched rows.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeGradient {
    pub user: Vec<f64>,
    /// One entry per occurrence in `[positive, negatives...]`; repeated items
    /// contribute one entry each.
    pub items: Vec<(u32, Vec<f64>)>,
}

/// Analytic gradient of the sampled loss; `sgd_step` moves each row by
/// `-lr` times this.
pub fn edge_gradient(store: &EmbeddingStore, user: usize, item: usize, negatives: &[u32]) -> EdgeGradient {
    let u = store.user(user);
    let mut user_grad = vec![0.0; store.dim()];
    let mut items = Vec::with_capacity(negatives.len() + 1);
    for (slot, &z) in std::iter::once(&(item as u32)).chain(negatives).enumerate() {
        let e = store.item(z as usize);
        let label = if slot == 0 { 1.0 } else { 0.0 };
        let g = label - sigmoid(dot(u, e));
        for (acc, &x) in user_grad.iter_mut().zip(e) {
            *acc -= g * x as f64;
        }
        items.push((z, u.iter().map(|&x| -g * x as f64).collect()));
    }
    EdgeGradient {
        user: user_grad,
        items,
    }
}

/// `-Σ_(u,i) w_ui log p(i|u)` with `p(·|u)` the full softmax over items.
pub fn exact_kl_loss(store: &EmbeddingStore, graph: &InteractionGraph) -> Result<f64> {
    let work = graph.edge_count() as u128 * graph.item_count() as u128;
    if work > EXACT_LOSS_LIMIT {
        return Err(Error::DiagnosticTooLarge(work));
    }
    check_shapes(store, graph)?;
    let per_user: Vec<f64> = (0..graph.user_count())
        .into_par_iter()
        .map(|u| {
            if graph.user_edge_count(u) == 0 {
                return 0.0;
            }
            let scores: Vec<f64> = (0..graph.item_count()).map(|i| store.score(u, i)).collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            graph
                .neighbor_items(u)
                .iter()
                .zip(graph.neighbor_weights(u))
                .map(|(&i, &w)| w * (lse - scores[i as usize]))
                .sum()
        })
        .collect();
    Ok(per_user.iter().sum())
}

pub(crate) fn check_shapes(store: &EmbeddingStore, graph: &InteractionGraph) -> Result<()> {
    if store.user_count() != graph.user_count() || store.item_count() != graph.item_count() {
        return Err(Error::DimensionMismatch(format!(
            "store has {}x{} rows, graph has {} users and {} items",
            store.user_count(),
            store.item_count(),
            graph.user_count(),
            graph.item_count()
        )));
    }
    Ok(())
}

/// Sampled positives and negatives for one user in one epoch.
pub(crate) struct UserPlan {
    pub user: u32,
    pub positives: Vec<u32>,
    pub negatives: Vec<u32>,
}

/// Everything an epoch needs that is fixed for the whole run.
pub(crate) struct EpochContext<'a> {
    pub graph: &'a InteractionGraph,
    pub config: &'a TrainConfig,
    pub positives: PositiveSampler,
    pub negatives: NegativeSampler,
    pub active: Vec<u32>,
}

impl<'a> EpochContext<'a> {
    pub fn new(graph: &'a InteractionGraph, config: &'a TrainConfig) -> Result<Self> {
        config.validate()?;
        if graph.edge_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(EpochContext {
            graph,
            config,
            positives: PositiveSampler::new(graph, config.samples_per_user, config.selection_params())?,
            negatives: NegativeSampler::new(graph)?,
            active: graph.active_users(),
        })
    }

    pub fn positives_per_epoch(&self) -> u64 {
        (self.config.samples_per_user * self.active.len()) as u64
    }

    /// Linear decay from `λ0` to `1e-4 λ0` over the whole run. A worker
    /// holding `local_total` positives maps its own progress onto the epoch
    /// so that concurrent workers share one schedule.
    pub fn learning_rate(&self, epoch: usize, local_step: u64, local_total: u64) -> f64 {
        let per_epoch = self.positives_per_epoch() as u128;
        let total = per_epoch * self.config.epochs as u128;
        let progress = if local_total == 0 {
            0
        } else {
            local_step as u128 * per_epoch / local_total as u128
        };
        let t = epoch as u128 * per_epoch + progress;
        let frac = 1.0 - t as f64 / total.max(1) as f64;
        self.config.learning_rate * frac.max(MIN_LR_FRACTION)
    }

    pub fn plan_user(&self, epoch: usize, user: u32, plan: &mut UserPlan) -> Result<()> {
        let seed = self.config.seed;
        let k = self.config.negatives;
        let mut pos_rng = rng::user_stream(seed, Stream::Positive, epoch, user);
        let mut neg_rng = rng::user_stream(seed, Stream::Negative, epoch, user);
        plan.user = user;
        self.positives
            .sample_into(self.graph, user as usize, &mut pos_rng, &mut plan.positives)?;
        plan.negatives.clear();
        let mut buf = Vec::with_capacity(k);
        for &p in &plan.positives {
            self.negatives.sample_into(p, k, &mut neg_rng, &mut buf);
            plan.negatives.extend_from_slice(&buf);
        }
        Ok(())
    }

    pub fn empty_plan(&self) -> UserPlan {
        UserPlan {
            user: 0,
            positives: Vec::with_capacity(self.config.samples_per_user),
            negatives: Vec::with_capacity(self.config.samples_per_user * self.config.negatives),
        }
    }

    /// Runs the plan's updates; `step` is the worker-local positive counter.
    pub fn run_plan<R: Rows + ?Sized>(
        &self,
        rows: &mut R,
        plan: &UserPlan,
        epoch: usize,
        step: &mut u64,
        local_total: u64,
        scratch: &mut Scratch,
    ) -> f64 {
        let k = self.config.negatives;
        let mut loss = 0.0;
        for (j, &item) in plan.positives.iter().enumerate() {
            let lr = self.learning_rate(epoch, *step, local_total);
            loss += apply_step(rows, plan.user, item, &plan.negatives[j * k..(j + 1) * k], lr, scratch);
            *step += 1;
        }
        loss
    }

    /// Samples and trains a block of users sequentially.
    pub fn run_users<R: Rows + ?Sized>(&self, rows: &mut R, users: &[u32], epoch: usize) -> Result<f64> {
        let local_total = (users.len() * self.config.samples_per_user) as u64;
        let mut plan = self.empty_plan();
        let mut scratch = Scratch::default();
        let mut step = 0;
        let mut loss = 0.0;
        for &u in users {
            self.plan_user(epoch, u, &mut plan)?;
            loss += self.run_plan(rows, &plan, epoch, &mut step, local_total, &mut scratch);
        }
        Ok(loss)
    }

    pub fn epoch_stats(&self, epoch: usize, loss: f64, started: Instant) -> EpochStats {
        let positives = self.positives_per_epoch();
        EpochStats {
            epoch,
            mean_loss: if positives == 0 { 0.0 } else { loss / positives as f64 },
            seconds: started.elapsed().as_secs_f64(),
            positives,
            row_updates: positives * (self.config.negatives as u64 + 2),
        }
    }
}

/// Trains embeddings for `graph` with shared-memory SGD.
pub fn train(graph: &InteractionGraph, config: &TrainConfig) -> Result<(EmbeddingStore, TrainReport)> {
    let ctx = EpochContext::new(graph, config)?;
    let mut store = EmbeddingStore::init_for_graph(graph, config.dim, config.seed)?;
    let mut report = TrainReport {
        active_users: ctx.active.len(),
        ..Default::default()
    };

    if config.workers == 1 {
        for epoch in 0..config.epochs {
            let started = Instant::now();
            let loss = ctx.run_users(&mut store, &ctx.active, epoch)?;
            report.epochs.push(ctx.epoch_stats(epoch, loss, started));
            if !store.is_finite() {
                return Err(Error::NonFinite(epoch));
            }
        }
        return Ok((store, report));
    }

    let shared = SharedMatrices::from_store(&store);
    let workers = config.workers.min(ctx.active.len().max(1));
    let blocks: Vec<Vec<u32>> = (0..workers)
        .map(|w| ctx.active.iter().skip(w).step_by(workers).copied().collect())
        .collect();
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let losses: Vec<Result<f64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = blocks
                .iter()
                .map(|block| {
                    let ctx = &ctx;
                    let mut rows = &shared;
                    scope.spawn(move || ctx.run_users(&mut rows, block, epoch))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training worker panicked"))
                .collect()
        });
        let mut loss = 0.0;
        for l in losses {
            loss += l?;
        }
        report.epochs.push(ctx.epoch_stats(epoch, loss, started));
        if !shared.is_finite() {
            shared.write_back(&mut store);
            return Err(Error::NonFinite(epoch));
        }
    }
    shared.write_back(&mut store);
    Ok((store, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeRecord;

    fn store(dim: usize, users: Vec<f32>, items: Vec<f32>) -> EmbeddingStore {
        EmbeddingStore::from_matrices(dim, users, items).unwrap()
    }

    #[test]
    fn zero_embeddings_are_a_fixed_point() {
        let mut s = store(3, vec![0.0; 3], vec![0.0; 9]);
        let before = s.clone();
        sgd_step(&mut s, 0, 0, &[1, 2], 0.5);
        assert_eq!(s, before);
        let g = edge_gradient(&s, 0, 0, &[1, 2]);
        assert!(g.user.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn one_dimensional_step() {
        let mut s = store(1, vec![1.0], vec![1.0]);
        sgd_step(&mut s, 0, 0, &[], 0.1);
        // 1 - σ(1) = 0.268941421369995 (30-digit reference).
        let expected = 1.0 + 0.1 * 0.268_941_421_369_995_1;
        assert!((s.user(0)[0] as f64 - expected).abs() < 1e-7);
        assert!((s.item(0)[0] as f64 - expected).abs() < 1e-7);
    }

    #[test]
    fn sigmoid_reference_values() {
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e6), sigmoid(30.0));
        assert!(sigmoid(-1e6) > 0.0);
    }

    #[test]
    fn loss_reference_values() {
        let s = store(2, vec![0.0; 2], vec![0.0; 12]);
        let l = sampled_loss(&s, 0, 0, &[1, 2, 3, 4, 5]);
        assert!((l - 4.158_883_083_359_672).abs() < 1e-12);

        let s = store(1, vec![1.0], vec![30.0, -30.0]);
        assert!(sampled_loss(&s, 0, 0, &[1, 1, 1]) < 1e-12);

        let s = store(1, vec![1.0], vec![1.0, -1.0]);
        assert!((sampled_loss(&s, 0, 0, &[1]) - 0.626_523_375_036_445_7).abs() < 1e-12);
    }

    #[test]
    fn only_touched_rows_change() {
        let mut s = EmbeddingStore::init(4, 10, 6, 3).unwrap();
        let before = s.clone();
        sgd_step(&mut s, 2, 1, &[4, 7, 4], 0.3);
        for u in 0..4 {
            assert_eq!(s.user(u) == before.user(u), u != 2);
        }
        for i in 0..10 {
            assert_eq!(s.item(i) == before.item(i), ![1, 4, 7].contains(&i));
        }
    }

    #[test]
    fn exact_loss_examples() {
        let g = InteractionGraph::ingest(vec![EdgeRecord::new("u", "a", 1.0), EdgeRecord::new("u", "b", 1.0)]).unwrap();
        let s = store(2, vec![0.0; 2], vec![0.0; 4]);
        assert!((exact_kl_loss(&s, &g).unwrap() - 1.386_294_361_119_890_6).abs() < 1e-12);

        let g = InteractionGraph::ingest(vec![EdgeRecord::new("u", "a", 1.0)]).unwrap();
        let s = store(2, vec![0.3, 0.1], vec![0.7, 0.2]);
        assert_eq!(exact_kl_loss(&s, &g).unwrap(), 0.0);

        let g = InteractionGraph::ingest((0..4).map(|i| EdgeRecord::new("u", format!("{i}"), 1.0))).unwrap();
        let s = store(2, vec![0.5, 0.5], [0.2, 0.4].repeat(4));
        assert!((exact_kl_loss(&s, &g).unwrap() - 5.545_177_444_479_562).abs() < 1e-12);
    }

    #[test]
    fn exact_loss_is_gated() {
        let g = InteractionGraph::ingest(
            (0..10_001).map(|i| EdgeRecord::new(format!("u{i}"), format!("i{i}"), 1.0)),
        )
        .unwrap();
        let s = EmbeddingStore::init_for_graph(&g, 1, 0).unwrap();
        assert!(matches!(exact_kl_loss(&s, &g), Err(Error::DiagnosticTooLarge(_))));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { dim: 0, ..Default::default() },
            TrainConfig { negatives: 0, ..Default::default() },
            TrainConfig { samples_per_user: 0, ..Default::default() },
            TrainConfig { workers: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { decay_base: 1.5, ..Default::default() },
            TrainConfig { decay_base: 0.0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))), "{bad:?}");
        }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let g = InteractionGraph::ingest(vec![EdgeRecord::new("u", "a", 1.0), EdgeRecord::new("v", "b", 1.0)]).unwrap();
        let cfg = TrainConfig { epochs: 0, dim: 4, ..Default::default() };
        let (s, report) = train(&g, &cfg).unwrap();
        assert_eq!(s, EmbeddingStore::init_for_graph(&g, 4, cfg.seed).unwrap());
        assert!(report.epochs.is_empty());
    }

    #[test]
    fn learning_rate_schedule() {
        let g = InteractionGraph::ingest(vec![EdgeRecord::new("u", "a", 1.0), EdgeRecord::new("v", "b", 1.0)]).unwrap();
        let cfg = TrainConfig { epochs: 2, samples_per_user: 5, ..Default::default() };
        let ctx = EpochContext::new(&g, &cfg).unwrap();
        assert_eq!(ctx.learning_rate(0, 0, 10), 0.025);
        assert!((ctx.learning_rate(1, 0, 10) - 0.0125).abs() < 1e-15);
        assert!((ctx.learning_rate(1, 5, 10) - 0.00625).abs() < 1e-15);
        // A worker with half the users reaches the same point at half the steps.
        assert_eq!(ctx.learning_rate(1, 5, 10), ctx.learning_rate(1, 10, 20));
        assert_eq!(ctx.learning_rate(5, 0, 10), 0.025 * MIN_LR_FRACTION);
    }
}
