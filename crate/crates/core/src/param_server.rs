//! In-process simulation of parameter-server training.
//!
//! A [`ShardedStore`] owns every embedding row, partitioned by a hash of the
//! vertex key. Each iteration (one epoch) the server hands every worker a
//! contiguous block of active users. A worker pulls its users' rows and,
//! once its positives and negatives are sampled, the rows of exactly the
//! items it will touch. It then runs the usual SGD updates on its local
//! snapshot and pushes everything it touched back. All pulls of an
//! iteration happen before any push. Pushes overwrite server rows (last
//! writer wins, in worker-id order), so concurrent updates to a shared item
//! row from different workers are not merged.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Barrier, Condvar, Mutex};
use std::time::Instant;

use crate::embedding::EmbeddingStore;
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::trainer::{EpochContext, Rows, Scratch, TrainConfig, TrainReport, UserPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexKey {
    User(u32),
    Item(u32),
}

impl VertexKey {
    fn hash64(self) -> u64 {
        let raw = match self {
            VertexKey::User(u) => u as u64,
            VertexKey::Item(i) => (1 << 32) | i as u64,
        };
        let mut x = raw.wrapping_add(0x9e37_79b9_7f4a_7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^ (x >> 31)
    }

    pub fn shard(self, shard_count: usize) -> usize {
        (self.hash64() % shard_count as u64) as usize
    }
}

impl fmt::Display for VertexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexKey::User(u) => write!(f, "user:{u}"),
            VertexKey::Item(i) => write!(f, "item:{i}"),
        }
    }
}

#[derive(Clone, Debug)]
struct Row {
    values: Vec<f32>,
    version: u64,
    /// Version at the start of the current iteration.
    floor: u64,
}

/// Rows returned by a pull, in request order.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulled {
    pub values: Vec<f32>,
    pub versions: Vec<u64>,
    /// Rows whose version was below the current iteration's floor.
    pub stale: u64,
}

/// Transport between workers and the parameter store.
pub trait ParameterServer: Sync {
    fn pull(&self, keys: &[VertexKey]) -> Result<Pulled>;
    /// Overwrites the rows for `keys` with consecutive `dim`-sized chunks of `values`.
    fn push(&self, keys: &[VertexKey], values: &[f32]) -> Result<()>;
}

pub struct ShardedStore {
    dim: usize,
    shards: Vec<Mutex<HashMap<VertexKey, Row>>>,
}

impl ShardedStore {
    pub fn from_store(store: &EmbeddingStore, shard_count: usize) -> Result<Self> {
        if shard_count == 0 {
            return Err(Error::InvalidConfig("shard count must be at least 1".into()));
        }
        let mut shards: Vec<HashMap<VertexKey, Row>> = vec![HashMap::new(); shard_count];
        let row = |values: &[f32]| Row {
            values: values.to_vec(),
            version: 0,
            floor: 0,
        };
        for u in 0..store.user_count() {
            let key = VertexKey::User(u as u32);
            shards[key.shard(shard_count)].insert(key, row(store.user(u)));
        }
        for i in 0..store.item_count() {
            let key = VertexKey::Item(i as u32);
            shards[key.shard(shard_count)].insert(key, row(store.item(i)));
        }
        Ok(ShardedStore {
            dim: store.dim(),
            shards: shards.into_iter().map(Mutex::new).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shard_count(&self) -> usize {
        self.shards.len()
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|s| s.lock().unwrap().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn version(&self, key: VertexKey) -> Option<u64> {
        self.shards[key.shard(self.shard_count())]
            .lock()
            .unwrap()
            .get(&key)
            .map(|r| r.version)
    }

    /// Marks the start of an iteration: reads of rows older than now count as stale.
    pub fn begin_iteration(&self) {
        for shard in &self.shards {
            for row in shard.lock().unwrap().values_mut() {
                row.floor = row.version;
            }
        }
    }

    /// True when every key sits in its hash shard and the key set is exactly
    /// `users` user rows plus `items` item rows.
    pub fn check_partition(&self, users: usize, items: usize) -> bool {
        let shard_count = self.shard_count();
        let mut total = 0;
        for (idx, shard) in self.shards.iter().enumerate() {
            let shard = shard.lock().unwrap();
            for key in shard.keys() {
                let in_range = match *key {
                    VertexKey::User(u) => (u as usize) < users,
                    VertexKey::Item(i) => (i as usize) < items,
                };
                if !in_range || key.shard(shard_count) != idx {
                    return false;
                }
            }
            total += shard.len();
        }
        total == users + items
    }

    fn all_finite(&self) -> bool {
        self.shards
            .iter()
            .all(|s| s.lock().unwrap().values().all(|r| r.values.iter().all(|x| x.is_finite())))
    }

    /// Reassembles a dense store, taking ids from `template`.
    pub fn to_store(&self, template: &EmbeddingStore) -> Result<EmbeddingStore> {
        let users: Vec<VertexKey> = (0..template.user_count() as u32).map(VertexKey::User).collect();
        let items: Vec<VertexKey> = (0..template.item_count() as u32).map(VertexKey::Item).collect();
        let users = self.pull(&users)?.values;
        let items = self.pull(&items)?.values;
        EmbeddingStore::from_matrices(self.dim, users, items)?
            .with_ids(template.user_ids().to_vec(), template.item_ids().to_vec())
    }

    fn group_by_shard(&self, keys: &[VertexKey]) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.shard_count()];
        for (pos, key) in keys.iter().enumerate() {
            groups[key.shard(self.shard_count())].push(pos);
        }
        groups
    }
}

impl ParameterServer for ShardedStore {
    fn pull(&self, keys: &[VertexKey]) -> Result<Pulled> {
        let d = self.dim;
        let mut values = vec![0.0; keys.len() * d];
        let mut versions = vec![0; keys.len()];
        let mut stale = 0;
        for (shard, positions) in self.group_by_shard(keys).into_iter().enumerate() {
            if positions.is_empty() {
                continue;
            }
            let shard = self.shards[shard].lock().unwrap();
            for pos in positions {
                let row = shard
                    .get(&keys[pos])
                    .ok_or_else(|| Error::MissingKey(keys[pos].to_string()))?;
                values[pos * d..(pos + 1) * d].copy_from_slice(&row.values);
                versions[pos] = row.version;
                if row.version < row.floor {
                    stale += 1;
                }
            }
        }
        Ok(Pulled {
            values,
            versions,
            stale,
        })
    }

    fn push(&self, keys: &[VertexKey], values: &[f32]) -> Result<()> {
        let d = self.dim;
        if values.len() != keys.len() * d {
            return Err(Error::DimensionMismatch(format!(
                "pushed {} values for {} keys of dimension {d}",
                values.len(),
                keys.len()
            )));
        }
        let groups = self.group_by_shard(keys);
        for (shard, positions) in groups.iter().enumerate() {
            let shard = self.shards[shard].lock().unwrap();
            if let Some(&pos) = positions.iter().find(|&&p| !shard.contains_key(&keys[p])) {
                return Err(Error::MissingKey(keys[pos].to_string()));
            }
        }
        for (shard, positions) in groups.into_iter().enumerate() {
            if positions.is_empty() {
                continue;
            }
            let mut shard = self.shards[shard].lock().unwrap();
            for pos in positions {
                let row = shard.get_mut(&keys[pos]).expect("key checked above");
                row.values.copy_from_slice(&values[pos * d..(pos + 1) * d]);
                row.version += 1;
            }
        }
        Ok(())
    }
}

/// A worker's share of one iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkerTask {
    pub worker_id: usize,
    pub assigned_users: Vec<u32>,
}

/// Splits `users` into `workers` contiguous blocks whose sizes differ by at
/// most one. Block `b` goes to worker `(b + iteration) % workers`.
pub fn assign(users: &[u32], workers: usize, iteration: usize) -> Vec<WorkerTask> {
    let workers = workers.max(1);
    let base = users.len() / workers;
    let extra = users.len() % workers;
    let mut tasks: Vec<WorkerTask> = Vec::with_capacity(workers);
    let mut start = 0;
    for block in 0..workers {
        let len = base + usize::from(block < extra);
        tasks.push(WorkerTask {
            worker_id: (block + iteration) % workers,
            assigned_users: users[start..start + len].to_vec(),
        });
        start += len;
    }
    tasks.sort_by_key(|t| t.worker_id);
    tasks
}

/// A worker's pulled snapshot of the rows it needs.
struct LocalRows {
    dim: usize,
    user_slot: HashMap<u32, usize>,
    item_slot: HashMap<u32, usize>,
    users: Vec<f32>,
    items: Vec<f32>,
}

impl Rows for LocalRows {
    fn dim(&self) -> usize {
        self.dim
    }
    fn load_user(&self, user: u32, out: &mut [f32]) {
        let s = self.user_slot[&user];
        out.copy_from_slice(&self.users[s * self.dim..(s + 1) * self.dim]);
    }
    fn store_user(&mut self, user: u32, row: &[f32]) {
        let s = self.user_slot[&user];
        self.users[s * self.dim..(s + 1) * self.dim].copy_from_slice(row);
    }
    fn load_item(&self, item: u32, out: &mut [f32]) {
        let s = self.item_slot[&item];
        out.copy_from_slice(&self.items[s * self.dim..(s + 1) * self.dim]);
    }
    fn store_item(&mut self, item: u32, row: &[f32]) {
        let s = self.item_slot[&item];
        self.items[s * self.dim..(s + 1) * self.dim].copy_from_slice(row);
    }
}

struct WorkerOutcome {
    loss: f64,
    stale: u64,
}

/// Iteration phases shared by the workers of one epoch. Every worker pulls
/// before any worker pushes, and pushes land in worker-id order, so each
/// iteration reads a consistent snapshot and resolves conflicts the same
/// way on every run.
struct Phases {
    pulled: Barrier,
    turn: Mutex<usize>,
    next: Condvar,
}

impl Phases {
    fn new(workers: usize) -> Self {
        Phases {
            pulled: Barrier::new(workers),
            turn: Mutex::new(0),
            next: Condvar::new(),
        }
    }

    fn wait_turn(&self, worker: usize) {
        let mut turn = self.turn.lock().unwrap();
        while *turn != worker {
            turn = self.next.wait(turn).unwrap();
        }
    }

    fn end_turn(&self) {
        *self.turn.lock().unwrap() += 1;
        self.next.notify_all();
    }
}

struct Pending {
    user_keys: Vec<VertexKey>,
    item_keys: Vec<VertexKey>,
    plans: Vec<UserPlan>,
    local: LocalRows,
    stale: u64,
}

fn pull_task<S: ParameterServer + ?Sized>(
    ctx: &EpochContext<'_>,
    server: &S,
    task: &WorkerTask,
    epoch: usize,
    dim: usize,
) -> Result<Pending> {
    let user_keys: Vec<VertexKey> = task.assigned_users.iter().map(|&u| VertexKey::User(u)).collect();
    let pulled_users = server.pull(&user_keys)?;

    let mut plans = Vec::with_capacity(task.assigned_users.len());
    for &u in &task.assigned_users {
        let mut plan: UserPlan = ctx.empty_plan();
        ctx.plan_user(epoch, u, &mut plan)?;
        plans.push(plan);
    }
    let mut needed: Vec<u32> = plans
        .iter()
        .flat_map(|p| p.positives.iter().chain(&p.negatives).copied())
        .collect();
    needed.sort_unstable();
    needed.dedup();
    let item_keys: Vec<VertexKey> = needed.iter().map(|&i| VertexKey::Item(i)).collect();
    let pulled_items = server.pull(&item_keys)?;

    Ok(Pending {
        local: LocalRows {
            dim,
            user_slot: task.assigned_users.iter().enumerate().map(|(s, &u)| (u, s)).collect(),
            item_slot: needed.iter().enumerate().map(|(s, &i)| (i, s)).collect(),
            users: pulled_users.values,
            items: pulled_items.values,
        },
        user_keys,
        item_keys,
        plans,
        stale: pulled_users.stale + pulled_items.stale,
    })
}

fn run_worker<S: ParameterServer + ?Sized>(
    ctx: &EpochContext<'_>,
    server: &S,
    task: &WorkerTask,
    phases: &Phases,
    epoch: usize,
    dim: usize,
) -> Result<WorkerOutcome> {
    // Phase calls happen on every path, errors included, so no worker is
    // left waiting.
    let pending = pull_task(ctx, server, task, epoch, dim);
    phases.pulled.wait();

    let computed = pending.map(|mut p| {
        let local_total = (task.assigned_users.len() * ctx.config.samples_per_user) as u64;
        let mut scratch = Scratch::default();
        let mut step = 0;
        let mut loss = 0.0;
        for plan in &p.plans {
            loss += ctx.run_plan(&mut p.local, plan, epoch, &mut step, local_total, &mut scratch);
        }
        (p, loss)
    });

    phases.wait_turn(task.worker_id);
    let pushed = computed.and_then(|(p, loss)| {
        server.push(&p.user_keys, &p.local.users)?;
        server.push(&p.item_keys, &p.local.items)?;
        Ok(WorkerOutcome { loss, stale: p.stale })
    });
    phases.end_turn();
    pushed
}

/// Trains through the simulated parameter server with `config.workers`
/// concurrent workers and `shard_count` shards.
pub fn ps_train(graph: &InteractionGraph, config: &TrainConfig, shard_count: usize) -> Result<(EmbeddingStore, TrainReport)> {
    config.validate()?;
    let init = EmbeddingStore::init_for_graph(graph, config.dim, config.seed)?;
    let server = ShardedStore::from_store(&init, shard_count)?;
    let report = ps_train_on(&server, graph, config)?;
    Ok((server.to_store(&init)?, report))
}

/// Runs training against an existing server whose rows cover `graph`.
pub fn ps_train_on(server: &ShardedStore, graph: &InteractionGraph, config: &TrainConfig) -> Result<TrainReport> {
    let ctx = EpochContext::new(graph, config)?;
    if server.dim() != config.dim {
        return Err(Error::DimensionMismatch(format!(
            "server rows have dimension {}, config asks for {}",
            server.dim(),
            config.dim
        )));
    }
    let mut report = TrainReport {
        active_users: ctx.active.len(),
        ..Default::default()
    };

    for epoch in 0..config.epochs {
        let started = Instant::now();
        server.begin_iteration();
        let tasks = assign(&ctx.active, config.workers, epoch);
        let phases = Phases::new(tasks.len());
        let outcomes: Vec<Result<WorkerOutcome>> = std::thread::scope(|scope| {
            let handles: Vec<_> = tasks
                .iter()
                .map(|task| {
                    let (ctx, phases) = (&ctx, &phases);
                    scope.spawn(move || run_worker(ctx, server, task, phases, epoch, config.dim))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("parameter-server worker panicked"))
                .collect()
        });
        let mut loss = 0.0;
        for outcome in outcomes {
            let outcome = outcome?;
            loss += outcome.loss;
            report.stale_reads += outcome.stale;
        }
        report.epochs.push(ctx.epoch_stats(epoch, loss, started));
        if !server.check_partition(graph.user_count(), graph.item_count()) {
            return Err(Error::CorruptFile(format!("shard partition broken after epoch {epoch}")));
        }
        if !server.all_finite() {
            return Err(Error::NonFinite(epoch));
        }
    }
    Ok(report)
}
