//! Bipartite user-item interaction graph.
//!
//! Edges are stored in compressed sparse row form keyed by user. External
//! string ids are mapped to dense indices in first-seen order at ingest.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;


use crate::error::{Error, Result};

/// Sentinel stored in the cluster column for edges without a cluster label.
pub const NO_CLUSTER: u32 = u32::MAX;

const GRAPH_MAGIC: &[u8; 4] = b"RNEG";
const GRAPH_VERSION: u8 = 1;

/// One interaction as read from an edge file.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub user_id: String,
    pub item_id: String,
    pub weight: f64,
    /// Seconds since the epoch.
    pub timestamp: Option<f64>,
    pub cluster_id: Option<String>,
}

impl EdgeRecord {
    pub fn new(user_id: impl Into<String>, item_id: impl Into<String>, weight: f64) -> Self {
        EdgeRecord {
            user_id: user_id.into(),
            item_id: item_id.into(),
            weight,
            timestamp: None,
            cluster_id: None,
        }
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn with_cluster(mut self, cluster_id: impl Into<String>) -> Self {
        self.cluster_id = Some(cluster_id.into());
        self
    }
}

/// Dense index assignment for external ids, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    /// Index of `id`, inserting it if new; the flag is true on insertion.
    pub(crate) fn insert_full(&mut self, id: String) -> (usize, bool) {
        if let Some(&i) = self.index.get(&id) {
            return (i as usize, false);
        }
        let i = self.ids.len();
        self.index.insert(id.clone(), i as u32);
        self.ids.push(id);
        (i, true)
    }

    pub(crate) fn insert(&mut self, id: String) -> bool {
        self.insert_full(id).1
    }

    pub(crate) fn get_index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| i as usize)
    }

    pub(crate) fn as_slice(&self) -> &[String] {
        &self.ids
    }

    pub(crate) fn len(&self) -> usize {
        self.ids.len()
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl std::ops::Index<usize> for IdMap {
    type Output = String;

    fn index(&self, i: usize) -> &String {
        &self.ids[i]
    }
}

impl FromIterator<String> for IdMap {
    fn from_iter<T: IntoIterator<Item = String>>(iter: T) -> Self {
        let mut map = IdMap::new();
        for id in iter {
            map.insert(id);
        }
        map
    }
}

/// A single user's edge as seen through the adjacency view.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub item: u32,
    pub weight: f64,
    pub hours_ago: f64,
    pub cluster: Option<u32>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct EdgeData {
    item: u32,
    weight: f64,
    hours_ago: f64,
    cluster: u32,
}

/// Immutable bipartite graph `G = (U, I, E)` with weighted edges.
#[derive(Clone, Debug)]
pub struct InteractionGraph {
    user_ids: IdMap,
    item_ids: IdMap,
    cluster_ids: IdMap,
    offsets: Vec<usize>,
    items: Vec<u32>,
    weights: Vec<f64>,
    hours_ago: Vec<f64>,
    clusters: Vec<u32>,
    user_degree: Vec<f64>,
    item_degree: Vec<f64>,
}

impl PartialEq for InteractionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.user_ids.as_slice() == other.user_ids.as_slice()
            && self.item_ids.as_slice() == other.item_ids.as_slice()
            && self.cluster_ids.as_slice() == other.cluster_ids.as_slice()
            && self.offsets == other.offsets
            && self.items == other.items
            && self.weights == other.weights
            && self.hours_ago == other.hours_ago
            && self.clusters == other.clusters
            && self.user_degree == other.user_degree
            && self.item_degree == other.item_degree
    }
}

struct PendingEdge {
    item: u32,
    weight: f64,
    timestamp: Option<f64>,
    cluster: u32,
}

impl InteractionGraph {
    /// Builds a graph from a stream of records.
    ///
    /// Duplicate `(user, item)` pairs are merged by summing weights and
    /// keeping the latest timestamp. Per user, `hours_ago` is measured from
    /// the user's most recent edge; a user with any untimed edge gets
    /// `hours_ago = 0` everywhere.
    pub fn ingest<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = EdgeRecord>,
    {
        let mut user_ids = IdMap::new();
        let mut item_ids = IdMap::new();
        let mut cluster_ids = IdMap::new();
        let mut pending: Vec<Vec<PendingEdge>> = Vec::new();
        let mut untimed: Vec<bool> = Vec::new();
        let mut slots: HashMap<(u32, u32), usize> = HashMap::new();

        for (idx, record) in records.into_iter().enumerate() {
            let line = idx + 1;
            if !record.weight.is_finite() || record.weight <= 0.0 {
                return Err(Error::Ingest {
                    line,
                    reason: format!("rejected row with weight {}", record.weight),
                });
            }
            if let Some(ts) = record.timestamp {
                if !ts.is_finite() {
                    return Err(Error::Ingest {
                        line,
                        reason: "non-finite timestamp".into(),
                    });
                }
            }
            if record.user_id.is_empty() || record.item_id.is_empty() {
                return Err(Error::Ingest {
                    line,
                    reason: "empty user or item id".into(),
                });
            }

            let (user, _) = user_ids.insert_full(record.user_id);
            let (item, _) = item_ids.insert_full(record.item_id);
            let cluster = match record.cluster_id {
                Some(c) => cluster_ids.insert_full(c).0 as u32,
                None => NO_CLUSTER,
            };
            if user == pending.len() {
                pending.push(Vec::new());
                untimed.push(false);
            }
            if record.timestamp.is_none() {
                untimed[user] = true;
            }

            let key = (user as u32, item as u32);
            match slots.get(&key) {
                Some(&slot) => {
                    let edge = &mut pending[user][slot];
                    edge.weight += record.weight;
                    edge.timestamp = match (edge.timestamp, record.timestamp) {
                        (Some(a), Some(b)) => Some(a.max(b)),
                        (a, b) => a.or(b),
                    };
                    if edge.cluster == NO_CLUSTER {
                        edge.cluster = cluster;
                    }
                }
                None => {
                    slots.insert(key, pending[user].len());
                    pending[user].push(PendingEdge {
                        item: item as u32,
                        weight: record.weight,
                        timestamp: record.timestamp,
                        cluster,
                    });
                }
            }
        }

        if pending.is_empty() {
            return Err(Error::EmptyStream);
        }

        let adjacency = pending
            .into_iter()
            .zip(untimed)
            .map(|(edges, untimed)| {
                let latest = if untimed {
                    None
                } else {
                    edges
                        .iter()
                        .filter_map(|e| e.timestamp)
                        .max_by(f64::total_cmp)
                };
                edges
                    .into_iter()
                    .map(|e| EdgeData {
                        item: e.item,
                        weight: e.weight,
                        hours_ago: match (latest, e.timestamp) {
                            (Some(latest), Some(ts)) => (latest - ts) / 3600.0,
                            _ => 0.0,
                        },
                        cluster: e.cluster,
                    })
                    .collect()
            })
            .collect();

        Ok(Self::from_adjacency(user_ids, item_ids, cluster_ids, adjacency))
    }

    /// Assembles the CSR arrays and degree tables. `hours_ago` is
    /// re-anchored so each user's most recent remaining edge sits at zero.
    pub(crate) fn from_adjacency(
        user_ids: IdMap,
        item_ids: IdMap,
        cluster_ids: IdMap,
        adjacency: Vec<Vec<EdgeData>>,
    ) -> Self {
        debug_assert_eq!(user_ids.len(), adjacency.len());
        let edge_count = adjacency.iter().map(Vec::len).sum();
        let mut offsets = Vec::with_capacity(adjacency.len() + 1);
        let mut items = Vec::with_capacity(edge_count);
        let mut weights = Vec::with_capacity(edge_count);
        let mut hours_ago = Vec::with_capacity(edge_count);
        let mut clusters = Vec::with_capacity(edge_count);
        let mut user_degree = Vec::with_capacity(adjacency.len());
        let mut item_degree = vec![0.0; item_ids.len()];

        offsets.push(0);
        for edges in &adjacency {
            let anchor = edges
                .iter()
                .map(|e| e.hours_ago)
                .min_by(f64::total_cmp)
                .unwrap_or(0.0);
            let mut degree = 0.0;
            for e in edges {
                items.push(e.item);
                weights.push(e.weight);
                hours_ago.push(e.hours_ago - anchor);
                clusters.push(e.cluster);
                degree += e.weight;
                item_degree[e.item as usize] += e.weight;
            }
            user_degree.push(degree);
            offsets.push(items.len());
        }

        InteractionGraph {
            user_ids,
            item_ids,
            cluster_ids,
            offsets,
            items,
            weights,
            hours_ago,
            clusters,
            user_degree,
            item_degree,
        }
    }

    fn edge_data(&self, user: usize) -> Vec<EdgeData> {
        let range = self.offsets[user]..self.offsets[user + 1];
        range
            .map(|e| EdgeData {
                item: self.items[e],
                weight: self.weights[e],
                hours_ago: self.hours_ago[e],
                cluster: self.clusters[e],
            })
            .collect()
    }

    pub fn user_count(&self) -> usize {
        self.user_ids.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.items.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_ids.len()
    }

    /// Number of distinct items the user interacted with.
    pub fn user_edge_count(&self, user: usize) -> usize {
        self.offsets[user + 1] - self.offsets[user]
    }

    /// Weighted degree `d_u`.
    pub fn user_degree(&self, user: usize) -> f64 {
        self.user_degree[user]
    }

    /// Weighted degree `d_i`.
    pub fn item_degree(&self, item: usize) -> f64 {
        self.item_degree[item]
    }

    pub fn user_degrees(&self) -> &[f64] {
        &self.user_degree
    }

    pub fn item_degrees(&self) -> &[f64] {
        &self.item_degree
    }

    /// Item indices adjacent to `user`, in insertion order.
    pub fn neighbor_items(&self, user: usize) -> &[u32] {
        &self.items[self.offsets[user]..self.offsets[user + 1]]
    }

    pub fn neighbor_weights(&self, user: usize) -> &[f64] {
        &self.weights[self.offsets[user]..self.offsets[user + 1]]
    }

    pub fn neighbors(&self, user: usize) -> impl ExactSizeIterator<Item = Edge> + '_ {
        (self.offsets[user]..self.offsets[user + 1]).map(move |e| Edge {
            item: self.items[e],
            weight: self.weights[e],
            hours_ago: self.hours_ago[e],
            cluster: (self.clusters[e] != NO_CLUSTER).then_some(self.clusters[e]),
        })
    }

    /// Users with at least one edge, ascending.
    pub fn active_users(&self) -> Vec<u32> {
        (0..self.user_count())
            .filter(|&u| self.user_edge_count(u) > 0)
            .map(|u| u as u32)
            .collect()
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.item_ids[item]
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.get_index_of(id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.get_index_of(id)
    }

    pub fn user_ids(&self) -> &[String] {
        self.user_ids.as_slice()
    }

    pub fn item_ids(&self) -> &[String] {
        self.item_ids.as_slice()
    }

    pub fn cluster_id(&self, cluster: u32) -> &str {
        &self.cluster_ids[cluster as usize]
    }

    /// Empirical conditional `p̂(i|u) = w_ui / d_u` over the user's neighbors.
    pub fn empirical_distribution(&self, user: usize) -> Result<Vec<(u32, f64)>> {
        if user >= self.user_count() || self.user_edge_count(user) == 0 {
            return Err(Error::DegenerateUser(user));
        }
        let degree = self.user_degree[user];
        Ok(self
            .neighbor_items(user)
            .iter()
            .zip(self.neighbor_weights(user))
            .map(|(&i, &w)| (i, w / degree))
            .collect())
    }

    /// Keeps users with strictly more than `threshold` edges, drops items left
    /// without edges and re-densifies both index spaces.
    pub fn filter_min_interactions(&self, threshold: usize) -> Result<Self> {
        let kept_users: Vec<usize> = (0..self.user_count())
            .filter(|&u| self.user_edge_count(u) > threshold)
            .collect();
        let mut item_used = vec![false; self.item_count()];
        for &u in &kept_users {
            for &i in self.neighbor_items(u) {
                item_used[i as usize] = true;
            }
        }
        let mut item_remap = vec![u32::MAX; self.item_count()];
        let mut item_ids = IdMap::new();
        for (i, used) in item_used.iter().enumerate() {
            if *used {
                item_remap[i] = item_ids.insert_full(self.item_ids[i].clone()).0 as u32;
            }
        }
        if kept_users.is_empty() || item_ids.is_empty() {
            return Err(Error::EmptyGraph);
        }

        let user_ids: IdMap = kept_users
            .iter()
            .map(|&u| self.user_ids[u].clone())
            .collect();
        let adjacency = kept_users
            .iter()
            .map(|&u| {
                let mut edges = self.edge_data(u);
                for e in &mut edges {
                    e.item = item_remap[e.item as usize];
                }
                edges
            })
            .collect();
        Ok(Self::from_adjacency(
            user_ids,
            item_ids,
            self.cluster_ids.clone(),
            adjacency,
        ))
    }

    /// Subgraph over the same id spaces keeping edges for which
    /// `keep(user, position_in_user_list)` is true.
    pub fn retain_edges<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(usize, usize) -> bool,
    {
        let adjacency = (0..self.user_count())
            .map(|u| {
                self.edge_data(u)
                    .into_iter()
                    .enumerate()
                    .filter(|(pos, _)| keep(u, *pos))
                    .map(|(_, e)| e)
                    .collect()
            })
            .collect();
        Self::from_adjacency(
            self.user_ids.clone(),
            self.item_ids.clone(),
            self.cluster_ids.clone(),
            adjacency,
        )
    }

    /// Writes the binary graph cache.
    ///
    /// Layout (little-endian): magic `RNEG`, version byte, user/item/cluster/edge
    /// counts as `u64`, the three id tables as length-prefixed UTF-8, then the
    /// CSR offsets (`u64`) followed by item (`u32`), weight (`f64`),
    /// hours-ago (`f64`) and cluster (`u32`) columns.
    pub fn write_cache<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        w.write_all(GRAPH_MAGIC)?;
        w.write_all(&[GRAPH_VERSION])?;
        for count in [
            self.user_count(),
            self.item_count(),
            self.cluster_count(),
            self.edge_count(),
        ] {
            w.write_all(&(count as u64).to_le_bytes())?;
        }
        for table in [&self.user_ids, &self.item_ids, &self.cluster_ids] {
            for id in table.as_slice() {
                write_string(&mut w, id)?;
            }
        }
        for &o in &self.offsets {
            w.write_all(&(o as u64).to_le_bytes())?;
        }
        for &i in &self.items {
            w.write_all(&i.to_le_bytes())?;
        }
        for &x in &self.weights {
            w.write_all(&x.to_le_bytes())?;
        }
        for &x in &self.hours_ago {
            w.write_all(&x.to_le_bytes())?;
        }
        for &c in &self.clusters {
            w.write_all(&c.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_cache<R: Read>(reader: R) -> Result<Self> {
        let mut r = BufReader::new(reader);
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != GRAPH_MAGIC {
            return Err(Error::CorruptFile("bad graph cache magic".into()));
        }
        let mut version = [0u8; 1];
        read_exact(&mut r, &mut version)?;
        if version[0] != GRAPH_VERSION {
            return Err(Error::Version {
                found: version[0],
                expected: GRAPH_VERSION,
            });
        }
        let users = read_u64(&mut r)? as usize;
        let items = read_u64(&mut r)? as usize;
        let clusters = read_u64(&mut r)? as usize;
        let edges = read_u64(&mut r)? as usize;

        let mut read_ids = |count: usize| -> Result<IdMap> {
            let mut set = IdMap::new();
            for _ in 0..count {
                if !set.insert(read_string(&mut r)?) {
                    return Err(Error::CorruptFile("duplicate id in graph cache".into()));
                }
            }
            Ok(set)
        };
        let user_ids = read_ids(users)?;
        let item_ids = read_ids(items)?;
        let cluster_ids = read_ids(clusters)?;

        let mut offsets = Vec::with_capacity(users + 1);
        for _ in 0..=users {
            offsets.push(read_u64(&mut r)? as usize);
        }
        if offsets[0] != 0
            || offsets[users] != edges
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::CorruptFile("inconsistent CSR offsets".into()));
        }
        let mut adjacency: Vec<Vec<EdgeData>> = offsets
            .windows(2)
            .map(|w| Vec::with_capacity(w[1] - w[0]))
            .collect();
        let mut item_col = Vec::with_capacity(edges);
        for _ in 0..edges {
            let item = read_u32(&mut r)?;
            if item as usize >= items {
                return Err(Error::CorruptFile(format!("item index {item} out of range")));
            }
            item_col.push(item);
        }
        let mut weight_col = Vec::with_capacity(edges);
        for _ in 0..edges {
            weight_col.push(read_f64(&mut r)?);
        }
        let mut hours_col = Vec::with_capacity(edges);
        for _ in 0..edges {
            hours_col.push(read_f64(&mut r)?);
        }
        let mut user = 0;
        for e in 0..edges {
            let cluster = read_u32(&mut r)?;
            if cluster != NO_CLUSTER && cluster as usize >= clusters {
                return Err(Error::CorruptFile(format!(
                    "cluster index {cluster} out of range"
                )));
            }
            while offsets[user + 1] <= e {
                user += 1;
            }
            adjacency[user].push(EdgeData {
                item: item_col[e],
                weight: weight_col[e],
                hours_ago: hours_col[e],
                cluster,
            });
        }
        Ok(Self::from_adjacency(user_ids, item_ids, cluster_ids, adjacency))
    }

    pub fn save_cache(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_cache(file)
    }

    pub fn load_cache(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_cache(file)
    }
}

/// Parses the tab-separated edge format
/// `user_id \t item_id \t weight \t timestamp \t cluster_id`.
///
/// Trailing fields may be empty or missing; blank lines and lines starting
/// with `#` are skipped. Errors carry 1-based line numbers.
pub fn parse_edges<R: BufRead>(reader: R) -> Result<Vec<EdgeRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let fail = |reason: String| Error::Ingest {
            line: line_no,
            reason,
        };
        if fields.len() < 2 || fields.len() > 5 {
            return Err(fail(format!("expected 2 to 5 fields, found {}", fields.len())));
        }
        let user_id = fields[0].trim();
        let item_id = fields[1].trim();
        if user_id.is_empty() || item_id.is_empty() {
            return Err(fail("empty user or item id".into()));
        }
        let field = |n: usize| fields.get(n).map(|f| f.trim()).filter(|f| !f.is_empty());
        let weight = match field(2) {
            Some(w) => w
                .parse::<f64>()
                .map_err(|_| fail(format!("invalid weight {w:?}")))?,
            None => 1.0,
        };
        if !weight.is_finite() || weight <= 0.0 {
            return Err(fail(format!("rejected row with weight {weight}")));
        }
        let timestamp = match field(3) {
            Some(t) => {
                let ts = t
                    .parse::<f64>()
                    .map_err(|_| fail(format!("invalid timestamp {t:?}")))?;
                if !ts.is_finite() {
                    return Err(fail(format!("invalid timestamp {t:?}")));
                }
                Some(ts)
            }
            None => None,
        };
        records.push(EdgeRecord {
            user_id: user_id.to_string(),
            item_id: item_id.to_string(),
            weight,
            timestamp,
            cluster_id: field(4).map(str::to_string),
        });
    }
    Ok(records)
}

pub fn read_edge_file(path: impl AsRef<Path>) -> Result<Vec<EdgeRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_edges(BufReader::new(file))
}

/// Loads either a binary graph cache or a TSV edge file, sniffing the magic.
pub fn load_graph(path: impl AsRef<Path>) -> Result<InteractionGraph> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut magic = [0u8; 4];
    let n = file.read(&mut magic)?;
    drop(file);
    if n == 4 && &magic == GRAPH_MAGIC {
        InteractionGraph::load_cache(path)
    } else {
        InteractionGraph::ingest(read_edge_file(path)?)
    }
}

fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::CorruptFile("unexpected end of file".into()),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::CorruptFile(format!("id length {len} too large")));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::CorruptFile("id is not valid UTF-8".into()))
}

pub(crate) fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_string(w, s)
}
