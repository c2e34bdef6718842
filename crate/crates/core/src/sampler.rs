//! Positive behavior-sequence sampling and degree-based negative sampling.
//!
//! Positives for user `u` are drawn with probability proportional to
//!
//! ```text
//! p(u, i) = decay_base^hours_ago(u, i) * click(u, c_i)^gamma
//! ```
//!
//! where `click(u, c)` is the total weight of `u`'s edges into cluster `c`.
//! With `gamma < 0`, items from clusters the user clicked less often are
//! favored, and older interactions fade geometrically. Negatives are drawn
//! from all items proportionally to `d_i^(3/4)`.

use rand::Rng;

use crate::alias::AliasTable;
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;

/// Default decay base applied per hour of age.
pub const DEFAULT_DECAY_BASE: f64 = 0.999;
/// Default diversity exponent.
pub const DEFAULT_GAMMA: f64 = -0.2;
/// Exponent applied to item degrees for the negative distribution.
pub const NEGATIVE_EXPONENT: f64 = 0.75;
/// Redraws allowed when a negative collides with the positive item.
pub const MAX_REJECTIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionParams {
    pub gamma: f64,
    pub decay_base: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            gamma: DEFAULT_GAMMA,
            decay_base: DEFAULT_DECAY_BASE,
        }
    }
}

/// Unnormalized selection weights for every edge of `user`, in adjacency order.
pub fn selection_weights(graph: &InteractionGraph, user: usize, params: SelectionParams) -> Vec<f64> {
    let edges: Vec<_> = graph.neighbors(user).collect();
    let mut cluster_clicks: Vec<(u32, f64)> = Vec::new();
    for e in &edges {
        if let Some(c) = e.cluster {
            match cluster_clicks.iter_mut().find(|(k, _)| *k == c) {
                Some((_, total)) => *total += e.weight,
                None => cluster_clicks.push((c, e.weight)),
            }
        }
    }
    edges
        .iter()
        .map(|e| {
            let decay = params.decay_base.powf(e.hours_ago);
            let diversity = match e.cluster {
                Some(c) => {
                    let clicks = cluster_clicks.iter().find(|(k, _)| *k == c).map_or(1.0, |x| x.1);
                    clicks.powf(params.gamma)
                }
                None => 1.0,
            };
            decay * diversity
        })
        .collect()
}

/// Selection weight of a single existing edge `(user, item)`.
///
/// Returns `None` when the edge does not exist.
pub fn selection_weight(
    graph: &InteractionGraph,
    user: usize,
    item: u32,
    params: SelectionParams,
) -> Option<f64> {
    let pos = graph.neighbor_items(user).iter().position(|&i| i == item)?;
    Some(selection_weights(graph, user, params)[pos])
}

/// Per-user alias tables over the selection weights.
#[derive(Clone, Debug)]
pub struct PositiveSampler {
    tables: Vec<Option<AliasTable>>,
    samples_per_user: usize,
    params: SelectionParams,
}

impl PositiveSampler {
    pub fn new(graph: &InteractionGraph, samples_per_user: usize, params: SelectionParams) -> Result<Self> {
        use rayon::prelude::*;

        if samples_per_user == 0 {
            return Err(Error::InvalidConfig("samples per user must be at least 1".into()));
        }
        let tables = (0..graph.user_count())
            .into_par_iter()
            .map(|u| {
                if graph.user_edge_count(u) == 0 {
                    return Ok(None);
                }
                let weights = selection_weights(graph, u, params);
                if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
                    return Err(Error::InvalidWeights(format!(
                        "user {u} has selection weight {w}"
                    )));
                }
                AliasTable::new(&weights).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PositiveSampler {
            tables,
            samples_per_user,
            params,
        })
    }

    pub fn samples_per_user(&self) -> usize {
        self.samples_per_user
    }

    pub fn params(&self) -> SelectionParams {
        self.params
    }

    pub fn table(&self, user: usize) -> Option<&AliasTable> {
        self.tables.get(user).and_then(Option::as_ref)
    }

    /// Draws `m` items with replacement from the user's selection distribution.
    pub fn sample_behavior_sequence<R: Rng + ?Sized>(
        &self,
        graph: &InteractionGraph,
        user: usize,
        rng: &mut R,
    ) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(self.samples_per_user);
        self.sample_into(graph, user, rng, &mut out)?;
        Ok(out)
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(
        &self,
        graph: &InteractionGraph,
        user: usize,
        rng: &mut R,
        out: &mut Vec<u32>,
    ) -> Result<()> {
        let table = self.table(user).ok_or(Error::DegenerateUser(user))?;
        let items = graph.neighbor_items(user);
        out.clear();
        out.extend((0..self.samples_per_user).map(|_| items[table.sample(rng)]));
        Ok(())
    }
}

/// Global negative sampler with `P(i) ∝ d_i^(3/4)`.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    table: AliasTable,
    sampleable: usize,
}

impl NegativeSampler {
    pub fn new(graph: &InteractionGraph) -> Result<Self> {
        Self::from_degrees(graph.item_degrees())
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self> {
        let weights: Vec<f64> = degrees.iter().map(|d| d.powf(NEGATIVE_EXPONENT)).collect();
        let sampleable = weights.iter().filter(|w| **w > 0.0).count();
        if sampleable < 2 {
            return Err(Error::SamplerUnderflow(sampleable));
        }
        Ok(NegativeSampler {
            table: AliasTable::new(&weights)?,
            sampleable,
        })
    }

    pub fn sampleable_items(&self) -> usize {
        self.sampleable
    }

    pub fn table(&self) -> &AliasTable {
        &self.table
    }

    /// Draws `k` negatives, redrawing any that equal `positive` up to
    /// [`MAX_REJECTIONS`] times before accepting the collision.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, positive: u32, k: usize, rng: &mut R) -> Vec<u32> {
        let mut out = Vec::with_capacity(k);
        self.sample_into(positive, k, rng, &mut out);
        out
    }

    pub(crate) fn sample_into<R: Rng + ?Sized>(&self, positive: u32, k: usize, rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        for _ in 0..k {
            let mut draw = self.table.sample(rng) as u32;
            let mut attempts = 0;
            while draw == positive && attempts < MAX_REJECTIONS {
                draw = self.table.sample(rng) as u32;
                attempts += 1;
            }
            out.push(draw);
        }
    }
}
