//! Oracle allocations and performance metrics: top-N channel selection,
//! maximum-weight bipartite matching, and pseudo-regret / collision
//! accounting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{ChannelModel, SlotGroundTruth};

/// An injective user -> channel map together with its total weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `channel_of_user[u]` is the channel assigned to user `u`.
    pub channel_of_user: Vec<usize>,
    /// Sum of the assigned weights, recomputed from the input.
    pub value: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("matching needs users <= channels, got {users} users and {channels} channels")]
    MoreUsersThanChannels { users: usize, channels: usize },
    #[error("weight at [{user}][{channel}] is not finite")]
    NonFiniteWeight { user: usize, channel: usize },
    #[error("weight rows have unequal lengths")]
    RaggedMatrix,
}

/// Channels ordered by decreasing mean, ties broken by lower index.
pub fn rank_channels(means: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..means.len()).collect();
    idx.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// Assign `n` users to the `n` largest-mean channels, users mapped in rank
/// order (user 0 gets the best channel). With `n >= K` the network is
/// saturated and every channel is returned.
pub fn top_n(means: &[f64], n: usize) -> Assignment {
    let take = n.min(means.len());
    let ranked = rank_channels(means);
    let channel_of_user: Vec<usize> = ranked.into_iter().take(take).collect();
    let value = channel_of_user.iter().map(|&c| means[c]).sum();
    Assignment { channel_of_user, value }
}

const TIE_EPS: f64 = 1e-9;

/// Maximum-weight injective assignment of `weights.len()` users to channels.
///
/// Deterministic under ties: among all maximizing assignments the
/// lexicographically smallest user -> channel map is returned. Runs a
/// shortest-augmenting-path solver (O(N * K^2) per solve) for the optimum and
/// then fixes users in order onto the smallest channel that still completes
/// to the optimal value.
pub fn hungarian(weights: &[Vec<f64>]) -> Result<Assignment, AllocError> {
    let n = weights.len();
    if n == 0 {
        return Ok(Assignment { channel_of_user: vec![], value: 0.0 });
    }
    let k = weights[0].len();
    for (u, row) in weights.iter().enumerate() {
        if row.len() != k {
            return Err(AllocError::RaggedMatrix);
        }
        for (c, w) in row.iter().enumerate() {
            if !w.is_finite() {
                return Err(AllocError::NonFiniteWeight { user: u, channel: c });
            }
        }
    }
    if n > k {
        return Err(AllocError::MoreUsersThanChannels { users: n, channels: k });
    }

    let all_rows: Vec<usize> = (0..n).collect();
    let all_cols: Vec<usize> = (0..k).collect();
    let best = solve_restricted(weights, &all_rows, &all_cols);

    let scale = weights
        .iter()
        .flat_map(|r| r.iter())
        .fold(1.0f64, |acc, w| acc.max(w.abs()));
    let eps = TIE_EPS * scale;

    let mut taken = vec![false; k];
    let mut channel_of_user = Vec::with_capacity(n);
    let mut fixed_value = 0.0;
    for u in 0..n {
        let rest_rows: Vec<usize> = (u + 1..n).collect();
        let mut chosen = None;
        for c in 0..k {
            if taken[c] {
                continue;
            }
            let rest_cols: Vec<usize> =
                (0..k).filter(|&j| !taken[j] && j != c).collect();
            let completion = solve_restricted(weights, &rest_rows, &rest_cols);
            if fixed_value + weights[u][c] + completion >= best - eps {
                chosen = Some(c);
                break;
            }
        }
        let c = chosen.expect("an optimal completion must exist");
        taken[c] = true;
        fixed_value += weights[u][c];
        channel_of_user.push(c);
    }

    let value = channel_of_user
        .iter()
        .enumerate()
        .map(|(u, &c)| weights[u][c])
        .sum();
    Ok(Assignment { channel_of_user, value })
}

/// Value of the maximum-weight matching without the lexicographic pass;
/// used for oracle benchmarks where only the value matters.
pub fn oracle_matching_value(weights: &[Vec<f64>]) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    let rows: Vec<usize> = (0..weights.len()).collect();
    let cols: Vec<usize> = (0..weights[0].len()).collect();
    solve_restricted(weights, &rows, &cols)
}

/// Max-weight assignment value over a row/column restriction of `weights`.
/// Shortest augmenting path with dual potentials on the negated matrix.
fn solve_restricted(weights: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    let n = rows.len();
    let m = cols.len();
    if n == 0 {
        return 0.0;
    }
    debug_assert!(n <= m);
    let cost = |i: usize, j: usize| -weights[rows[i]][cols[j]];

    const UNSET: usize = usize::MAX;
    // 1-based columns; column 0 is the virtual root of each augmenting search.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut matched_row = vec![UNSET; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 0..n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j - 1) - u[i0 + 1] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    if matched_row[j] != UNSET {
                        u[matched_row[j] + 1] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == UNSET {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut total = 0.0;
    for j in 1..=m {
        if matched_row[j] != UNSET {
            total += weights[rows[matched_row[j]]][cols[j - 1]];
        }
    }
    total
}

/// One slot's pseudo-regret increment: the oracle's mean value minus the sum
/// of `mu * (1 - θ)` over this slot's collision-free, non-faded
/// transmissions. The vacancy discount prices the PU risk on both sides
/// symmetrically, so the credit conditions on the action, not on the slot's
/// PU draw; otherwise an oracle-optimal policy would keep a regret floor of
/// `Σ mu (1-θ) θ` per slot. Sensing, idling and colliding users contribute
/// nothing.
pub fn pseudo_regret_step(oracle_value: f64, ground: &SlotGroundTruth, model: &ChannelModel) -> f64 {
    let collected: f64 = ground
        .outcomes
        .iter()
        .filter(|o| !o.collided && !o.faded)
        .filter_map(|o| {
            let c = o.action.transmit_channel()?;
            Some(model.mean(o.user, c, ground.slot) * (1.0 - model.occupancy()[c]))
        })
        .sum();
    oracle_value - collected
}

/// Realized counterpart: oracle mean value minus the rewards actually
/// collected this slot. Per-slot values may be negative on lucky draws; the
/// cumulative series is reported alongside pseudo-regret, not in place of it.
pub fn realized_regret_step(oracle_value: f64, ground: &SlotGroundTruth) -> f64 {
    let collected: f64 = ground.outcomes.iter().map(|o| o.reward).sum();
    oracle_value - collected
}

/// Cumulative metrics sampled on a fixed stride over one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    /// Number of completed slots at this sample point.
    pub slot: u64,
    pub pseudo_regret: f64,
    pub realized_regret: f64,
    pub collisions: u64,
    pub pu_interference: u64,
}

/// Per-replication metrics: a downsampled cumulative curve plus summary
/// fields the experiment-level checks need at full slot resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub stride: u64,
    pub samples: Vec<MetricsSample>,
    pub final_sample: MetricsSample,
    /// Smallest per-slot pseudo-regret increment seen (oracle dominance
    /// should keep this >= -1e-12).
    pub min_pseudo_increment: f64,
    /// Last slot with a pseudo-regret increment above 1e-12, if any.
    pub last_positive_increment_slot: Option<u64>,
    /// Transmission counts per user id per channel.
    pub occupancy: Vec<Vec<u64>>,
}

/// Streaming accumulator the runner feeds once per slot.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    stride: u64,
    checkpoints: Vec<u64>,
    num_channels: usize,
    cum_pseudo: f64,
    cum_realized: f64,
    cum_collisions: u64,
    cum_pu: u64,
    min_increment: f64,
    last_positive: Option<u64>,
    samples: Vec<MetricsSample>,
    occupancy: Vec<Vec<u64>>,
    slots_done: u64,
}

impl MetricsAccumulator {
    pub fn new(stride: u64, num_channels: usize) -> Self {
        Self::with_checkpoints(stride, Vec::new(), num_channels)
    }

    /// `checkpoints` are extra slot counts sampled exactly (must be sorted).
    pub fn with_checkpoints(stride: u64, checkpoints: Vec<u64>, num_channels: usize) -> Self {
        Self {
            stride: stride.max(1),
            checkpoints,
            num_channels,
            cum_pseudo: 0.0,
            cum_realized: 0.0,
            cum_collisions: 0,
            cum_pu: 0,
            min_increment: f64::INFINITY,
            last_positive: None,
            samples: Vec::new(),
            occupancy: Vec::new(),
            slots_done: 0,
        }
    }

    pub fn record(&mut self, oracle_value: f64, ground: &SlotGroundTruth, model: &ChannelModel) {
        let inc = pseudo_regret_step(oracle_value, ground, model);
        self.cum_pseudo += inc;
        self.cum_realized += realized_regret_step(oracle_value, ground);
        self.cum_collisions += ground.collision_channels.len() as u64;
        self.cum_pu += ground.pu_interference_events as u64;
        if inc < self.min_increment {
            self.min_increment = inc;
        }
        if inc > 1e-12 {
            self.last_positive = Some(ground.slot);
        }
        for o in &ground.outcomes {
            if let Some(c) = o.action.transmit_channel() {
                while self.occupancy.len() <= o.user {
                    self.occupancy.push(vec![0; self.num_channels]);
                }
                self.occupancy[o.user][c] += 1;
            }
        }
        self.slots_done += 1;
        if self.slots_done % self.stride == 0
            || self.checkpoints.binary_search(&self.slots_done).is_ok()
        {
            self.samples.push(self.sample());
        }
    }

    fn sample(&self) -> MetricsSample {
        MetricsSample {
            slot: self.slots_done,
            pseudo_regret: self.cum_pseudo,
            realized_regret: self.cum_realized,
            collisions: self.cum_collisions,
            pu_interference: self.cum_pu,
        }
    }

    pub fn cumulative_pseudo_regret(&self) -> f64 {
        self.cum_pseudo
    }

    pub fn finish(mut self) -> MetricsSeries {
        let final_sample = self.sample();
        if self.samples.last().map(|s| s.slot) != Some(final_sample.slot) {
            self.samples.push(final_sample);
        }
        MetricsSeries {
            stride: self.stride,
            samples: self.samples,
            final_sample,
            min_pseudo_increment: if self.min_increment.is_finite() { self.min_increment } else { 0.0 },
            last_positive_increment_slot: self.last_positive,
            occupancy: self.occupancy,
        }
    }
}
