//! Ground-truth environment: slotted time, stochastic channel rewards,
//! primary-user occupancy, and collision resolution among secondary users.
//!
//! The environment is the only component that sees everything. Each slot it
//! draws per-channel primary-user occupancy and one reward sample per channel,
//! then resolves the secondary users' actions: a user that transmits alone on
//! a vacant channel collects that channel's sample, two or more transmitters
//! on the same channel all lose it, and a transmission on a PU-occupied
//! channel is wasted. Radios turn the resulting [`SlotGroundTruth`] into the
//! per-user observations policies are allowed to see.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::radio::Action;

/// Index of a secondary user within one replication. Ids are assigned
/// sequentially by the runner; under user dynamics they are never reused.
pub type UserId = usize;

/// Distribution of the per-slot reward sample on a channel with mean `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RewardLaw {
    /// Sample is 1 with probability `mu`, else 0.
    Bernoulli,
    /// Sample is uniform on `[max(0, mu - w), min(1, mu + w)]`.
    Uniform { half_width: f64 },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("number of channels must be >= 1")]
    NoChannels,
    #[error("mean rate matrix must have at least one row")]
    NoRows,
    #[error("row {row} has {got} entries, expected {expected}")]
    RowLength { row: usize, got: usize, expected: usize },
    #[error("mean rate {value} at [{row}][{channel}] outside [0, 1]")]
    MeanOutOfRange { row: usize, channel: usize, value: f64 },
    #[error("occupancy rate {value} for channel {channel} outside [0, 1]")]
    OccupancyOutOfRange { channel: usize, value: f64 },
    #[error("occupancy vector has {got} entries, expected {expected}")]
    OccupancyLength { got: usize, expected: usize },
    #[error("change points must be strictly increasing in slot index")]
    ChangePointsNotIncreasing,
    #[error("uniform reward half-width {0} outside [0, 1]")]
    HalfWidthOutOfRange(f64),
    #[error("fade probability {0} outside [0, 1]")]
    FadeOutOfRange(f64),
}

/// Per-channel statistics of the radio environment.
///
/// Rows of `mean_rates` are per user slot (user `u` uses row `u % rows`), so a
/// single row describes a homogeneous network and `N` distinct rows a
/// heterogeneous one. `occupancy` holds the per-channel probability that a
/// primary user holds the channel in a given slot (all zeros models unlicensed
/// spectrum, where PUs are not present). `change_points` optionally replaces
/// the whole mean matrix at given slots for quasi-stationary runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelModel {
    num_channels: usize,
    mean_rates: Vec<Vec<f64>>,
    occupancy: Vec<f64>,
    change_points: Vec<(u64, Vec<Vec<f64>>)>,
    reward_law: RewardLaw,
    /// Probability that an otherwise-successful transmission loses its ACK.
    /// Exists to exercise transmit-only radios' failure ambiguity; default 0.
    fade_probability: f64,
}

fn check_matrix(rows: &[Vec<f64>], k: usize) -> Result<(), ModelError> {
    if rows.is_empty() {
        return Err(ModelError::NoRows);
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != k {
            return Err(ModelError::RowLength { row: r, got: row.len(), expected: k });
        }
        for (c, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(ModelError::MeanOutOfRange { row: r, channel: c, value: v });
            }
        }
    }
    Ok(())
}

impl ChannelModel {
    pub fn new(
        mean_rates: Vec<Vec<f64>>,
        occupancy: Vec<f64>,
        reward_law: RewardLaw,
    ) -> Result<Self, ModelError> {
        let k = mean_rates.first().map(|r| r.len()).unwrap_or(0);
        if k == 0 {
            return Err(ModelError::NoChannels);
        }
        check_matrix(&mean_rates, k)?;
        if occupancy.len() != k {
            return Err(ModelError::OccupancyLength { got: occupancy.len(), expected: k });
        }
        for (c, &th) in occupancy.iter().enumerate() {
            if !(0.0..=1.0).contains(&th) || th.is_nan() {
                return Err(ModelError::OccupancyOutOfRange { channel: c, value: th });
            }
        }
        if let RewardLaw::Uniform { half_width } = reward_law {
            if !(0.0..=1.0).contains(&half_width) {
                return Err(ModelError::HalfWidthOutOfRange(half_width));
            }
        }
        Ok(Self {
            num_channels: k,
            mean_rates,
            occupancy,
            change_points: Vec::new(),
            reward_law,
            fade_probability: 0.0,
        })
    }

    /// Single-row model: every user sees the same channel means, no PUs.
    pub fn homogeneous(means: Vec<f64>) -> Result<Self, ModelError> {
        let k = means.len();
        Self::new(vec![means], vec![0.0; k], RewardLaw::Bernoulli)
    }

    pub fn with_change_points(
        mut self,
        points: Vec<(u64, Vec<Vec<f64>>)>,
    ) -> Result<Self, ModelError> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ModelError::ChangePointsNotIncreasing);
            }
        }
        for (_, m) in &points {
            check_matrix(m, self.num_channels)?;
        }
        self.change_points = points;
        Ok(self)
    }

    pub fn with_fade_probability(mut self, p: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::FadeOutOfRange(p));
        }
        self.fade_probability = p;
        Ok(self)
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn occupancy(&self) -> &[f64] {
        &self.occupancy
    }

    pub fn reward_law(&self) -> RewardLaw {
        self.reward_law
    }

    pub fn fade_probability(&self) -> f64 {
        self.fade_probability
    }

    /// Mean matrix in force at slot `t`, after applying change points.
    pub fn means_at(&self, t: u64) -> &[Vec<f64>] {
        let mut active: &[Vec<f64>] = &self.mean_rates;
        for (slot, m) in &self.change_points {
            if *slot <= t {
                active = m;
            } else {
                break;
            }
        }
        active
    }

    /// Mean rate user `user` experiences on `channel` at slot `t`.
    pub fn mean(&self, user: UserId, channel: usize, t: u64) -> f64 {
        let rows = self.means_at(t);
        rows[user % rows.len()][channel]
    }

    /// Slots at which the mean matrix is replaced.
    pub fn change_point_slots(&self) -> Vec<u64> {
        self.change_points.iter().map(|(t, _)| *t).collect()
    }

    /// True when every user sees the same means for all of the horizon.
    pub fn is_homogeneous(&self) -> bool {
        let uniform = |rows: &[Vec<f64>]| rows.iter().all(|r| r == &rows[0]);
        uniform(&self.mean_rates) && self.change_points.iter().all(|(_, m)| uniform(m))
    }
}

/// Map a channel's base draw (uniform on [0,1)) to the reward sample a user
/// with mean `mu` would collect. Using one base draw per channel per slot
/// couples reward sequences across algorithms and, in the heterogeneous case,
/// lets the realized value depend on whichever user wins the channel.
pub fn reward_from_base(base: f64, mu: f64, law: RewardLaw) -> f64 {
    match law {
        RewardLaw::Bernoulli => {
            if base < mu {
                1.0
            } else {
                0.0
            }
        }
        RewardLaw::Uniform { half_width } => {
            let lo = (mu - half_width).max(0.0);
            let hi = (mu + half_width).min(1.0);
            lo + base * (hi - lo)
        }
    }
}

/// One slot's channel-side randomness, drawn before actions are resolved.
#[derive(Debug, Clone)]
pub struct ChannelDraws {
    pub pu_occupied: Vec<bool>,
    /// Uniform base draw per channel; realized rewards are transforms of it.
    pub base_draws: Vec<f64>,
    /// Reward sample per channel under the row-0 means (equals every user's
    /// sample in the homogeneous case).
    pub reward_draws: Vec<f64>,
}

/// Draw PU occupancy and reward samples for slot `t`.
///
/// Consumes exactly `2K` values from `rng` (K occupancy draws, then K base
/// draws) so the environment stream is positioned deterministically per slot.
pub fn draw_slot<R: Rng>(model: &ChannelModel, t: u64, rng: &mut R) -> ChannelDraws {
    let k = model.num_channels;
    let mut pu_occupied = Vec::with_capacity(k);
    for c in 0..k {
        let th = model.occupancy[c];
        // Sample even when th == 0 to keep stream positions independent of θ.
        let u: f64 = rng.gen();
        pu_occupied.push(u < th);
    }
    let mut base_draws = Vec::with_capacity(k);
    let mut reward_draws = Vec::with_capacity(k);
    let means = model.means_at(t);
    for c in 0..k {
        let base: f64 = rng.gen();
        base_draws.push(base);
        reward_draws.push(reward_from_base(base, means[0][c], model.reward_law));
    }
    ChannelDraws { pu_occupied, base_draws, reward_draws }
}

/// What happened to one user in one slot, from the environment's view.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UserOutcome {
    pub user: UserId,
    pub action: Action,
    /// Transmitted alone on a PU-vacant channel and the ACK was not faded.
    pub success: bool,
    /// Realized reward; 0 unless `success`.
    pub reward: f64,
    /// At least two SUs transmitted on this user's channel.
    pub collided: bool,
    /// Transmission lost to fading rather than collision or PU.
    pub faded: bool,
}

/// Full resolution of one slot: channel randomness, per-user outcomes,
/// which channels saw SU collisions, and how many SU transmissions landed
/// on PU-occupied channels.
#[derive(Debug, Clone)]
pub struct SlotGroundTruth {
    pub slot: u64,
    pub pu_occupied: Vec<bool>,
    pub base_draws: Vec<f64>,
    pub reward_draws: Vec<f64>,
    pub outcomes: Vec<UserOutcome>,
    /// Channels with >= 2 transmitting SUs this slot, ascending.
    pub collision_channels: Vec<usize>,
    /// One event per SU transmission on a PU-occupied channel.
    pub pu_interference_events: u32,
}

impl SlotGroundTruth {
    pub fn outcome_of(&self, user: UserId) -> Option<&UserOutcome> {
        self.outcomes.iter().find(|o| o.user == user)
    }

    /// Count of SU transmitters on `channel` this slot.
    pub fn transmitters_on(&self, channel: usize) -> usize {
        self.outcomes
            .iter()
            .filter(|o| o.action.transmit_channel() == Some(channel))
            .count()
    }
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("user {user} referenced channel {channel} but the model has {num_channels} channels")]
    ChannelOutOfRange { user: UserId, channel: usize, num_channels: usize },
    #[error("user {user} appears more than once in the action set")]
    DuplicateUser { user: UserId },
}

/// Resolve all users' actions against one slot's channel draws.
///
/// `rng` is consumed only for fade draws, and only when the model has a
/// nonzero fade probability, so fade-free runs are reproducible regardless.
pub fn resolve_slot<R: Rng>(
    model: &ChannelModel,
    draws: &ChannelDraws,
    t: u64,
    actions: &[(UserId, Action)],
    rng: &mut R,
) -> Result<SlotGroundTruth, EnvError> {
    let k = model.num_channels;
    let mut tx_count = vec![0usize; k];
    for (i, (user, action)) in actions.iter().enumerate() {
        if actions[..i].iter().any(|(u, _)| u == user) {
            return Err(EnvError::DuplicateUser { user: *user });
        }
        for ch in action.referenced_channels() {
            if ch >= k {
                return Err(EnvError::ChannelOutOfRange { user: *user, channel: ch, num_channels: k });
            }
        }
        if let Some(c) = action.transmit_channel() {
            tx_count[c] += 1;
        }
    }

    let mut outcomes = Vec::with_capacity(actions.len());
    let mut pu_interference_events = 0u32;
    for (user, action) in actions {
        let mut outcome = UserOutcome {
            user: *user,
            action: action.clone(),
            success: false,
            reward: 0.0,
            collided: false,
            faded: false,
        };
        if let Some(c) = action.transmit_channel() {
            outcome.collided = tx_count[c] >= 2;
            if draws.pu_occupied[c] {
                pu_interference_events += 1;
            } else if !outcome.collided {
                let faded = model.fade_probability > 0.0 && rng.gen::<f64>() < model.fade_probability;
                if faded {
                    outcome.faded = true;
                } else {
                    outcome.success = true;
                    outcome.reward =
                        reward_from_base(draws.base_draws[c], model.mean(*user, c, t), model.reward_law);
                }
            }
        }
        outcomes.push(outcome);
    }

    let collision_channels = (0..k).filter(|&c| tx_count[c] >= 2).collect();
    Ok(SlotGroundTruth {
        slot: t,
        pu_occupied: draws.pu_occupied.clone(),
        base_draws: draws.base_draws.clone(),
        reward_draws: draws.reward_draws.clone(),
        outcomes,
        collision_channels,
        pu_interference_events,
    })
}

/// Per-slot benchmark value: the best total mean rate a central controller
/// could extract with `n` users, discounting each channel by its vacancy
/// probability. Homogeneous models rank channels by `mu * (1 - θ)`;
/// heterogeneous models need a full matching (see `allocation::hungarian`),
/// which the runner invokes with the active users' rows.
pub fn oracle_slot_value(model: &ChannelModel, n: usize, t: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let means = model.means_at(t);
    if means.len() == 1 || means.iter().all(|r| r == &means[0]) {
        let mut discounted: Vec<f64> = means[0]
            .iter()
            .zip(&model.occupancy)
            .map(|(&mu, &th)| mu * (1.0 - th))
            .collect();
        discounted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        discounted.iter().take(n).sum()
    } else {
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|u| {
                means[u % means.len()]
                    .iter()
                    .zip(&model.occupancy)
                    .map(|(&mu, &th)| mu * (1.0 - th))
                    .collect()
            })
            .collect();
        crate::allocation::oracle_matching_value(&weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Action;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Channel means used throughout the homogeneous experiments.
    pub(crate) fn eight_means() -> Vec<f64> {
        vec![0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78]
    }

    #[test]
    fn no_pus_in_unlicensed_spectrum() {
        let model = ChannelModel::homogeneous(eight_means()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for t in 0..200 {
            let draws = draw_slot(&model, t, &mut rng);
            assert!(draws.pu_occupied.iter().all(|&o| !o));
        }
    }

    #[test]
    fn degenerate_bernoulli_mean_one() {
        let model = ChannelModel::homogeneous(vec![1.0, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in 0..100 {
            let draws = draw_slot(&model, t, &mut rng);
            assert_eq!(draws.reward_draws[0], 1.0);
        }
    }

    #[test]
    fn empirical_mean_matches_channel_mean() {
        // Law of large numbers on the top channel (mu = 0.78): a million
        // draws land within 0.005 of the mean.
        let model = ChannelModel::homogeneous(eight_means()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20240601);
        let mut sum = 0.0;
        let n = 1_000_000u64;
        for t in 0..n {
            let draws = draw_slot(&model, t, &mut rng);
            sum += draws.reward_draws[7];
        }
        let emp = sum / n as f64;
        assert!((emp - 0.78).abs() < 0.005, "empirical mean {emp}");
    }

    fn resolve(
        model: &ChannelModel,
        draws: &ChannelDraws,
        actions: &[(UserId, Action)],
    ) -> SlotGroundTruth {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        resolve_slot(model, draws, 0, actions, &mut rng).unwrap()
    }

    #[test]
    fn colliding_users_get_nothing() {
        let model = ChannelModel::homogeneous(eight_means()).unwrap();
        let draws = ChannelDraws {
            pu_occupied: vec![false; 8],
            base_draws: vec![0.0; 8],
            reward_draws: vec![1.0; 8],
        };
        let actions = vec![
            (0, Action::transmit(2)),
            (1, Action::transmit(2)),
            (2, Action::transmit(4)),
        ];
        let ground = resolve(&model, &draws, &actions);
        assert_eq!(ground.collision_channels, vec![2]);
        assert!(ground.outcomes[0].collided && !ground.outcomes[0].success);
        assert!(ground.outcomes[1].collided && !ground.outcomes[1].success);
        assert!(ground.outcomes[2].success);
        assert_eq!(ground.outcomes[2].reward, draws.reward_draws[4]);
    }

    #[test]
    fn lone_transmitter_collects_the_draw() {
        let model = ChannelModel::homogeneous(eight_means()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = draw_slot(&model, 0, &mut rng);
        let ground = resolve(&model, &draws, &[(0, Action::transmit(5))]);
        assert!(ground.collision_channels.is_empty());
        assert!(!ground.outcomes[0].collided);
        assert_eq!(ground.outcomes[0].reward, draws.reward_draws[5]);
    }

    #[test]
    fn pu_occupancy_blocks_su_transmissions() {
        // Three SUs on distinct vacant channels while PUs hold three others:
        // everyone succeeds. A fourth user on an occupied channel is wasted.
        let model = ChannelModel::new(
            vec![vec![0.5; 6]],
            vec![0.0; 6],
            RewardLaw::Bernoulli,
        )
        .unwrap();
        let draws = ChannelDraws {
            // channels 6, 5, 2 occupied (1-based) = indices 5, 4, 1
            pu_occupied: vec![false, true, false, false, true, true],
            base_draws: vec![0.0; 6],
            reward_draws: vec![1.0; 6],
        };
        let actions =
            vec![(0, Action::transmit(3)), (1, Action::transmit(2)), (2, Action::transmit(0))];
        let ground = resolve(&model, &draws, &actions);
        assert!(ground.outcomes.iter().all(|o| o.success));
        assert!(ground.collision_channels.is_empty());
        assert_eq!(ground.pu_interference_events, 0);

        let ground = resolve(&model, &draws, &[(0, Action::transmit(4))]);
        assert!(!ground.outcomes[0].success);
        assert_eq!(ground.pu_interference_events, 1);
    }

    #[test]
    fn malformed_channel_index_is_a_config_error() {
        let model = ChannelModel::homogeneous(vec![0.5; 4]).unwrap();
        let draws = ChannelDraws {
            pu_occupied: vec![false; 4],
            base_draws: vec![0.0; 4],
            reward_draws: vec![0.0; 4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = resolve_slot(&model, &draws, 0, &[(0, Action::transmit(4))], &mut rng);
        assert!(matches!(err, Err(EnvError::ChannelOutOfRange { channel: 4, .. })));
    }

    #[test]
    fn oracle_value_examples() {
        let model = ChannelModel::homogeneous(eight_means()).unwrap();
        assert!((oracle_slot_value(&model, 4, 0) - 2.70).abs() < 1e-12);
        assert!((oracle_slot_value(&model, 8, 0) - 4.28).abs() < 1e-12);
        assert_eq!(oracle_slot_value(&model, 0, 0), 0.0);
        // Saturated beyond K: value stays at the sum of all means.
        assert!((oracle_slot_value(&model, 12, 0) - 4.28).abs() < 1e-12);
    }

    #[test]
    fn change_points_swap_the_mean_matrix() {
        let model = ChannelModel::homogeneous(vec![1.0, 0.0])
            .unwrap()
            .with_change_points(vec![(10, vec![vec![0.0, 1.0]])])
            .unwrap();
        assert_eq!(model.mean(0, 0, 9), 1.0);
        assert_eq!(model.mean(0, 0, 10), 0.0);
        assert_eq!(model.mean(0, 1, 10), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(draw_slot(&model, 0, &mut rng).reward_draws, vec![1.0, 0.0]);
        assert_eq!(draw_slot(&model, 10, &mut rng).reward_draws, vec![0.0, 1.0]);
    }

    #[test]
    fn validation_rejects_bad_models() {
        assert!(matches!(
            ChannelModel::homogeneous(vec![]),
            Err(ModelError::NoChannels)
        ));
        assert!(matches!(
            ChannelModel::homogeneous(vec![1.2]),
            Err(ModelError::MeanOutOfRange { .. })
        ));
        assert!(matches!(
            ChannelModel::new(vec![vec![0.5], vec![0.5, 0.5]], vec![0.0], RewardLaw::Bernoulli),
            Err(ModelError::RowLength { .. })
        ));
        assert!(matches!(
            ChannelModel::new(vec![vec![0.5]], vec![1.5], RewardLaw::Bernoulli),
            Err(ModelError::OccupancyOutOfRange { .. })
        ));
        let m = ChannelModel::homogeneous(vec![0.5]).unwrap();
        assert!(matches!(
            m.with_change_points(vec![(5, vec![vec![0.1]]), (5, vec![vec![0.2]])]),
            Err(ModelError::ChangePointsNotIncreasing)
        ));
    }
}
