//! Decentralized per-user decision algorithms.
//!
//! Every policy instance belongs to one user: it sees only that user's
//! observations and private randomness, and emits one [`Action`] per slot.
//! The runner calls `act` for every active user before delivering any
//! observation (synchronous slotted rounds under a shared clock), then calls
//! `update` with what the user's radio observed.
//!
//! Phase-structured algorithms (sequential hopping, one-hot sensing,
//! trekking, explore-signal-exploit) derive their phase boundaries from the
//! shared configuration and the slot counter; no state is ever exchanged
//! between instances except through collisions and sensing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::AlgorithmSpec;
use crate::radio::{Action, Observation, Sensed};

mod baselines;
mod eser;
mod mctopm;
mod musical_chairs;
mod scf;
mod trekking;
mod wrappers;

pub use baselines::{Mega, RandomHop, RhoRand, SeqHop};
pub use eser::{BitSchedule, Eser};
pub use mctopm::McTopM;
pub use musical_chairs::{estimate_user_count, MusicalChairs};
pub use scf::Scf;
pub use trekking::Trekking;
pub use wrappers::EpochReset;

/// Contract every decentralized algorithm implements. A fresh instance with
/// the same config, seed and observation prefix reproduces the same actions
/// (verified by replaying observation logs).
pub trait Policy: Send {
    fn act(&mut self, t: u64) -> Action;
    fn update(&mut self, obs: &Observation);
    /// A detected protocol violation (decode failure etc.); the runner aborts
    /// the replication when this turns `Some`.
    fn fault(&self) -> Option<&str> {
        None
    }
}

/// How an instance came to exist: part of the initial population or entered
/// later through user dynamics. Only dynamics-aware algorithms distinguish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryMode {
    Initial,
    Entered,
}

/// Instantiate the configured algorithm for one user.
pub fn build_policy(
    spec: &AlgorithmSpec,
    k: usize,
    horizon: u64,
    seed: u64,
    anchor: u64,
    entry: EntryMode,
) -> Box<dyn Policy> {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    match *spec {
        AlgorithmSpec::RandomHop => Box::new(RandomHop::new(k, rng)),
        AlgorithmSpec::SeqHop { t_rh } => Box::new(SeqHop::new(k, t_rh, anchor, rng)),
        AlgorithmSpec::RhoRand { n_known, ucb_c } => {
            Box::new(RhoRand::new(k, n_known, ucb_c, rng))
        }
        AlgorithmSpec::McTopM { n_known, ucb_c } => {
            Box::new(McTopM::new(k, n_known, ucb_c, rng))
        }
        AlgorithmSpec::UMcTopM { ucb_c } => Box::new(McTopM::new(k, k, ucb_c, rng)),
        AlgorithmSpec::MusicalChairs { t0 } => Box::new(MusicalChairs::new(k, t0, anchor, rng)),
        AlgorithmSpec::Mega { c, d, p0, alpha, beta } => {
            Box::new(Mega::new(k, c, d, p0, alpha, beta, anchor, rng))
        }
        AlgorithmSpec::Scf { t_rh, l_sh } => Box::new(Scf::new(k, t_rh, l_sh, anchor, rng)),
        AlgorithmSpec::Tsn { t_rh, l_sh, trek_window } => {
            Box::new(Trekking::static_network(k, t_rh, l_sh, trek_window, anchor, rng))
        }
        AlgorithmSpec::Tdn { t_rh, l_sh, trek_window, probe_period, l_entry } => Box::new(
            Trekking::dynamic_network(k, t_rh, l_sh, trek_window, probe_period, l_entry, anchor, entry, rng),
        ),
        AlgorithmSpec::Dmc { t0, epoch0 } => Box::new(EpochReset::new(
            AlgorithmSpec::MusicalChairs { t0 },
            k,
            horizon,
            epoch0,
            anchor,
            rng,
        )),
        AlgorithmSpec::Dscf { t_rh, l_sh, epoch0 } => Box::new(EpochReset::new(
            AlgorithmSpec::Scf { t_rh, l_sh },
            k,
            horizon,
            epoch0,
            anchor,
            rng,
        )),
        AlgorithmSpec::Eser { t_rh, l_explore, exploit0, bits } => Box::new(Eser::new(
            k,
            t_rh,
            l_explore,
            exploit0,
            eser::BitSchedule::Fixed(bits),
            anchor,
            rng,
        )),
        AlgorithmSpec::MEser { t_rh, l_explore, exploit0 } => Box::new(Eser::new(
            k,
            t_rh,
            l_explore,
            exploit0,
            eser::BitSchedule::Growing,
            anchor,
            rng,
        )),
    }
}

// ---------------------------------------------------------------------------
// Shared per-arm statistics
// ---------------------------------------------------------------------------

/// Per-channel pull counts and empirical means, fed by successful (or sensed)
/// reward samples only.
#[derive(Debug, Clone)]
pub struct ArmStats {
    pulls: Vec<u64>,
    means: Vec<f64>,
}

impl ArmStats {
    pub fn new(k: usize) -> Self {
        Self { pulls: vec![0; k], means: vec![0.0; k] }
    }

    pub fn record(&mut self, channel: usize, reward: f64) {
        self.pulls[channel] += 1;
        let n = self.pulls[channel] as f64;
        self.means[channel] += (reward - self.means[channel]) / n;
    }

    pub fn pulls(&self, channel: usize) -> u64 {
        self.pulls[channel]
    }

    pub fn mean(&self, channel: usize) -> f64 {
        self.means[channel]
    }

    pub fn num_channels(&self) -> usize {
        self.pulls.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Channels by decreasing empirical mean, ties broken by lower index.
    pub fn ranked_by_mean(&self) -> Vec<usize> {
        crate::allocation::rank_channels(&self.means)
    }

    /// The `n` channels with the highest UCB index at slot count `t`,
    /// ties broken by lower index.
    pub fn ucb_top_set(&self, n: usize, t: u64, exploration: f64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.pulls.len()).collect();
        idx.sort_by(|&a, &b| {
            ucb_index_with(self, b, t, exploration)
                .partial_cmp(&ucb_index_with(self, a, t, exploration))
                .unwrap()
                .then(a.cmp(&b))
        });
        idx.truncate(n.min(self.pulls.len()));
        idx
    }
}

/// Upper confidence bound index with the classical exploration constant 2:
/// `mean + sqrt(2 ln t / pulls)`, or +inf for an unpulled channel so it is
/// always explored first.
pub fn ucb_index(stats: &ArmStats, channel: usize, t: u64) -> f64 {
    ucb_index_with(stats, channel, t, 2.0)
}

pub fn ucb_index_with(stats: &ArmStats, channel: usize, t: u64, exploration: f64) -> f64 {
    let s = stats.pulls[channel];
    if s == 0 {
        return f64::INFINITY;
    }
    stats.means[channel] + (exploration * (t.max(1) as f64).ln() / s as f64).sqrt()
}

// ---------------------------------------------------------------------------
// Shared hopping machinery
// ---------------------------------------------------------------------------

/// Next channel in the round-robin order (wraps at the band edge). Users that
/// occupy distinct channels and all follow this rule stay orthogonal forever
/// and visit every channel equally often.
pub fn seqhop_next(channel: usize, k: usize) -> usize {
    (channel + 1) % k
}

/// Random-hop state: stay while collision-free, redraw uniformly on a
/// collision. A user that stays clean for K consecutive slots declares itself
/// orthogonalized and parks for good; later collisions (a still-roaming peer
/// landing on it) no longer dislodge it. Without that, saturated networks
/// (N = K) churn indefinitely because every collision knocks two parked users
/// loose at once.
#[derive(Debug, Clone)]
pub struct RandomHopState {
    pub channel: usize,
    clean_streak: u64,
    k: usize,
}

impl RandomHopState {
    pub fn new(k: usize, rng: &mut ChaCha8Rng) -> Self {
        Self { channel: rng.gen_range(0..k), clean_streak: 0, k }
    }

    pub fn on_outcome(&mut self, collided: bool, rng: &mut ChaCha8Rng) {
        if collided {
            if !self.declared_orthogonal() {
                self.channel = rng.gen_range(0..self.k);
                self.clean_streak = 0;
            }
        } else {
            self.clean_streak += 1;
        }
    }

    pub fn declared_orthogonal(&self) -> bool {
        self.clean_streak >= self.k as u64
    }
}

/// Rotation offset such that the sequential-hop channel at slot `t` is
/// `(offset + t) mod k`. The offset is the hop-invariant identity of a user's
/// position in the rotation.
pub fn rotation_offset(channel_now: usize, t: u64, k: usize) -> usize {
    let t_mod = (t % k as u64) as usize;
    (channel_now + k - t_mod) % k
}

pub fn rotation_channel(offset: usize, t: u64, k: usize) -> usize {
    (offset + (t % k as u64) as usize) % k
}

/// One-hot sensing outcome: how many users share the rotation and which rank
/// this user holds among them (1-based, by ascending rotation offset).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OhsResult {
    pub n_hat: usize,
    pub rank: usize,
}

/// Random-hop orthogonalization followed by a one-hot sensing census.
///
/// Timeline from `anchor`: `[anchor, anchor+t_rh)` random hop;
/// `[anchor+t_rh, anchor+t_rh+K^2)` sequential hop with one K-slot sensing
/// window per rotation offset. During its own window (the one indexed by its
/// offset) a user parks its sensor on the channel it would have occupied;
/// every other user crosses that channel exactly once per K slots, and the
/// slot at which the crossing happens identifies the crosser's offset. All
/// users therefore agree on the set of occupied offsets, hence on the user
/// count and on each user's rank, without exchanging a single message.
#[derive(Debug, Clone)]
pub struct HoppingPrelude {
    k: usize,
    anchor: u64,
    t_rh: u64,
    census: bool,
    rh: RandomHopState,
    offset: Option<usize>,
    sense_channel: usize,
    seen_offsets: Vec<usize>,
    result: Option<OhsResult>,
}

impl HoppingPrelude {
    pub fn new(k: usize, t_rh: u64, census: bool, anchor: u64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            k,
            anchor,
            t_rh,
            census,
            rh: RandomHopState::new(k, rng),
            offset: None,
            sense_channel: 0,
            seen_offsets: Vec::new(),
            result: None,
        }
    }

    pub fn end_slot(&self) -> u64 {
        self.anchor + self.t_rh + if self.census { (self.k * self.k) as u64 } else { 0 }
    }

    pub fn offset(&self) -> Option<usize> {
        self.offset
    }

    /// Rotation offset, fixing it from the parked random-hop channel on
    /// first use (callers invoke this at their first sequential-hop slot).
    pub fn ensure_offset(&mut self, t: u64) -> usize {
        *self.offset.get_or_insert_with(|| rotation_offset(self.rh.channel, t, self.k))
    }

    pub fn census_result(&self) -> Option<OhsResult> {
        self.result
    }

    fn in_own_window(&self, t: u64) -> bool {
        if !self.census {
            return false;
        }
        let Some(o) = self.offset else { return false };
        let census_start = self.anchor + self.t_rh;
        let w = o as u64;
        t >= census_start + w * self.k as u64 && t < census_start + (w + 1) * self.k as u64
    }

    /// Action while the prelude is still running; `None` once it is over.
    pub fn act(&mut self, t: u64) -> Option<Action> {
        if t >= self.end_slot() {
            return None;
        }
        if t < self.anchor + self.t_rh {
            return Some(Action::transmit(self.rh.channel));
        }
        let o = self.ensure_offset(t);
        if self.in_own_window(t) {
            // Park the sensor where the rotation would have put us; resume in
            // phase after exactly K slots.
            self.sense_channel = rotation_channel(o, t - (t - (self.anchor + self.t_rh)) % self.k as u64, self.k);
            Some(Action::sense(self.sense_channel))
        } else {
            Some(Action::transmit(rotation_channel(o, t, self.k)))
        }
    }

    pub fn update(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) {
        let t = obs.slot;
        if t < self.anchor + self.t_rh {
            self.rh.on_outcome(obs.collided(), rng);
            return;
        }
        if self.in_own_window(t) {
            if obs.sensed_busy.get(self.sense_channel) == Some(&Sensed::Busy) {
                let h = self.sense_channel as i64;
                let s = (t % self.k as u64) as i64;
                let other = (h - s).rem_euclid(self.k as i64) as usize;
                if !self.seen_offsets.contains(&other) {
                    self.seen_offsets.push(other);
                }
            }
            // Close the census at the last slot of the window.
            let census_start = self.anchor + self.t_rh;
            let o = self.offset.unwrap() as u64;
            if t + 1 == census_start + (o + 1) * self.k as u64 {
                let mut offsets = self.seen_offsets.clone();
                offsets.push(self.offset.unwrap());
                offsets.sort_unstable();
                let rank = offsets.iter().position(|&x| x == self.offset.unwrap()).unwrap() + 1;
                self.result = Some(OhsResult { n_hat: offsets.len(), rank });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucb_examples() {
        let mut stats = ArmStats::new(2);
        assert_eq!(ucb_index(&stats, 0, 10), f64::INFINITY);
        for _ in 0..4 {
            stats.record(0, 0.5);
        }
        let u = ucb_index(&stats, 0, 100);
        assert!((u - 2.0174271293851465).abs() < 1e-12, "u={u}");
        // Symmetric arms get equal indices.
        for _ in 0..4 {
            stats.record(1, 0.5);
        }
        assert_eq!(ucb_index(&stats, 0, 100), ucb_index(&stats, 1, 100));
    }

    #[test]
    fn seqhop_wraps() {
        // 1-based contract: (8, K=8) -> 1 and (3, K=8) -> 4.
        assert_eq!(seqhop_next(7, 8), 0);
        assert_eq!(seqhop_next(2, 8), 3);
    }

    #[test]
    fn seqhop_orthogonality_and_coverage() {
        // Users starting on distinct channels stay collision-free over 16
        // slots and each visits every channel exactly twice.
        let k = 8;
        let mut channels = vec![0usize, 1, 2, 3];
        let mut visits = vec![vec![0u32; k]; 4];
        for _ in 0..16 {
            let mut seen = std::collections::HashSet::new();
            for (u, c) in channels.iter().enumerate() {
                assert!(seen.insert(*c), "collision at channel {c}");
                visits[u][*c] += 1;
            }
            for c in channels.iter_mut() {
                *c = seqhop_next(*c, k);
            }
        }
        for v in visits {
            assert!(v.iter().all(|&n| n == 2));
        }
    }

    #[test]
    fn rotation_offset_roundtrip() {
        for k in [3usize, 8, 12] {
            for t in [0u64, 5, 17, 1_000_003] {
                for c in 0..k {
                    let o = rotation_offset(c, t, k);
                    assert_eq!(rotation_channel(o, t, k), c);
                }
            }
        }
    }

    #[test]
    fn random_hop_declaration() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rh = RandomHopState::new(8, &mut rng);
        for _ in 0..7 {
            rh.on_outcome(false, &mut rng);
        }
        assert!(!rh.declared_orthogonal());
        rh.on_outcome(false, &mut rng);
        assert!(rh.declared_orthogonal());
        // Declared users park: a roaming peer colliding into them does not
        // dislodge them.
        let chan = rh.channel;
        rh.on_outcome(true, &mut rng);
        assert!(rh.declared_orthogonal());
        assert_eq!(rh.channel, chan);
    }

    #[test]
    fn random_hop_orthogonalization_time_for_four_of_eight() {
        // Brute-simulated random-hop joint dynamics: median time to full
        // orthogonality over 10^4 trials stays at or under 50 slots.
        use rand::SeedableRng;
        let (n, k, trials) = (4usize, 8usize, 10_000usize);
        let mut times = Vec::with_capacity(trials);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(trial as u64);
            let mut chans: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let mut t = 0u64;
            loop {
                let mut counts = vec![0u8; k];
                for &c in &chans {
                    counts[c] += 1;
                }
                if counts.iter().all(|&x| x <= 1) {
                    break;
                }
                for c in chans.iter_mut() {
                    if counts[*c] >= 2 {
                        *c = rng.gen_range(0..k);
                    }
                }
                t += 1;
                assert!(t < 100_000, "random hop failed to orthogonalize");
            }
            times.push(t);
        }
        times.sort_unstable();
        let median = times[trials / 2];
        assert!(median <= 50, "median orthogonalization time {median}");
    }
}
