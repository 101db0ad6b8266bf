//! Musical-chairs play restricted to the estimated top-N channels.
//!
//! The user keeps UCB indices over all channels and treats the N highest as
//! the candidate set. It moves only when its current channel drops out of
//! that set (regardless of being locked) or when it collides while unlocked;
//! a collision-free slot on a candidate channel locks it in place. With
//! N = K the candidate set is the whole band and the policy degenerates to
//! lock-on-first-clean-slot, which is the unknown-N variant.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::radio::{Action, Observation};

use super::{ArmStats, Policy};

pub struct McTopM {
    n: usize,
    ucb_c: f64,
    stats: ArmStats,
    current: usize,
    locked: bool,
    rng: ChaCha8Rng,
}

impl McTopM {
    pub fn new(k: usize, n: usize, ucb_c: f64, mut rng: ChaCha8Rng) -> Self {
        let current = rng.gen_range(0..k);
        Self { n: n.clamp(1, k), ucb_c, stats: ArmStats::new(k), current, locked: false, rng }
    }

    pub fn locked(&self) -> bool {
        self.locked
    }

    pub fn current_channel(&self) -> usize {
        self.current
    }

    /// The candidate set the next update would use at slot count `t`.
    pub fn estimated_top_set(&self, t: u64) -> Vec<usize> {
        self.stats.ucb_top_set(self.n, t, self.ucb_c)
    }
}

impl Policy for McTopM {
    fn act(&mut self, _t: u64) -> Action {
        Action::transmit(self.current)
    }

    fn update(&mut self, obs: &Observation) {
        let prev_top = self.stats.ucb_top_set(self.n, obs.slot + 1, self.ucb_c);
        if let Some(r) = obs.reward {
            self.stats.record(self.current, r);
        }
        let top = self.stats.ucb_top_set(self.n, obs.slot + 1, self.ucb_c);
        if !top.contains(&self.current) {
            // The channel went non-optimal: move into the candidate set,
            // dropping any lock. Prefer the channels that just entered the
            // set (the ones nobody is sitting on) so routine index churn
            // does not smash explorers into locked users.
            let entered: Vec<usize> =
                top.iter().copied().filter(|c| !prev_top.contains(c)).collect();
            let pool = if entered.is_empty() { &top } else { &entered };
            self.current = pool[self.rng.gen_range(0..pool.len())];
            self.locked = false;
        } else if obs.collided() && !self.locked {
            self.current = top[self.rng.gen_range(0..top.len())];
        } else if !obs.collided() && obs.action.transmit_channel().is_some() {
            self.locked = true;
        }
    }
}
