//! Musical chairs with a collision-based population estimate.
//!
//! Learning phase: play uniformly at random for `t0` slots, recording
//! per-channel means and the fraction of collided slots. Uniform play over K
//! channels against N-1 peers collides with probability 1 - (1 - 1/K)^(N-1),
//! so inverting the observed rate estimates N. Chairs phase: transmit
//! uniformly over the estimated top-N channels until the first collision-free
//! slot, then keep that chair forever.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::radio::{Action, Observation};

use super::{ArmStats, Policy};

/// Invert the uniform-play collision probability: the estimate that makes
/// `1 - (1 - 1/k)^(n - 1)` closest to the observed rate, clamped to `1..=k`.
pub fn estimate_user_count(collision_fraction: f64, k: usize) -> usize {
    if collision_fraction >= 1.0 {
        return k;
    }
    if collision_fraction <= 0.0 {
        return 1;
    }
    let ratio = (1.0 - collision_fraction).ln() / (1.0 - 1.0 / k as f64).ln();
    (1 + ratio.round() as i64).clamp(1, k as i64) as usize
}

enum Phase {
    Learn,
    Chairs { top: Vec<usize> },
    Fixed(usize),
}

pub struct MusicalChairs {
    k: usize,
    t0: u64,
    anchor: u64,
    stats: ArmStats,
    collided_slots: u64,
    learn_slots: u64,
    phase: Phase,
    last_channel: usize,
    n_hat: usize,
    rng: ChaCha8Rng,
}

impl MusicalChairs {
    pub fn new(k: usize, t0: u64, anchor: u64, rng: ChaCha8Rng) -> Self {
        Self {
            k,
            t0: t0.max(1),
            anchor,
            stats: ArmStats::new(k),
            collided_slots: 0,
            learn_slots: 0,
            phase: Phase::Learn,
            last_channel: 0,
            n_hat: 0,
            rng,
        }
    }

    pub fn estimated_users(&self) -> Option<usize> {
        match self.phase {
            Phase::Learn => None,
            _ => Some(self.n_hat),
        }
    }

    pub fn fixed_channel(&self) -> Option<usize> {
        match self.phase {
            Phase::Fixed(c) => Some(c),
            _ => None,
        }
    }
}

impl Policy for MusicalChairs {
    fn act(&mut self, t: u64) -> Action {
        if matches!(self.phase, Phase::Learn) && t >= self.anchor + self.t0 {
            let p_hat = self.collided_slots as f64 / self.learn_slots.max(1) as f64;
            self.n_hat = estimate_user_count(p_hat, self.k);
            let top: Vec<usize> =
                self.stats.ranked_by_mean().into_iter().take(self.n_hat).collect();
            self.phase = Phase::Chairs { top };
        }
        self.last_channel = match &self.phase {
            Phase::Learn => self.rng.gen_range(0..self.k),
            Phase::Chairs { top } => top[self.rng.gen_range(0..top.len())],
            Phase::Fixed(c) => *c,
        };
        Action::transmit(self.last_channel)
    }

    fn update(&mut self, obs: &Observation) {
        if let Some(r) = obs.reward {
            self.stats.record(self.last_channel, r);
        }
        match self.phase {
            Phase::Learn => {
                self.learn_slots += 1;
                if obs.collided() {
                    self.collided_slots += 1;
                }
            }
            Phase::Chairs { .. } => {
                if !obs.collided() {
                    self.phase = Phase::Fixed(self.last_channel);
                }
            }
            Phase::Fixed(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Sensed;
    use rand::SeedableRng;

    #[test]
    fn inversion_edge_cases() {
        assert_eq!(estimate_user_count(0.0, 8), 1);
        assert_eq!(estimate_user_count(1.0, 8), 8);
        // Exact rates invert exactly.
        for n in 1..=8usize {
            let p = 1.0 - (1.0 - 1.0 / 8.0f64).powi(n as i32 - 1);
            assert_eq!(estimate_user_count(p, 8), n, "n={n}");
        }
    }

    #[test]
    fn single_user_estimates_one_and_fixes_on_best() {
        let mut p = MusicalChairs::new(4, 400, 0, ChaCha8Rng::seed_from_u64(3));
        let means = [0.1, 0.9, 0.3, 0.5];
        let mut t = 0u64;
        while p.fixed_channel().is_none() && t < 1000 {
            let c = p.act(t).transmit_channel().unwrap();
            let obs = Observation {
                slot: t,
                action: Action::transmit(c),
                success: true,
                reward: Some(means[c]),
                collision: Some(false),
                sensed_busy: vec![Sensed::Unobserved; 4],
            };
            p.update(&obs);
            t += 1;
        }
        assert_eq!(p.estimated_users(), Some(1));
        assert_eq!(p.fixed_channel(), Some(1));
    }

    #[test]
    fn fixed_user_never_moves_even_through_collisions() {
        let mut p = MusicalChairs::new(4, 50, 0, ChaCha8Rng::seed_from_u64(5));
        let mut t = 0u64;
        while p.fixed_channel().is_none() {
            let c = p.act(t).transmit_channel().unwrap();
            let obs = Observation {
                slot: t,
                action: Action::transmit(c),
                success: true,
                reward: Some(0.5),
                collision: Some(false),
                sensed_busy: vec![Sensed::Unobserved; 4],
            };
            p.update(&obs);
            t += 1;
        }
        let chair = p.fixed_channel().unwrap();
        for dt in 0..100 {
            let c = p.act(t + dt).transmit_channel().unwrap();
            assert_eq!(c, chair);
            let obs = Observation {
                slot: t + dt,
                action: Action::transmit(c),
                success: false,
                reward: None,
                collision: Some(true),
                sensed_busy: vec![Sensed::Unobserved; 4],
            };
            p.update(&obs);
        }
        assert_eq!(p.fixed_channel(), Some(chair));
    }
}
