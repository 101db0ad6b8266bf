//! Coordinate-and-fix: random-hop orthogonalization, a one-hot sensing
//! census for the user count and a rank, collision-free sequential hopping
//! to estimate every channel, then a permanent fix where the user holding
//! rank r takes its r-th best channel.

use rand_chacha::ChaCha8Rng;

use crate::radio::{Action, Observation};

use super::{rotation_channel, ArmStats, HoppingPrelude, Policy};

pub struct Scf {
    k: usize,
    l_sh: u64,
    prelude: HoppingPrelude,
    stats: ArmStats,
    fixed: Option<usize>,
    rng: ChaCha8Rng,
}

impl Scf {
    pub fn new(k: usize, t_rh: u64, l_sh: u64, anchor: u64, mut rng: ChaCha8Rng) -> Self {
        let prelude = HoppingPrelude::new(k, t_rh, true, anchor, &mut rng);
        Self { k, l_sh, prelude, stats: ArmStats::new(k), fixed: None, rng }
    }

    pub fn fix_slot(&self) -> u64 {
        self.prelude.end_slot() + self.l_sh
    }

    pub fn fixed_channel(&self) -> Option<usize> {
        self.fixed
    }

    pub fn census(&self) -> Option<super::OhsResult> {
        self.prelude.census_result()
    }
}

impl Policy for Scf {
    fn act(&mut self, t: u64) -> Action {
        if let Some(a) = self.prelude.act(t) {
            return a;
        }
        if t < self.fix_slot() {
            let o = self.prelude.ensure_offset(t);
            return Action::transmit(rotation_channel(o, t, self.k));
        }
        if self.fixed.is_none() {
            // Rank r takes the r-th best channel of this user's own estimates;
            // the census made ranks distinct, and equal sample counts make the
            // estimates agree across users with high probability.
            let census = self.prelude.census_result().expect("census completed");
            let ranked = self.stats.ranked_by_mean();
            self.fixed = Some(ranked[census.rank - 1]);
        }
        Action::transmit(self.fixed.unwrap())
    }

    fn update(&mut self, obs: &Observation) {
        self.prelude.update(obs, &mut self.rng);
        if let (Some(r), Some(c)) = (obs.reward, obs.action.transmit_channel()) {
            self.stats.record(c, r);
        }
    }
}
