//! Epoch-reset wrapper: rerun a static-network algorithm from scratch on a
//! doubling schedule so a changing user population is eventually relearned.
//! Users entering mid-epoch stay silent until the next boundary; the running
//! cohort's fixed allocation is never disturbed by a half-initialized peer.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::AlgorithmSpec;
use crate::radio::{Action, Observation};

use super::{build_policy, EntryMode, Policy};

pub struct EpochReset {
    base: AlgorithmSpec,
    k: usize,
    horizon: u64,
    inner: Option<Box<dyn Policy>>,
    /// Start slot of the upcoming epoch (inner is rebuilt there).
    next_boundary: u64,
    /// Length of the upcoming epoch.
    next_len: u64,
    rng: ChaCha8Rng,
}

impl EpochReset {
    pub fn new(
        base: AlgorithmSpec,
        k: usize,
        horizon: u64,
        epoch0: u64,
        anchor: u64,
        rng: ChaCha8Rng,
    ) -> Self {
        // Global boundaries at 0, L, 3L, 7L, ... regardless of entry time, so
        // every user agrees on the schedule. Find the first boundary >= anchor.
        let epoch0 = epoch0.max(1);
        let mut start = 0u64;
        let mut len = epoch0;
        while start + len <= anchor {
            start += len;
            len *= 2;
        }
        let (next_boundary, next_len) =
            if start == anchor { (start, len) } else { (start + len, len * 2) };
        Self { base, k, horizon, inner: None, next_boundary, next_len, rng }
    }
}

impl Policy for EpochReset {
    fn act(&mut self, t: u64) -> Action {
        if t >= self.next_boundary {
            let seed = self.rng.gen::<u64>();
            self.inner = Some(build_policy(
                &self.base,
                self.k,
                self.horizon,
                seed,
                self.next_boundary,
                EntryMode::Initial,
            ));
            self.next_boundary += self.next_len;
            self.next_len *= 2;
        }
        match self.inner.as_mut() {
            Some(p) => p.act(t),
            None => Action::idle(),
        }
    }

    fn update(&mut self, obs: &Observation) {
        if let Some(p) = self.inner.as_mut() {
            p.update(obs);
        }
    }

    fn fault(&self) -> Option<&str> {
        self.inner.as_ref().and_then(|p| p.fault())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn boundaries_double_and_latecomers_wait() {
        // epoch0 = 100: boundaries at 0, 100, 300, 700, ...
        let w = EpochReset::new(
            AlgorithmSpec::RandomHop,
            4,
            10_000,
            100,
            0,
            ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(w.next_boundary, 0);
        assert_eq!(w.next_len, 100);

        let w = EpochReset::new(
            AlgorithmSpec::RandomHop,
            4,
            10_000,
            100,
            150,
            ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(w.next_boundary, 300);

        let w = EpochReset::new(
            AlgorithmSpec::RandomHop,
            4,
            10_000,
            100,
            300,
            ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(w.next_boundary, 300);
    }

    #[test]
    fn idles_until_the_first_boundary_then_plays() {
        let mut w = EpochReset::new(
            AlgorithmSpec::RandomHop,
            4,
            10_000,
            100,
            150,
            ChaCha8Rng::seed_from_u64(2),
        );
        for t in 150..300 {
            assert_eq!(w.act(t), Action::idle());
        }
        assert!(w.act(300).transmit_channel().is_some());
    }

    #[test]
    fn inner_restarts_at_each_boundary() {
        // A restarted random-hop redraws its channel from the fresh seed
        // stream; observing across a boundary we expect a fresh instance (no
        // panic, still transmitting) and epoch lengths doubling.
        let mut w = EpochReset::new(
            AlgorithmSpec::RandomHop,
            8,
            10_000,
            50,
            0,
            ChaCha8Rng::seed_from_u64(3),
        );
        let mut boundaries = vec![];
        let mut last = usize::MAX;
        for t in 0..400u64 {
            let c = w.act(t).transmit_channel().unwrap();
            if t == 0 || t == 50 || t == 150 || t == 350 {
                boundaries.push(t);
            }
            last = c;
            let obs = Observation {
                slot: t,
                action: Action::transmit(c),
                success: true,
                reward: Some(0.5),
                collision: Some(false),
                sensed_busy: vec![crate::radio::Sensed::Unobserved; 8],
            };
            w.update(&obs);
        }
        assert_eq!(boundaries, vec![0, 50, 150, 350]);
        assert!(last < 8);
    }
}
