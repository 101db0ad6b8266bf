//! Explore, signal, exploit, repeat: for channels whose quality differs per
//! user, so users must agree on a full assignment rather than a ranking.
//!
//! After the hopping prelude (which yields the user count and a rank for
//! everyone), each epoch runs three phases on the shared schedule:
//! sequential-hop exploration refines the user's own row of the mean matrix;
//! the signaling phase broadcasts each row, quantized, over the on-off
//! codec while everyone else listens; then every user runs the same
//! max-weight matching on the same assembled matrix and locks its assigned
//! channel, each epoch for twice as long as the last. Identical inputs and a
//! deterministic solver make the exploit phases collision-free.

use rand_chacha::ChaCha8Rng;

use crate::allocation::hungarian;
use crate::radio::{Action, Observation, Sensed};
use crate::signaling::{
    dequantize, frame_len, home_channel, quantize, Frame, SignalError,
};

use super::{rotation_channel, ArmStats, HoppingPrelude, OhsResult, Policy};

/// Quantization width per epoch: fixed, or growing as min(4 + e, 8) to keep
/// early signaling phases short while estimates are coarse anyway.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitSchedule {
    Fixed(u8),
    Growing,
}

impl BitSchedule {
    fn bits(&self, epoch: u32) -> u8 {
        match self {
            BitSchedule::Fixed(b) => *b,
            BitSchedule::Growing => (4 + epoch).min(8) as u8,
        }
    }
}

pub struct Eser {
    k: usize,
    l_explore: u64,
    exploit0: u64,
    schedule: BitSchedule,
    prelude: HoppingPrelude,
    stats: ArmStats,
    census: Option<OhsResult>,
    // Current-epoch boundaries (absolute slots).
    epoch: u32,
    signal_start: u64,
    exploit_start: u64,
    epoch_end: u64,
    // Signaling state.
    my_frame: Option<Frame>,
    listen: Vec<bool>,
    rows: Vec<Option<Vec<f64>>>,
    assigned: Option<usize>,
    fault: Option<String>,
    rng: ChaCha8Rng,
}

impl Eser {
    pub fn new(
        k: usize,
        t_rh: u64,
        l_explore: u64,
        exploit0: u64,
        schedule: BitSchedule,
        anchor: u64,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let prelude = HoppingPrelude::new(k, t_rh, true, anchor, &mut rng);
        Self {
            k,
            l_explore: l_explore.max(k as u64),
            exploit0: exploit0.max(1),
            schedule,
            prelude,
            stats: ArmStats::new(k),
            census: None,
            epoch: 0,
            signal_start: 0,
            exploit_start: 0,
            epoch_end: 0,
            my_frame: None,
            listen: Vec::new(),
            rows: Vec::new(),
            assigned: None,
            fault: None,
            rng,
        }
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn assigned_channel(&self) -> Option<usize> {
        self.assigned
    }

    fn bits(&self) -> u8 {
        self.schedule.bits(self.epoch)
    }

    fn n_hat(&self) -> usize {
        self.census.expect("census complete").n_hat
    }

    fn rank(&self) -> usize {
        self.census.expect("census complete").rank
    }

    fn start_epoch(&mut self, number: u32, explore_start: u64) {
        self.epoch = number;
        let f = frame_len(self.k, self.bits()) as u64;
        self.signal_start = explore_start + self.l_explore;
        self.exploit_start = self.signal_start + self.n_hat() as u64 * f;
        let exploit_len = self.exploit0.saturating_mul(1u64 << (number - 1).min(40));
        self.epoch_end = self.exploit_start + exploit_len;
        self.my_frame = None;
        self.listen.clear();
        self.rows = vec![None; self.n_hat()];
        self.assigned = None;
    }

    /// Total slots one epoch occupies, for schedule introspection.
    pub fn epoch_len(k: usize, n: usize, l_explore: u64, exploit0: u64, schedule: BitSchedule, e: u32) -> u64 {
        let bits = schedule.bits(e);
        l_explore
            + n as u64 * frame_len(k, bits) as u64
            + exploit0.saturating_mul(1u64 << (e - 1).min(40))
    }

    fn act_signal(&mut self, t: u64) -> Action {
        let f = frame_len(self.k, self.bits()) as u64;
        let idx = ((t - self.signal_start) / f) as usize;
        let speaker = idx + 1;
        if speaker == self.rank() {
            if self.my_frame.is_none() {
                let levels = quantize(self.stats.means(), self.bits()).expect("bits validated");
                self.rows[idx] = Some(dequantize(&levels, self.bits()));
                self.my_frame = Some(
                    Frame::new(self.rank(), self.k, self.bits(), self.signal_start, &levels)
                        .expect("bits validated"),
                );
            }
            self.my_frame.as_ref().unwrap().action_at(t).expect("inside own frame")
        } else {
            Action::sense(home_channel(speaker, self.k))
        }
    }

    fn assemble_and_match(&mut self) {
        let mut weights = Vec::with_capacity(self.n_hat());
        for (i, row) in self.rows.iter().enumerate() {
            match row {
                Some(r) => weights.push(r.clone()),
                None => {
                    self.fault = Some(format!("no decoded estimates for speaker rank {}", i + 1));
                    return;
                }
            }
        }
        match hungarian(&weights) {
            Ok(assignment) => self.assigned = Some(assignment.channel_of_user[self.rank() - 1]),
            Err(e) => self.fault = Some(format!("matching failed: {e}")),
        }
    }
}

impl Policy for Eser {
    fn act(&mut self, t: u64) -> Action {
        if let Some(a) = self.prelude.act(t) {
            return a;
        }
        if self.census.is_none() {
            self.census = self.prelude.census_result();
            if self.census.is_none() {
                self.fault = Some("census did not complete".to_string());
                return Action::idle();
            }
            self.start_epoch(1, self.prelude.end_slot());
        }
        if t >= self.epoch_end {
            let next = self.epoch + 1;
            let start = self.epoch_end;
            self.start_epoch(next, start);
        }
        if t < self.signal_start {
            let o = self.prelude.ensure_offset(t);
            Action::transmit(rotation_channel(o, t, self.k))
        } else if t < self.exploit_start {
            self.act_signal(t)
        } else {
            if self.assigned.is_none() && self.fault.is_none() {
                self.assemble_and_match();
            }
            match self.assigned {
                Some(c) => Action::transmit(c),
                None => Action::idle(),
            }
        }
    }

    fn update(&mut self, obs: &Observation) {
        self.prelude.update(obs, &mut self.rng);
        if let (Some(r), Some(c)) = (obs.reward, obs.action.transmit_channel()) {
            self.stats.record(c, r);
        }
        let t = obs.slot;
        if self.census.is_some() && t >= self.signal_start && t < self.exploit_start {
            let f = frame_len(self.k, self.bits()) as u64;
            let idx = ((t - self.signal_start) / f) as usize;
            let speaker = idx + 1;
            if speaker != self.rank() {
                let pos = ((t - self.signal_start) % f) as usize;
                if pos == 0 {
                    self.listen.clear();
                }
                let home = home_channel(speaker, self.k);
                self.listen.push(obs.sensed_busy.get(home) == Some(&Sensed::Busy));
                if pos + 1 == f as usize {
                    match crate::signaling::decode_frame(&self.listen, self.k, self.bits()) {
                        Ok(levels) => self.rows[idx] = Some(dequantize(&levels, self.bits())),
                        Err(e @ SignalError::Parity { .. }) => {
                            self.fault =
                                Some(format!("frame decode from speaker rank {speaker}: {e}"))
                        }
                        Err(e) => self.fault = Some(format!("frame decode: {e}")),
                    }
                }
            }
        }
    }

    fn fault(&self) -> Option<&str> {
        self.fault.as_deref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{draw_slot, resolve_slot, ChannelModel, RewardLaw};
    use crate::radio::{observe, RadioCapability};
    use rand::SeedableRng;

    fn run_eser_population(
        rows: Vec<Vec<f64>>,
        horizon: u64,
        schedule: BitSchedule,
        seed: u64,
    ) -> (Vec<Eser>, u64, f64) {
        let n = rows.len();
        let k = rows[0].len();
        let model =
            ChannelModel::new(rows.clone(), vec![0.0; k], RewardLaw::Bernoulli).unwrap();
        let mut users: Vec<Eser> = (0..n)
            .map(|u| {
                Eser::new(
                    k,
                    20 * k as u64,
                    60 * k as u64,
                    400,
                    schedule,
                    0,
                    ChaCha8Rng::seed_from_u64(seed * 100 + u as u64),
                )
            })
            .collect();
        let mut env_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut exploit_collisions = 0u64;
        let mut last_exploit_value = 0.0;
        for t in 0..horizon {
            let actions: Vec<_> =
                users.iter_mut().enumerate().map(|(u, p)| (u, p.act(t))).collect();
            let draws = draw_slot(&model, t, &mut env_rng);
            let ground = resolve_slot(&model, &draws, t, &actions, &mut env_rng).unwrap();
            let exploiting = users.iter().all(|p| p.assigned_channel().is_some());
            if exploiting {
                exploit_collisions += ground.collision_channels.len() as u64;
                last_exploit_value = users
                    .iter()
                    .enumerate()
                    .map(|(u, p)| rows[u][p.assigned_channel().unwrap()])
                    .sum();
            }
            for (u, p) in users.iter_mut().enumerate() {
                let obs = observe(RadioCapability::TYPE2_NB, &ground, u);
                p.update(&obs);
                assert!(p.fault().is_none(), "fault: {:?}", p.fault());
            }
        }
        (users, exploit_collisions, last_exploit_value)
    }

    #[test]
    fn two_users_converge_to_the_optimal_matching() {
        let rows = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let (users, collisions, value) = run_eser_population(rows, 12_000, BitSchedule::Fixed(8), 3);
        assert_eq!(collisions, 0, "exploit phases must be collision-free");
        assert!(users.iter().all(|p| p.epoch() >= 2));
        assert!((value - 1.7).abs() < 1e-9, "assignment value {value}");
    }

    #[test]
    fn growing_bit_schedule_also_converges_and_signals_less_early() {
        let rows = vec![vec![0.9, 0.1, 0.4], vec![0.2, 0.8, 0.4]];
        let (_, collisions, value) =
            run_eser_population(rows, 15_000, BitSchedule::Growing, 5);
        assert_eq!(collisions, 0);
        assert!((value - 1.7).abs() < 1e-9);
        // Epoch-1 frames are 5-bit: shorter than the fixed 8-bit schedule.
        assert!(
            Eser::epoch_len(3, 2, 180, 400, BitSchedule::Growing, 1)
                < Eser::epoch_len(3, 2, 180, 400, BitSchedule::Fixed(8), 1)
        );
        // Doubling exploits dominate epoch growth.
        let l2 = Eser::epoch_len(3, 2, 180, 400, BitSchedule::Fixed(8), 2);
        let l3 = Eser::epoch_len(3, 2, 180, 400, BitSchedule::Fixed(8), 3);
        assert_eq!(l3 - l2, 800);
    }

    #[test]
    fn six_users_twelve_channels_collision_free_exploits() {
        let mut rows = Vec::new();
        let mut mrng = ChaCha8Rng::seed_from_u64(77);
        use rand::Rng;
        for _ in 0..6 {
            rows.push((0..12).map(|_| mrng.gen::<f64>()).collect::<Vec<f64>>());
        }
        let (users, collisions, _) = run_eser_population(rows, 25_000, BitSchedule::Fixed(8), 9);
        assert_eq!(collisions, 0);
        let mut assigned: Vec<usize> =
            users.iter().map(|p| p.assigned_channel().unwrap()).collect();
        assigned.sort_unstable();
        assigned.dedup();
        assert_eq!(assigned.len(), 6, "assignments must be distinct");
    }
}
