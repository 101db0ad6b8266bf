//! Trekking: settle users on the best channels without knowing how many
//! users there are.
//!
//! After random-hop orthogonalization and a sequential-hop estimation phase,
//! every user freezes its own channel ranking and the population runs a
//! fixed schedule of trek rounds. In the round for target rank r (top-down
//! within a sweep), the occupant of its rank-(r+1) channel senses the rank-r
//! channel for a probation window; an all-idle window means the better
//! channel is free and the user moves up, any busy slot means it is held and
//! the user stays. Movers that collide (possible only when users' rankings
//! disagree) yield back to their previous channel. After (K-1) sweeps every
//! user has climbed as far as it can and the population sits on the top-N
//! channels, transmitting forever.
//!
//! The dynamic variant keeps a slow upward probe after settling (one sense
//! slot per `probe_period`) so a vacated better channel is discovered and
//! taken, and admits entrants through a sense-scan: they random-hop over the
//! channels they saw vacant, estimate them by hopping, then settle on the
//! best and join the probing regime.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::radio::{Action, Observation, Sensed};

use super::{rotation_channel, ArmStats, EntryMode, HoppingPrelude, Policy, RandomHopState};

#[derive(Debug, Clone, PartialEq)]
enum State {
    /// Random hop + start of rotation (initial users).
    Prelude,
    /// Collision-free sequential hop, building channel estimates.
    Estimate,
    /// Scheduled trek rounds.
    Trek,
    /// Parked on the final channel. Dynamic users keep watching upward.
    Settled,
    /// Entrant: sensing each channel once to find the vacant set.
    Scan { started: u64 },
    /// Entrant: random hop restricted to the sensed-vacant set.
    EntryHop,
    /// Entrant: round-robin over the vacant set, estimating it.
    EntryEstimate { started: u64, pos0: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Watch {
    /// Transmitting; probes the next-better channel once per period.
    Idle,
    /// Saw the target idle; sensing it for a full window.
    Probation { idles: u64 },
    /// Moved onto the target last slot; waiting for the collision verdict.
    MoveAttempt { prev: usize },
}

pub struct Trekking {
    k: usize,
    l_sh: u64,
    window: u64,
    dynamic: bool,
    probe_period: u64,
    l_entry: u64,
    prelude: Option<HoppingPrelude>,
    stats: ArmStats,
    state: State,
    /// Known channels, best first, frozen when trekking starts.
    ranked: Vec<usize>,
    /// 1-based rank per channel among the known ones.
    rank_of: Vec<Option<usize>>,
    current: usize,
    // Per-round trek bookkeeping.
    probing: bool,
    probe_ok: bool,
    probe_target: usize,
    pending_move: Option<usize>,
    // Entrant bookkeeping.
    vacant: Vec<usize>,
    entry_rh: Option<RandomHopState>,
    // Settled-watch bookkeeping (dynamic only).
    watch: Watch,
    probe_jitter: u64,
    probe_slot_target: Option<usize>,
    rng: ChaCha8Rng,
}

impl Trekking {
    pub fn static_network(
        k: usize,
        t_rh: u64,
        l_sh: u64,
        window: u64,
        anchor: u64,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let prelude = HoppingPrelude::new(k, t_rh, false, anchor, &mut rng);
        Self::common(k, l_sh, window, false, 0, 0, Some(prelude), State::Prelude, rng)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn dynamic_network(
        k: usize,
        t_rh: u64,
        l_sh: u64,
        window: u64,
        probe_period: u64,
        l_entry: u64,
        anchor: u64,
        entry: EntryMode,
        mut rng: ChaCha8Rng,
    ) -> Self {
        match entry {
            EntryMode::Initial => {
                let prelude = HoppingPrelude::new(k, t_rh, false, anchor, &mut rng);
                Self::common(
                    k,
                    l_sh,
                    window,
                    true,
                    probe_period,
                    l_entry,
                    Some(prelude),
                    State::Prelude,
                    rng,
                )
            }
            EntryMode::Entered => Self::common(
                k,
                l_sh,
                window,
                true,
                probe_period,
                l_entry,
                None,
                State::Scan { started: anchor },
                rng,
            ),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn common(
        k: usize,
        l_sh: u64,
        window: u64,
        dynamic: bool,
        probe_period: u64,
        l_entry: u64,
        prelude: Option<HoppingPrelude>,
        state: State,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let probe_period = probe_period.max(2);
        let probe_jitter = rng.gen_range(0..probe_period);
        Self {
            k,
            l_sh,
            window: window.max(1),
            dynamic,
            probe_period,
            l_entry: l_entry.max(k as u64),
            prelude,
            stats: ArmStats::new(k),
            state,
            ranked: Vec::new(),
            rank_of: vec![None; k],
            current: 0,
            probing: false,
            probe_ok: false,
            probe_target: 0,
            pending_move: None,
            vacant: Vec::new(),
            entry_rh: None,
            watch: Watch::Idle,
            probe_jitter,
            probe_slot_target: None,
            rng,
        }
    }

    fn round_len(&self) -> u64 {
        self.window + 2
    }

    fn trek_start(&self) -> u64 {
        self.prelude.as_ref().expect("initial user").end_slot() + self.l_sh
    }

    fn trek_len(&self) -> u64 {
        let rounds = (self.k as u64 - 1) * (self.k as u64 - 1);
        rounds * self.round_len()
    }

    /// Freeze the ranking over `channels` (ties to the lower index).
    fn freeze_ranking(&mut self, channels: &[usize]) {
        let mut ranked: Vec<usize> = channels.to_vec();
        ranked.sort_by(|&a, &b| {
            self.stats.mean(b).partial_cmp(&self.stats.mean(a)).unwrap().then(a.cmp(&b))
        });
        self.rank_of = vec![None; self.k];
        for (i, &c) in ranked.iter().enumerate() {
            self.rank_of[c] = Some(i + 1);
        }
        self.ranked = ranked;
    }

    /// The next-better known channel than `current`, if any.
    fn better_channel(&self) -> Option<usize> {
        match self.rank_of[self.current] {
            Some(r) if r >= 2 => Some(self.ranked[r - 2]),
            _ => None,
        }
    }

    pub fn settled_channel(&self) -> Option<usize> {
        if self.state == State::Settled {
            Some(self.current)
        } else {
            None
        }
    }

    fn act_trek(&mut self, t: u64) -> Action {
        let rel = t - self.trek_start();
        let pos = rel % self.round_len();
        if pos == 0 {
            // Round setup: target rank runs 1..K-1 top-down within a sweep.
            let round = rel / self.round_len();
            let rho = (round % (self.k as u64 - 1)) as usize + 1;
            self.probing = self.rank_of[self.current] == Some(rho + 1);
            self.probe_ok = true;
            self.probe_target = if self.probing { self.ranked[rho - 1] } else { 0 };
            self.pending_move = None;
        }
        if pos < self.window {
            if self.probing && self.probe_ok {
                return Action::sense(self.probe_target);
            }
            return Action::transmit(self.current);
        }
        if pos == self.window {
            if self.probing && self.probe_ok {
                self.pending_move = Some(self.current);
                self.current = self.probe_target;
            }
            return Action::transmit(self.current);
        }
        // Resolve slot: the verdict already arrived in update().
        Action::transmit(self.current)
    }

    fn update_trek(&mut self, obs: &Observation) {
        let rel = obs.slot - self.trek_start();
        let pos = rel % self.round_len();
        if pos < self.window && self.probing && self.probe_ok {
            if obs.sensed_busy.get(self.probe_target) == Some(&Sensed::Busy) {
                self.probe_ok = false;
            }
        } else if pos == self.window {
            if let Some(prev) = self.pending_move.take() {
                if obs.collided() {
                    // Another mover targeted the same channel: yield.
                    self.current = prev;
                }
            }
        }
    }

    fn act_settled(&mut self, t: u64) -> Action {
        self.probe_slot_target = None;
        if !self.dynamic {
            return Action::transmit(self.current);
        }
        match self.watch {
            Watch::Idle => {
                if let Some(target) = self.better_channel() {
                    if (t + self.probe_jitter) % self.probe_period == 0 {
                        self.probe_slot_target = Some(target);
                        return Action::sense(target);
                    }
                }
                Action::transmit(self.current)
            }
            Watch::Probation { .. } => {
                let target = self.better_channel().expect("probation has a target");
                self.probe_slot_target = Some(target);
                Action::sense(target)
            }
            Watch::MoveAttempt { .. } => Action::transmit(self.current),
        }
    }

    fn update_settled(&mut self, obs: &Observation) {
        if !self.dynamic {
            return;
        }
        match self.watch {
            Watch::Idle | Watch::Probation { .. } => {
                let Some(target) = self.probe_slot_target else { return };
                let idle = obs.sensed_busy.get(target) == Some(&Sensed::Idle);
                let idles = match self.watch {
                    Watch::Probation { idles } => idles,
                    _ => 0,
                };
                if !idle {
                    self.watch = Watch::Idle;
                } else if idles + 1 >= self.window {
                    // Window of idles complete: take the better channel.
                    self.watch = Watch::MoveAttempt { prev: self.current };
                    self.current = target;
                } else {
                    self.watch = Watch::Probation { idles: idles + 1 };
                }
            }
            Watch::MoveAttempt { prev } => {
                if obs.collided() {
                    self.current = prev;
                }
                self.watch = Watch::Idle;
            }
        }
    }

    fn act_entrant(&mut self, t: u64) -> Action {
        match self.state {
            State::Scan { started } => Action::sense(((t - started) % self.k as u64) as usize),
            State::EntryHop => {
                let rh = self.entry_rh.as_ref().expect("entry hop state");
                Action::transmit(self.vacant[rh.channel])
            }
            State::EntryEstimate { started, pos0 } => {
                let idx = (pos0 as u64 + (t - started)) % self.vacant.len() as u64;
                Action::transmit(self.vacant[idx as usize])
            }
            _ => unreachable!("entrant states only"),
        }
    }

    fn update_entrant(&mut self, obs: &Observation) {
        match self.state {
            State::Scan { started } => {
                let c = ((obs.slot - started) % self.k as u64) as usize;
                if obs.sensed_busy.get(c) == Some(&Sensed::Idle) {
                    self.vacant.push(c);
                }
                if obs.slot + 1 == started + self.k as u64 {
                    if self.vacant.is_empty() {
                        // Saturated band: keep scanning until something opens.
                        self.state = State::Scan { started: obs.slot + 1 };
                    } else {
                        self.vacant.sort_unstable();
                        self.entry_rh =
                            Some(RandomHopState::new(self.vacant.len(), &mut self.rng));
                        self.state = State::EntryHop;
                    }
                }
            }
            State::EntryHop => {
                let rh = self.entry_rh.as_mut().expect("entry hop state");
                rh.on_outcome(obs.collided(), &mut self.rng);
                // Full K clean slots, as in the main hop phase, before
                // trusting the slot we hold.
                if rh.clean_streak >= self.k as u64 {
                    let pos0 = rh.channel;
                    self.state = State::EntryEstimate { started: obs.slot + 1, pos0 };
                }
            }
            State::EntryEstimate { started, .. } => {
                if obs.collided() {
                    // Another entrant shares the vacant set: re-orthogonalize.
                    self.entry_rh = Some(RandomHopState::new(self.vacant.len(), &mut self.rng));
                    self.state = State::EntryHop;
                    return;
                }
                if obs.slot + 1 == started + self.l_entry {
                    let vacant = self.vacant.clone();
                    self.freeze_ranking(&vacant);
                    self.current = self.ranked[0];
                    self.watch = Watch::MoveAttempt { prev: self.ranked[self.ranked.len() - 1] };
                    self.state = State::Settled;
                }
            }
            _ => unreachable!("entrant states only"),
        }
    }
}

impl Policy for Trekking {
    fn act(&mut self, t: u64) -> Action {
        match self.state {
            State::Prelude => {
                if let Some(a) = self.prelude.as_mut().unwrap().act(t) {
                    return a;
                }
                self.state = State::Estimate;
                self.act(t)
            }
            State::Estimate => {
                let o = self.prelude.as_mut().unwrap().ensure_offset(t);
                if t >= self.trek_start() {
                    let all: Vec<usize> = (0..self.k).collect();
                    self.freeze_ranking(&all);
                    self.current = rotation_channel(o, t, self.k);
                    self.state = State::Trek;
                    return self.act(t);
                }
                Action::transmit(rotation_channel(o, t, self.k))
            }
            State::Trek => {
                if t >= self.trek_start() + self.trek_len() {
                    self.state = State::Settled;
                    return self.act(t);
                }
                self.act_trek(t)
            }
            State::Settled => self.act_settled(t),
            State::Scan { .. } | State::EntryHop | State::EntryEstimate { .. } => {
                self.act_entrant(t)
            }
        }
    }

    fn update(&mut self, obs: &Observation) {
        if let (Some(r), Some(c)) = (obs.reward, obs.action.transmit_channel()) {
            self.stats.record(c, r);
        }
        match self.state {
            State::Prelude | State::Estimate => {
                self.prelude.as_mut().unwrap().update(obs, &mut self.rng);
            }
            State::Trek => self.update_trek(obs),
            State::Settled => self.update_settled(obs),
            State::Scan { .. } | State::EntryHop | State::EntryEstimate { .. } => {
                self.update_entrant(obs)
            }
        }
    }
}
