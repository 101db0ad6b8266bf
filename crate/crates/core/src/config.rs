//! Experiment configuration: algorithm selection with resolved parameter
//! defaults, user-dynamics schedules, and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::ChannelModel;
use crate::radio::RadioCapability;

/// Which decentralized algorithm every user runs, with all tunables
/// materialized. Constructors taking `(k, horizon)` fill in the defaults so
/// a config echo always shows concrete numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum AlgorithmSpec {
    /// Random hop forever: stay while collision-free, redraw on collision.
    RandomHop,
    /// Random-hop orthogonalization, then round-robin hopping forever.
    SeqHop { t_rh: u64 },
    /// UCB-ranked play of a random rank in 1..=N; rank redrawn per collision.
    RhoRand { n_known: usize, ucb_c: f64 },
    /// Known-N musical-chairs play inside the estimated UCB top-N set.
    McTopM { n_known: usize, ucb_c: f64 },
    /// McTopM without knowing N: assumes N = K.
    UMcTopM { ucb_c: f64 },
    /// Uniform learning phase of `t0` slots, N estimated from the collision
    /// rate, then musical chairs over the estimated top channels.
    MusicalChairs { t0: u64 },
    /// Epsilon-greedy with ALOHA-style persistence and backoff.
    Mega { c: f64, d: f64, p0: f64, alpha: f64, beta: f64 },
    /// RH orthogonalization, one-hot sensing to count users and take a rank,
    /// sequential-hop estimation, then a rank-matched fix.
    Scf { t_rh: u64, l_sh: u64 },
    /// RH + SH estimation, then scheduled trekking toward better channels.
    Tsn { t_rh: u64, l_sh: u64, trek_window: u64 },
    /// TSN plus periodic upward probing and a sense-scan entry protocol, for
    /// networks where users enter and leave.
    Tdn { t_rh: u64, l_sh: u64, trek_window: u64, probe_period: u64, l_entry: u64 },
    /// MusicalChairs restarted on a doubling epoch schedule.
    Dmc { t0: u64, epoch0: u64 },
    /// Scf restarted on a doubling epoch schedule.
    Dscf { t_rh: u64, l_sh: u64, epoch0: u64 },
    /// Explore (SH), signal quantized estimates, match via max-weight
    /// assignment, exploit for doubling durations. Fixed 8-bit quantization.
    Eser { t_rh: u64, l_explore: u64, exploit0: u64, bits: u8 },
    /// Eser with a shortened signaling phase: bit width grows with the epoch
    /// as min(4 + e, 8).
    MEser { t_rh: u64, l_explore: u64, exploit0: u64 },
}

/// Default random-hop phase length. Generous: the median orthogonalization
/// time for N <= K = 8 is well under 100 slots, and an un-orthogonalized user
/// at the phase boundary poisons the whole replication.
pub fn default_t_rh(k: usize) -> u64 {
    100 * k as u64
}

/// Default sequential-hop estimation length: ~1000 samples per channel.
pub fn default_l_sh(k: usize) -> u64 {
    1000 * k as u64
}

/// Default trekking probation window, growing with the horizon.
pub fn default_trek_window(horizon: u64) -> u64 {
    (10.0 * (horizon.max(2) as f64).ln()).ceil() as u64
}

/// Default musical-chairs learning length for the comparison experiments:
/// matched to the SH-based algorithms' per-channel sample budget (uniform
/// play collects a usable sample only when the slot is collision-free).
pub fn default_mc_t0(k: usize, horizon: u64) -> u64 {
    (130.0 * k as f64 * (horizon.max(2) as f64).ln()).ceil() as u64
}

/// Default first-epoch explore length for the explore-signal-exploit family.
pub fn default_eser_explore(k: usize, horizon: u64) -> u64 {
    (5.0 * k as f64 * (horizon.max(2) as f64).ln()).ceil() as u64
}

impl AlgorithmSpec {
    pub fn random_hop() -> Self {
        AlgorithmSpec::RandomHop
    }

    pub fn seq_hop(k: usize) -> Self {
        AlgorithmSpec::SeqHop { t_rh: default_t_rh(k) }
    }

    pub fn rho_rand(n: usize) -> Self {
        AlgorithmSpec::RhoRand { n_known: n, ucb_c: 2.0 }
    }

    pub fn mctopm(n: usize) -> Self {
        AlgorithmSpec::McTopM { n_known: n, ucb_c: 2.0 }
    }

    pub fn umctopm() -> Self {
        AlgorithmSpec::UMcTopM { ucb_c: 2.0 }
    }

    pub fn musical_chairs(k: usize, horizon: u64) -> Self {
        AlgorithmSpec::MusicalChairs { t0: default_mc_t0(k, horizon) }
    }

    pub fn mega() -> Self {
        AlgorithmSpec::Mega { c: 0.1, d: 0.05, p0: 0.6, alpha: 0.5, beta: 0.8 }
    }

    pub fn scf(k: usize) -> Self {
        AlgorithmSpec::Scf { t_rh: default_t_rh(k), l_sh: default_l_sh(k) }
    }

    pub fn tsn(k: usize, horizon: u64) -> Self {
        AlgorithmSpec::Tsn {
            t_rh: default_t_rh(k),
            l_sh: default_l_sh(k),
            trek_window: default_trek_window(horizon),
        }
    }

    pub fn tdn(k: usize, horizon: u64) -> Self {
        AlgorithmSpec::Tdn {
            t_rh: default_t_rh(k),
            l_sh: default_l_sh(k),
            trek_window: default_trek_window(horizon),
            probe_period: 500,
            l_entry: default_l_sh(k) / 4,
        }
    }

    pub fn dmc(k: usize, horizon: u64) -> Self {
        AlgorithmSpec::Dmc { t0: default_mc_t0(k, horizon), epoch0: horizon / 20 }
    }

    pub fn dscf(k: usize, horizon: u64) -> Self {
        AlgorithmSpec::Dscf {
            t_rh: default_t_rh(k),
            l_sh: default_l_sh(k),
            epoch0: horizon / 20,
        }
    }

    pub fn eser(k: usize, horizon: u64) -> Self {
        let l = default_eser_explore(k, horizon);
        AlgorithmSpec::Eser { t_rh: default_t_rh(k), l_explore: l, exploit0: 2 * l, bits: 8 }
    }

    pub fn meser(k: usize, horizon: u64) -> Self {
        let l = default_eser_explore(k, horizon);
        AlgorithmSpec::MEser { t_rh: default_t_rh(k), l_explore: l, exploit0: 2 * l }
    }

    /// Config-file / CLI name.
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::RandomHop => "random_hop",
            AlgorithmSpec::SeqHop { .. } => "sh",
            AlgorithmSpec::RhoRand { .. } => "rho_rand",
            AlgorithmSpec::McTopM { .. } => "mctopm",
            AlgorithmSpec::UMcTopM { .. } => "umctopm",
            AlgorithmSpec::MusicalChairs { .. } => "mc",
            AlgorithmSpec::Mega { .. } => "mega",
            AlgorithmSpec::Scf { .. } => "scf",
            AlgorithmSpec::Tsn { .. } => "tsn",
            AlgorithmSpec::Tdn { .. } => "tdn",
            AlgorithmSpec::Dmc { .. } => "dmc",
            AlgorithmSpec::Dscf { .. } => "dscf",
            AlgorithmSpec::Eser { .. } => "eser",
            AlgorithmSpec::MEser { .. } => "meser",
        }
    }

    /// Build the named algorithm with all defaults for `(k, horizon, n)`.
    /// `n` is only consulted by the known-N algorithms.
    pub fn by_name(name: &str, k: usize, horizon: u64, n: usize) -> Option<Self> {
        Some(match name {
            "random_hop" => Self::random_hop(),
            "sh" => Self::seq_hop(k),
            "rho_rand" => Self::rho_rand(n),
            "mctopm" => Self::mctopm(n),
            "umctopm" => Self::umctopm(),
            "mc" => Self::musical_chairs(k, horizon),
            "mega" => Self::mega(),
            "scf" => Self::scf(k),
            "tsn" => Self::tsn(k, horizon),
            "tdn" => Self::tdn(k, horizon),
            "dmc" => Self::dmc(k, horizon),
            "dscf" => Self::dscf(k, horizon),
            "eser" => Self::eser(k, horizon),
            "meser" => Self::meser(k, horizon),
            _ => return None,
        })
    }

    pub const ALL_NAMES: [&'static str; 14] = [
        "random_hop",
        "sh",
        "rho_rand",
        "mctopm",
        "umctopm",
        "mc",
        "mega",
        "scf",
        "tsn",
        "tdn",
        "dmc",
        "dscf",
        "eser",
        "meser",
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaveTarget {
    /// Drop a user chosen uniformly among the active ones.
    Random,
    /// Drop a specific user id.
    User(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsEvent {
    Enter,
    Leave(LeaveTarget),
}

/// A slot-stamped list of enter/leave events, applied at slot boundaries
/// before any action of the slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSchedule {
    pub events: Vec<(u64, DynamicsEvent)>,
    /// Upper bound on concurrently active users (0 means "no cap").
    pub max_users: usize,
}

impl DynamicsSchedule {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Alternating leave/enter every `period` slots, starting with a leave.
    pub fn alternating(period: u64, horizon: u64) -> Self {
        let mut events = Vec::new();
        let mut slot = period;
        let mut leave = true;
        while slot < horizon {
            let ev = if leave {
                DynamicsEvent::Leave(LeaveTarget::Random)
            } else {
                DynamicsEvent::Enter
            };
            events.push((slot, ev));
            leave = !leave;
            slot += period;
        }
        Self { events, max_users: 0 }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("horizon must be >= 1")]
    ZeroHorizon,
    #[error("replications must be >= 1")]
    ZeroReplications,
    #[error("initial user count must be >= 1")]
    NoUsers,
    #[error("dynamics events must be sorted by slot (offender at slot {0})")]
    UnsortedDynamics(u64),
    #[error("dynamics event at slot {0} is outside the horizon")]
    DynamicsPastHorizon(u64),
    #[error("leave event at slot {slot} would empty the network")]
    LeaveBelowOne { slot: u64 },
    #[error("enter event at slot {slot} exceeds the user cap {cap}")]
    EnterAboveCap { slot: u64, cap: usize },
    #[error("known user count {n} exceeds the channel count {k}")]
    TooManyKnownUsers { n: usize, k: usize },
    #[error("quantization width must be 1..=16 bits, got {0}")]
    BadBits(u8),
}

/// Everything one experiment needs: the channel model, the algorithm, the
/// radio, the horizon, the replication count, seeding, dynamics and output
/// sampling. Identical configs (including the seed) give byte-identical
/// results regardless of thread count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ChannelModel,
    pub algorithm: AlgorithmSpec,
    pub radio: RadioCapability,
    pub horizon: u64,
    pub replications: u32,
    pub base_seed: u64,
    pub initial_users: usize,
    pub dynamics: DynamicsSchedule,
    /// Record a cumulative sample every `downsample` slots.
    pub downsample: u64,
    /// Extra slot counts at which to record a sample exactly (sorted),
    /// e.g. phase boundaries an analysis wants without full-rate sampling.
    pub checkpoints: Vec<u64>,
    /// Keep per-user observation/action logs (for replay checks; memory-heavy).
    pub record_trace: bool,
}

impl ExperimentConfig {
    pub fn new(model: ChannelModel, algorithm: AlgorithmSpec, users: usize, horizon: u64) -> Self {
        Self {
            model,
            algorithm,
            radio: RadioCapability::TYPE2_NB,
            horizon,
            replications: 1,
            base_seed: 0,
            initial_users: users,
            dynamics: DynamicsSchedule::empty(),
            downsample: (horizon / 1000).max(1),
            checkpoints: Vec::new(),
            record_trace: false,
        }
    }

    pub fn with_replications(mut self, r: u32) -> Self {
        self.replications = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_dynamics(mut self, dynamics: DynamicsSchedule) -> Self {
        self.dynamics = dynamics;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::ZeroHorizon);
        }
        if self.replications == 0 {
            return Err(ConfigError::ZeroReplications);
        }
        if self.initial_users == 0 {
            return Err(ConfigError::NoUsers);
        }
        let k = self.model.num_channels();
        match self.algorithm {
            AlgorithmSpec::McTopM { n_known, .. } | AlgorithmSpec::RhoRand { n_known, .. } => {
                if n_known > k {
                    return Err(ConfigError::TooManyKnownUsers { n: n_known, k });
                }
            }
            AlgorithmSpec::Eser { bits, .. } => {
                if !(1..=16).contains(&bits) {
                    return Err(ConfigError::BadBits(bits));
                }
            }
            _ => {}
        }
        let mut active = self.initial_users as i64;
        let mut last_slot = 0u64;
        for (slot, ev) in &self.dynamics.events {
            if *slot < last_slot {
                return Err(ConfigError::UnsortedDynamics(*slot));
            }
            last_slot = *slot;
            if *slot >= self.horizon {
                return Err(ConfigError::DynamicsPastHorizon(*slot));
            }
            match ev {
                DynamicsEvent::Enter => {
                    active += 1;
                    if self.dynamics.max_users > 0 && active as usize > self.dynamics.max_users {
                        return Err(ConfigError::EnterAboveCap {
                            slot: *slot,
                            cap: self.dynamics.max_users,
                        });
                    }
                }
                DynamicsEvent::Leave(_) => {
                    active -= 1;
                    if active < 1 {
                        return Err(ConfigError::LeaveBelowOne { slot: *slot });
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> ExperimentConfig {
        let model = ChannelModel::homogeneous(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        ExperimentConfig::new(model, AlgorithmSpec::seq_hop(4), 2, 1000)
    }

    #[test]
    fn valid_config_passes() {
        base_config().validate().unwrap();
    }

    #[test]
    fn rejects_zero_horizon_and_users() {
        let mut cfg = base_config();
        cfg.horizon = 0;
        assert_eq!(cfg.validate(), Err(ConfigError::ZeroHorizon));
        let mut cfg = base_config();
        cfg.initial_users = 0;
        assert_eq!(cfg.validate(), Err(ConfigError::NoUsers));
    }

    #[test]
    fn rejects_draining_dynamics() {
        let mut cfg = base_config();
        cfg.initial_users = 1;
        cfg.dynamics.events = vec![(10, DynamicsEvent::Leave(LeaveTarget::Random))];
        assert_eq!(cfg.validate(), Err(ConfigError::LeaveBelowOne { slot: 10 }));
    }

    #[test]
    fn rejects_cap_overflow_and_unsorted_events() {
        let mut cfg = base_config();
        cfg.dynamics.max_users = 2;
        cfg.dynamics.events = vec![(5, DynamicsEvent::Enter)];
        assert_eq!(cfg.validate(), Err(ConfigError::EnterAboveCap { slot: 5, cap: 2 }));

        let mut cfg = base_config();
        cfg.dynamics.events = vec![
            (50, DynamicsEvent::Enter),
            (10, DynamicsEvent::Leave(LeaveTarget::Random)),
        ];
        assert_eq!(cfg.validate(), Err(ConfigError::UnsortedDynamics(10)));
    }

    #[test]
    fn alternating_schedule_matches_expected_shape() {
        let d = DynamicsSchedule::alternating(100_000, 500_000);
        assert_eq!(d.events.len(), 4);
        assert_eq!(d.events[0].0, 100_000);
        assert!(matches!(d.events[0].1, DynamicsEvent::Leave(_)));
        assert!(matches!(d.events[1].1, DynamicsEvent::Enter));
        assert_eq!(d.events[3].0, 400_000);
    }

    #[test]
    fn algorithm_names_roundtrip() {
        for name in AlgorithmSpec::ALL_NAMES {
            let spec = AlgorithmSpec::by_name(name, 8, 100_000, 4).unwrap();
            assert_eq!(spec.name(), name);
        }
        assert!(AlgorithmSpec::by_name("nope", 8, 100_000, 4).is_none());
    }
}
