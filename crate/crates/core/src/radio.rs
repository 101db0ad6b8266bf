//! Radio capability taxonomy and the observation filter.
//!
//! A terminal's sensing bandwidth (none / narrowband / wideband) and duplex
//! type decide what it can learn per slot. Type I radios sense and transmit
//! simultaneously, Type II do one or the other, Type III only transmit and
//! cannot even tell a collision from fading. [`observe`] erases the slot's
//! ground truth down to what each capability physically yields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{SlotGroundTruth, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sensing {
    None,
    Narrowband,
    Wideband,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Duplex {
    /// Simultaneous sense + transmit (two front-ends).
    TypeI,
    /// Sense or transmit in a slot, not both.
    TypeII,
    /// Transmit only.
    TypeIII,
}

/// What a terminal can do in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadioCapability {
    pub sensing: Sensing,
    pub duplex: Duplex,
    /// Wideband sensing front-end paired with narrowband transmission.
    pub hybrid: bool,
}

impl RadioCapability {
    pub const TYPE1_NB: Self =
        Self { sensing: Sensing::Narrowband, duplex: Duplex::TypeI, hybrid: false };
    pub const TYPE1_WB: Self =
        Self { sensing: Sensing::Wideband, duplex: Duplex::TypeI, hybrid: false };
    pub const TYPE2_NB: Self =
        Self { sensing: Sensing::Narrowband, duplex: Duplex::TypeII, hybrid: false };
    pub const TYPE2_WB: Self =
        Self { sensing: Sensing::Wideband, duplex: Duplex::TypeII, hybrid: false };
    pub const TYPE3: Self = Self { sensing: Sensing::None, duplex: Duplex::TypeIII, hybrid: false };
    pub const HYBRID1: Self =
        Self { sensing: Sensing::Wideband, duplex: Duplex::TypeI, hybrid: true };
    pub const HYBRID2: Self =
        Self { sensing: Sensing::Wideband, duplex: Duplex::TypeII, hybrid: true };

    /// Config-file key for this capability.
    pub fn key(&self) -> &'static str {
        match (self.sensing, self.duplex, self.hybrid) {
            (Sensing::Narrowband, Duplex::TypeI, false) => "type1_nb",
            (Sensing::Wideband, Duplex::TypeI, false) => "type1_wb",
            (Sensing::Narrowband, Duplex::TypeII, false) => "type2_nb",
            (Sensing::Wideband, Duplex::TypeII, false) => "type2_wb",
            (Sensing::None, Duplex::TypeIII, false) => "type3",
            (Sensing::Wideband, Duplex::TypeI, true) => "hybrid1",
            (Sensing::Wideband, Duplex::TypeII, true) => "hybrid2",
            _ => "custom",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        match key {
            "type1_nb" => Some(Self::TYPE1_NB),
            "type1_wb" => Some(Self::TYPE1_WB),
            "type2_nb" => Some(Self::TYPE2_NB),
            "type2_wb" => Some(Self::TYPE2_WB),
            "type3" => Some(Self::TYPE3),
            "hybrid1" => Some(Self::HYBRID1),
            "hybrid2" => Some(Self::HYBRID2),
            _ => None,
        }
    }

    pub const ALL_KEYS: [&'static str; 7] =
        ["type1_nb", "type1_wb", "type2_nb", "type2_wb", "type3", "hybrid1", "hybrid2"];
}

/// Concurrent sensing attached to a Type I transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SenseBand {
    Channel(usize),
    Wideband,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    /// Transmit on a channel; `concurrent_sense` is only legal for Type I.
    Transmit { channel: usize, concurrent_sense: Option<SenseBand> },
    Sense(usize),
    SenseWideband,
    Idle,
}

/// One user's decision for one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
}

impl Action {
    pub fn transmit(channel: usize) -> Self {
        Self { kind: ActionKind::Transmit { channel, concurrent_sense: None } }
    }

    pub fn transmit_sensing(channel: usize, sense: SenseBand) -> Self {
        Self { kind: ActionKind::Transmit { channel, concurrent_sense: Some(sense) } }
    }

    pub fn sense(channel: usize) -> Self {
        Self { kind: ActionKind::Sense(channel) }
    }

    pub fn sense_wideband() -> Self {
        Self { kind: ActionKind::SenseWideband }
    }

    pub fn idle() -> Self {
        Self { kind: ActionKind::Idle }
    }

    pub fn transmit_channel(&self) -> Option<usize> {
        match self.kind {
            ActionKind::Transmit { channel, .. } => Some(channel),
            _ => None,
        }
    }

    /// Channel indices this action touches (for validation).
    pub fn referenced_channels(&self) -> Vec<usize> {
        match &self.kind {
            ActionKind::Transmit { channel, concurrent_sense } => {
                let mut v = vec![*channel];
                if let Some(SenseBand::Channel(c)) = concurrent_sense {
                    v.push(*c);
                }
                v
            }
            ActionKind::Sense(c) => vec![*c],
            ActionKind::SenseWideband | ActionKind::Idle => vec![],
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ActionViolation {
    #[error("radio has no sensing front-end")]
    CannotSense,
    #[error("radio senses a single channel, not the whole band")]
    CannotSenseWideband,
    #[error("only Type I radios sense while transmitting")]
    CannotSenseWhileTransmitting,
    #[error("this Type I radio senses a single channel while transmitting")]
    ConcurrentSenseNotWideband,
    #[error("this Type I radio senses the whole band, not a single channel")]
    ConcurrentSenseNotNarrowband,
}

/// Check an action against a capability. Policies are expected to emit only
/// legal actions; a violation here is a policy bug and aborts the replication.
pub fn validate_action(cap: RadioCapability, action: &Action) -> Result<(), ActionViolation> {
    match &action.kind {
        ActionKind::Idle => Ok(()),
        ActionKind::Sense(_) => match cap.sensing {
            Sensing::None => Err(ActionViolation::CannotSense),
            // A wideband front-end can always narrow its view to one channel.
            Sensing::Narrowband | Sensing::Wideband => Ok(()),
        },
        ActionKind::SenseWideband => match cap.sensing {
            Sensing::None => Err(ActionViolation::CannotSense),
            Sensing::Narrowband => Err(ActionViolation::CannotSenseWideband),
            Sensing::Wideband => Ok(()),
        },
        ActionKind::Transmit { concurrent_sense, .. } => match concurrent_sense {
            None => Ok(()),
            Some(band) => {
                if cap.duplex != Duplex::TypeI {
                    return Err(ActionViolation::CannotSenseWhileTransmitting);
                }
                match (cap.sensing, band) {
                    (Sensing::None, _) => Err(ActionViolation::CannotSense),
                    (Sensing::Narrowband, SenseBand::Channel(_)) => Ok(()),
                    (Sensing::Narrowband, SenseBand::Wideband) => {
                        Err(ActionViolation::ConcurrentSenseNotNarrowband)
                    }
                    (Sensing::Wideband, SenseBand::Wideband) => Ok(()),
                    // Hybrid / wideband Type I sense the full band.
                    (Sensing::Wideband, SenseBand::Channel(_)) => {
                        Err(ActionViolation::ConcurrentSenseNotWideband)
                    }
                }
            }
        },
    }
}

/// Tri-state sensing outcome for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sensed {
    Busy,
    Idle,
    Unobserved,
}

/// Everything one user's terminal learned in one slot.
///
/// `reward` is present iff `success` (the ACK carries it). `collision` is
/// `Some` only when the radio can attribute a failed transmission to a
/// collision; transmit-only radios always see `None` and cannot distinguish
/// collision from fading or a PU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub slot: u64,
    pub action: Action,
    pub success: bool,
    pub reward: Option<f64>,
    pub collision: Option<bool>,
    pub sensed_busy: Vec<Sensed>,
}

impl Observation {
    pub fn collided(&self) -> bool {
        self.collision == Some(true)
    }
}

/// Filter the slot's ground truth down to what `user`'s radio can observe.
///
/// A channel is sensed busy when a PU holds it or any SU transmitted on it
/// during the slot and the channel lay inside the sensed band.
pub fn observe(cap: RadioCapability, ground: &SlotGroundTruth, user: UserId) -> Observation {
    let outcome = ground
        .outcome_of(user)
        .unwrap_or_else(|| panic!("user {user} has no outcome in slot {}", ground.slot));
    let k = ground.pu_occupied.len();
    let mut sensed_busy = vec![Sensed::Unobserved; k];

    let busy = |c: usize| ground.pu_occupied[c] || ground.transmitters_on(c) > 0;
    let fill_channel = |sensed: &mut Vec<Sensed>, c: usize| {
        sensed[c] = if busy(c) { Sensed::Busy } else { Sensed::Idle };
    };

    match &outcome.action.kind {
        ActionKind::Sense(c) => fill_channel(&mut sensed_busy, *c),
        ActionKind::SenseWideband => {
            for c in 0..k {
                fill_channel(&mut sensed_busy, c);
            }
        }
        ActionKind::Transmit { concurrent_sense, .. } => match concurrent_sense {
            Some(SenseBand::Channel(c)) => fill_channel(&mut sensed_busy, *c),
            Some(SenseBand::Wideband) => {
                for c in 0..k {
                    fill_channel(&mut sensed_busy, c);
                }
            }
            None => {}
        },
        ActionKind::Idle => {}
    }

    let transmitted = outcome.action.transmit_channel().is_some();
    let collision = if transmitted && cap.sensing != Sensing::None {
        Some(outcome.collided)
    } else {
        None
    };

    Observation {
        slot: ground.slot,
        action: outcome.action.clone(),
        success: outcome.success,
        reward: if outcome.success { Some(outcome.reward) } else { None },
        collision,
        sensed_busy,
    }
}
