//! Discrete-time simulator for decentralized multi-user channel selection in
//! cognitive ad-hoc networks, built on the multi-player multi-armed bandit
//! model.
//!
//! The crate is organized around the slot loop: [`env`] draws channel
//! randomness and resolves collisions, [`radio`] filters ground truth into
//! per-terminal observations, [`policies`] hosts the decentralized learning
//! algorithms, [`signaling`] carries quantized estimates over busy/idle
//! patterns, [`allocation`] provides oracle matchings and regret accounting,
//! and [`runner`] drives seeded, replicable experiments.

pub mod allocation;
pub mod config;
pub mod env;
pub mod policies;
pub mod radio;
pub mod runner;
pub mod signaling;

pub use config::{AlgorithmSpec, DynamicsEvent, DynamicsSchedule, ExperimentConfig, LeaveTarget};
pub use env::{ChannelModel, RewardLaw, UserId};
pub use radio::{Action, Observation, RadioCapability};
pub use runner::{run_experiment, run_replication, ExperimentResult, ReplicationResult};
