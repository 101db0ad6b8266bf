//! Deterministic Monte Carlo engine.
//!
//! One replication is a strictly sequential slot loop: apply dynamics events,
//! collect every active policy's action, draw and resolve the slot, deliver
//! observations, accumulate metrics. Every random stream is seeded from
//! (base seed, replication, role), so identical configs give byte-identical
//! results, replications are independent, and experiments parallelize across
//! replications without affecting output.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::allocation::{MetricsAccumulator, MetricsSeries};
use crate::config::{DynamicsEvent, ExperimentConfig, LeaveTarget};
use crate::env::{draw_slot, oracle_slot_value, resolve_slot, EnvError, UserId};
use crate::policies::{build_policy, EntryMode, Policy};
use crate::radio::{observe, validate_action, Action, Observation};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_ENV: u64 = 0;
const TAG_DYNAMICS: u64 = 1;
const TAG_USER_BASE: u64 = 2;

/// Seed for one named stream of one replication.
pub fn stream_seed(base_seed: u64, replication: u32, tag: u64) -> u64 {
    splitmix(splitmix(base_seed ^ splitmix(tag)) ^ (replication as u64))
}

pub fn user_seed(base_seed: u64, replication: u32, user: UserId) -> u64 {
    stream_seed(base_seed, replication, TAG_USER_BASE + user as u64)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("environment error at slot {slot}: {source}")]
    Env { slot: u64, source: EnvError },
    #[error("illegal action by user {user} at slot {slot}: {action:?} ({violation})")]
    IllegalAction { slot: u64, user: UserId, action: Action, violation: String },
    #[error("policy fault for user {user} at slot {slot}: {message}")]
    PolicyFault { slot: u64, user: UserId, message: String },
    #[error("dynamics event at slot {slot} is invalid: {reason}")]
    DynamicsInvalid { slot: u64, reason: String },
}

/// Per-user log kept when `record_trace` is set; lets tests replay a user's
/// observation history through a fresh policy instance.
#[derive(Debug, Clone)]
pub struct UserTrace {
    pub seed: u64,
    pub entry_slot: u64,
    pub entry_mode_entered: bool,
    pub actions: Vec<Action>,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, Default)]
pub struct ReplicationTrace {
    pub per_user: BTreeMap<UserId, UserTrace>,
    /// Active user count per slot (after dynamics were applied).
    pub active_counts: Vec<usize>,
}

#[derive(Debug)]
pub struct ReplicationResult {
    pub metrics: MetricsSeries,
    pub trace: Option<ReplicationTrace>,
}

struct ActiveUser {
    id: UserId,
    policy: Box<dyn Policy>,
}

/// Apply the dynamics events scheduled for slot `t`. Entering users receive a
/// fresh policy; leaving users are dropped without notifying anyone else.
fn apply_dynamics(
    cfg: &ExperimentConfig,
    t: u64,
    next_event: &mut usize,
    next_id: &mut UserId,
    active: &mut Vec<ActiveUser>,
    dyn_rng: &mut ChaCha8Rng,
    replication: u32,
    trace: &mut Option<ReplicationTrace>,
) -> Result<(), RunError> {
    while *next_event < cfg.dynamics.events.len() && cfg.dynamics.events[*next_event].0 == t {
        let (slot, ev) = &cfg.dynamics.events[*next_event];
        match ev {
            DynamicsEvent::Enter => {
                let id = *next_id;
                *next_id += 1;
                let seed = user_seed(cfg.base_seed, replication, id);
                let policy = build_policy(
                    &cfg.algorithm,
                    cfg.model.num_channels(),
                    cfg.horizon,
                    seed,
                    t,
                    EntryMode::Entered,
                );
                active.push(ActiveUser { id, policy });
                if let Some(tr) = trace {
                    tr.per_user.insert(
                        id,
                        UserTrace {
                            seed,
                            entry_slot: t,
                            entry_mode_entered: true,
                            actions: Vec::new(),
                            observations: Vec::new(),
                        },
                    );
                }
            }
            DynamicsEvent::Leave(target) => {
                let idx = match target {
                    LeaveTarget::Random => {
                        if active.is_empty() {
                            return Err(RunError::DynamicsInvalid {
                                slot: *slot,
                                reason: "leave from an empty network".into(),
                            });
                        }
                        dyn_rng.gen_range(0..active.len())
                    }
                    LeaveTarget::User(id) => {
                        active.iter().position(|u| u.id == *id).ok_or_else(|| {
                            RunError::DynamicsInvalid {
                                slot: *slot,
                                reason: format!("user {id} is not active"),
                            }
                        })?
                    }
                };
                active.remove(idx);
            }
        }
        *next_event += 1;
    }
    Ok(())
}

/// Run one replication of the experiment. Strictly sequential in `t`; all
/// `act` calls of a slot complete before any `update` of that slot.
pub fn run_replication(cfg: &ExperimentConfig, replication: u32) -> Result<ReplicationResult, RunError> {
    let k = cfg.model.num_channels();
    let mut env_rng =
        ChaCha8Rng::seed_from_u64(stream_seed(cfg.base_seed, replication, TAG_ENV));
    let mut dyn_rng =
        ChaCha8Rng::seed_from_u64(stream_seed(cfg.base_seed, replication, TAG_DYNAMICS));

    let mut active: Vec<ActiveUser> = Vec::new();
    let mut trace = cfg.record_trace.then(ReplicationTrace::default);
    for id in 0..cfg.initial_users {
        let seed = user_seed(cfg.base_seed, replication, id);
        let policy = build_policy(&cfg.algorithm, k, cfg.horizon, seed, 0, EntryMode::Initial);
        active.push(ActiveUser { id, policy });
        if let Some(tr) = trace.as_mut() {
            tr.per_user.insert(
                id,
                UserTrace {
                    seed,
                    entry_slot: 0,
                    entry_mode_entered: false,
                    actions: Vec::new(),
                    observations: Vec::new(),
                },
            );
        }
    }
    let mut next_id = cfg.initial_users;
    let mut next_event = 0usize;

    // Oracle value is piecewise constant between dynamics events and mean
    // changes; recompute only at those slots.
    let mut change_slots: Vec<u64> = cfg.dynamics.events.iter().map(|(t, _)| *t).collect();
    change_slots.extend(cfg.model.change_point_slots());
    change_slots.sort_unstable();
    change_slots.dedup();

    let mut acc = MetricsAccumulator::with_checkpoints(cfg.downsample, cfg.checkpoints.clone(), k);
    let mut oracle_value = f64::NAN;
    let mut actions: Vec<(UserId, Action)> = Vec::new();

    for t in 0..cfg.horizon {
        apply_dynamics(
            cfg,
            t,
            &mut next_event,
            &mut next_id,
            &mut active,
            &mut dyn_rng,
            replication,
            &mut trace,
        )?;
        if let Some(tr) = trace.as_mut() {
            tr.active_counts.push(active.len());
        }
        if oracle_value.is_nan() || change_slots.binary_search(&t).is_ok() {
            oracle_value = if cfg.model.is_homogeneous() {
                oracle_slot_value(&cfg.model, active.len(), t)
            } else {
                let means = cfg.model.means_at(t);
                let weights: Vec<Vec<f64>> = active
                    .iter()
                    .map(|u| {
                        means[u.id % means.len()]
                            .iter()
                            .zip(cfg.model.occupancy())
                            .map(|(&mu, &th)| mu * (1.0 - th))
                            .collect()
                    })
                    .collect();
                crate::allocation::oracle_matching_value(&weights)
            };
        }

        actions.clear();
        for user in active.iter_mut() {
            let action = user.policy.act(t);
            if let Err(violation) = validate_action(cfg.radio, &action) {
                return Err(RunError::IllegalAction {
                    slot: t,
                    user: user.id,
                    action,
                    violation: violation.to_string(),
                });
            }
            if let Some(tr) = trace.as_mut() {
                tr.per_user.get_mut(&user.id).unwrap().actions.push(action.clone());
            }
            actions.push((user.id, action));
        }

        let draws = draw_slot(&cfg.model, t, &mut env_rng);
        let ground = resolve_slot(&cfg.model, &draws, t, &actions, &mut env_rng)
            .map_err(|source| RunError::Env { slot: t, source })?;
        acc.record(oracle_value, &ground, &cfg.model);

        for user in active.iter_mut() {
            let obs = observe(cfg.radio, &ground, user.id);
            if let Some(tr) = trace.as_mut() {
                tr.per_user.get_mut(&user.id).unwrap().observations.push(obs.clone());
            }
            user.policy.update(&obs);
            if let Some(msg) = user.policy.fault() {
                return Err(RunError::PolicyFault {
                    slot: t,
                    user: user.id,
                    message: msg.to_string(),
                });
            }
        }
    }

    Ok(ReplicationResult { metrics: acc.finish(), trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    PseudoRegret,
    RealizedRegret,
    Collisions,
    PuInterference,
}

impl Metric {
    pub const ALL: [Metric; 4] =
        [Metric::PseudoRegret, Metric::RealizedRegret, Metric::Collisions, Metric::PuInterference];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::PseudoRegret => "pseudo_regret",
            Metric::RealizedRegret => "realized_regret",
            Metric::Collisions => "collisions",
            Metric::PuInterference => "pu_interference",
        }
    }

    fn of(&self, s: &crate::allocation::MetricsSample) -> f64 {
        match self {
            Metric::PseudoRegret => s.pseudo_regret,
            Metric::RealizedRegret => s.realized_regret,
            Metric::Collisions => s.collisions as f64,
            Metric::PuInterference => s.pu_interference as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Median,
    P05,
    P95,
}

impl Statistic {
    pub const ALL: [Statistic; 4] =
        [Statistic::Mean, Statistic::Median, Statistic::P05, Statistic::P95];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Median => "median",
            Statistic::P05 => "p05",
            Statistic::P95 => "p95",
        }
    }
}

/// Percentile with linear interpolation between closest ranks.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn stat_of(values: &mut Vec<f64>, stat: Statistic) -> f64 {
    match stat {
        Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Statistic::Median | Statistic::P05 | Statistic::P95 => {
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let q = match stat {
                Statistic::Median => 0.5,
                Statistic::P05 => 0.05,
                _ => 0.95,
            };
            percentile(values, q)
        }
    }
}

/// All replications of one experiment, with aggregation helpers. Aggregates
/// are pure folds over the per-replication series in replication order, so
/// they are independent of execution interleaving.
#[derive(Debug)]
pub struct ExperimentResult {
    pub replications: Vec<MetricsSeries>,
    pub traces: Vec<Option<ReplicationTrace>>,
}

impl ExperimentResult {
    /// Sample slots shared by every replication.
    pub fn slots(&self) -> Vec<u64> {
        self.replications.first().map(|m| m.samples.iter().map(|s| s.slot).collect()).unwrap_or_default()
    }

    /// Aggregated cumulative curve for one metric.
    pub fn curve(&self, metric: Metric, stat: Statistic) -> Vec<f64> {
        let n_samples = self.replications.first().map(|m| m.samples.len()).unwrap_or(0);
        (0..n_samples)
            .map(|i| {
                let mut values: Vec<f64> =
                    self.replications.iter().map(|m| metric.of(&m.samples[i])).collect();
                stat_of(&mut values, stat)
            })
            .collect()
    }

    /// Final cumulative value of `metric` for each replication.
    pub fn final_values(&self, metric: Metric) -> Vec<f64> {
        self.replications.iter().map(|m| metric.of(&m.final_sample)).collect()
    }

    pub fn final_stat(&self, metric: Metric, stat: Statistic) -> f64 {
        let mut values = self.final_values(metric);
        stat_of(&mut values, stat)
    }
}

/// Run all replications, in parallel when the `parallel` feature is on.
/// Results are collected in replication order regardless of completion order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, RunError> {
    cfg.validate().map_err(|e| RunError::DynamicsInvalid { slot: 0, reason: e.to_string() })?;
    let runs: Vec<Result<ReplicationResult, RunError>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..cfg.replications).into_par_iter().map(|r| run_replication(cfg, r)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..cfg.replications).map(|r| run_replication(cfg, r)).collect()
        }
    };
    let mut replications = Vec::with_capacity(runs.len());
    let mut traces = Vec::with_capacity(runs.len());
    for run in runs {
        let run = run?;
        replications.push(run.metrics);
        traces.push(run.trace);
    }
    Ok(ExperimentResult { replications, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{AlgorithmSpec, DynamicsSchedule};
    use crate::env::ChannelModel;

    fn eight_channel_means() -> Vec<f64> {
        vec![0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78]
    }

    fn quick_config(algorithm: AlgorithmSpec, users: usize, horizon: u64) -> ExperimentConfig {
        let model = ChannelModel::homogeneous(eight_channel_means()).unwrap();
        ExperimentConfig::new(model, algorithm, users, horizon).with_seed(424242)
    }

    #[test]
    fn identical_configs_give_identical_series() {
        let cfg = quick_config(AlgorithmSpec::seq_hop(8), 4, 3000);
        let a = run_replication(&cfg, 0).unwrap();
        let b = run_replication(&cfg, 0).unwrap();
        assert_eq!(a.metrics.samples, b.metrics.samples);
        assert_eq!(
            a.metrics.final_sample.pseudo_regret,
            b.metrics.final_sample.pseudo_regret
        );
        // A different replication index diverges.
        let c = run_replication(&cfg, 1).unwrap();
        assert_ne!(
            a.metrics.final_sample.pseudo_regret,
            c.metrics.final_sample.pseudo_regret
        );
    }

    #[test]
    fn seqhop_after_orthogonalization_never_collides() {
        let mut cfg = quick_config(AlgorithmSpec::SeqHop { t_rh: 800 }, 4, 20_000);
        cfg.record_trace = true;
        let run = run_replication(&cfg, 3).unwrap();
        // All collisions happen in the random-hop phase.
        let final_collisions = run.metrics.final_sample.collisions;
        let at_rh_end = run
            .metrics
            .samples
            .iter()
            .find(|s| s.slot >= 800)
            .map(|s| s.collisions)
            .unwrap();
        assert_eq!(final_collisions, at_rh_end);
    }

    #[test]
    fn alternating_dynamics_change_the_active_count() {
        let mut cfg = quick_config(AlgorithmSpec::tdn(8, 50_000), 4, 50_000);
        cfg.dynamics = DynamicsSchedule::alternating(10_000, 50_000);
        cfg.record_trace = true;
        let run = run_replication(&cfg, 0).unwrap();
        let counts = &run.trace.unwrap().active_counts;
        assert_eq!(counts[0], 4);
        assert_eq!(counts[10_000], 3);
        assert_eq!(counts[20_000], 4);
        assert_eq!(counts[30_000], 3);
        assert_eq!(counts[40_000], 4);
    }

    #[test]
    fn experiment_aggregates_match_manual_fold() {
        let cfg = quick_config(AlgorithmSpec::random_hop(), 3, 2000).with_replications(8);
        let result = run_experiment(&cfg).unwrap();
        assert_eq!(result.replications.len(), 8);
        let finals = result.final_values(Metric::PseudoRegret);
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        assert!((result.final_stat(Metric::PseudoRegret, Statistic::Mean) - mean).abs() < 1e-9);
        // Single replication: aggregates equal the series itself.
        let cfg1 = quick_config(AlgorithmSpec::random_hop(), 3, 2000).with_replications(1);
        let r1 = run_experiment(&cfg1).unwrap();
        assert_eq!(
            r1.final_stat(Metric::PseudoRegret, Statistic::Median),
            r1.replications[0].final_sample.pseudo_regret
        );
    }

    #[test]
    fn replication_isolation() {
        // Removing a replication does not change any other's series: rep 2 of
        // an 8-rep experiment equals rep 2 run alone.
        let cfg = quick_config(AlgorithmSpec::mctopm(4), 4, 2000).with_replications(8);
        let all = run_experiment(&cfg).unwrap();
        let lone = run_replication(&cfg, 2).unwrap();
        assert_eq!(all.replications[2].samples, lone.metrics.samples);
    }

    #[test]
    fn oracle_dominance_across_algorithms() {
        for spec in [
            AlgorithmSpec::random_hop(),
            AlgorithmSpec::seq_hop(8),
            AlgorithmSpec::mctopm(4),
            AlgorithmSpec::musical_chairs(8, 5000),
            AlgorithmSpec::mega(),
        ] {
            let cfg = quick_config(spec, 4, 5000);
            let run = run_replication(&cfg, 7).unwrap();
            assert!(
                run.metrics.min_pseudo_increment >= -1e-12,
                "negative increment for {:?}",
                cfg.algorithm.name()
            );
        }
    }
}
