//! Canned experiment bundles: the static homogeneous comparisons at K = 8,
//! the collision counts, the dynamic network with alternating leave/enter
//! events, and the heterogeneous explore-signal-exploit runs at K = 12.

use mpmab_core::config::DynamicsSchedule;
use mpmab_core::env::RewardLaw;
use mpmab_core::{AlgorithmSpec, ChannelModel, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The eight-channel mean profile used across the homogeneous experiments.
pub fn eight_channel_means() -> Vec<f64> {
    vec![0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78]
}

/// A seeded uniform mean matrix for `n` users over `k` channels.
pub fn uniform_mean_rows(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// One named run inside a figure bundle.
pub struct PresetRun {
    /// Label used in the CSV `algorithm` column and output file names.
    pub label: String,
    pub config: ExperimentConfig,
}

pub const FIGURE_NAMES: [&str; 5] = ["fig2a", "fig2b", "fig3", "fig4", "fig5"];

fn homogeneous_run(
    algo: AlgorithmSpec,
    users: usize,
    horizon: u64,
    replications: u32,
    seed: u64,
    label: String,
) -> PresetRun {
    let model = ChannelModel::homogeneous(eight_channel_means()).unwrap();
    let config = ExperimentConfig::new(model, algo, users, horizon)
        .with_replications(replications)
        .with_seed(seed);
    PresetRun { label, config }
}

fn static_algorithms(users: usize, horizon: u64) -> Vec<AlgorithmSpec> {
    vec![
        AlgorithmSpec::mctopm(users),
        AlgorithmSpec::umctopm(),
        AlgorithmSpec::seq_hop(8),
        AlgorithmSpec::musical_chairs(8, horizon),
        AlgorithmSpec::scf(8),
        AlgorithmSpec::tsn(8, horizon),
    ]
}

/// Build all runs of a named figure. `None` for an unknown name.
pub fn figure_runs(name: &str, replications: u32, seed: u64) -> Option<Vec<PresetRun>> {
    let horizon = 100_000;
    match name {
        "fig2a" | "fig2b" => {
            let users = if name == "fig2a" { 4 } else { 8 };
            Some(
                static_algorithms(users, horizon)
                    .into_iter()
                    .map(|a| {
                        let label = a.name().to_string();
                        homogeneous_run(a, users, horizon, replications, seed, label)
                    })
                    .collect(),
            )
        }
        "fig3" => {
            // Collision comparison over both population sizes, with MEGA.
            let mut runs = Vec::new();
            for users in [4usize, 8] {
                let mut algos = static_algorithms(users, horizon);
                algos.push(AlgorithmSpec::mega());
                for a in algos {
                    let label = format!("{}_n{}", a.name(), users);
                    runs.push(homogeneous_run(a, users, horizon, replications, seed, label));
                }
            }
            Some(runs)
        }
        "fig4" => {
            let horizon = 500_000;
            let dynamics = DynamicsSchedule::alternating(100_000, horizon);
            let algos = [
                AlgorithmSpec::dmc(8, horizon),
                AlgorithmSpec::dscf(8, horizon),
                AlgorithmSpec::tdn(8, horizon),
            ];
            Some(
                algos
                    .into_iter()
                    .map(|a| {
                        let label = a.name().to_string();
                        let mut run =
                            homogeneous_run(a, 4, horizon, replications, seed, label);
                        run.config = run.config.with_dynamics(dynamics.clone());
                        run
                    })
                    .collect(),
            )
        }
        "fig5" => {
            // Six complete explore-signal-exploit epochs for every N, with
            // the horizon ending inside an exploit phase for both variants.
            let horizon = 110_000;
            let k = 12;
            let mut runs = Vec::new();
            for users in [6usize, 10, 12] {
                let rows = uniform_mean_rows(users, k, seed ^ (users as u64).wrapping_mul(0x9e37));
                for a in [AlgorithmSpec::eser(k, horizon), AlgorithmSpec::meser(k, horizon)] {
                    let model =
                        ChannelModel::new(rows.clone(), vec![0.0; k], RewardLaw::Bernoulli)
                            .unwrap();
                    let label = format!("{}_n{}", a.name(), users);
                    let config = ExperimentConfig::new(model, a, users, horizon)
                        .with_replications(replications)
                        .with_seed(seed);
                    runs.push(PresetRun { label, config });
                }
            }
            Some(runs)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_figure_builds_valid_configs() {
        for name in FIGURE_NAMES {
            let runs = figure_runs(name, 2, 1).unwrap();
            assert!(!runs.is_empty());
            for run in &runs {
                run.config.validate().unwrap_or_else(|e| panic!("{name}/{}: {e}", run.label));
            }
        }
        assert!(figure_runs("fig9", 2, 1).is_none());
    }

    #[test]
    fn fig4_schedule_alternates_from_four_users() {
        let runs = figure_runs("fig4", 1, 1).unwrap();
        let cfg = &runs[0].config;
        assert_eq!(cfg.initial_users, 4);
        assert_eq!(cfg.horizon, 500_000);
        assert_eq!(cfg.dynamics.events.len(), 4);
    }

    #[test]
    fn fig5_matrices_are_seeded_and_user_dependent() {
        let a = uniform_mean_rows(6, 12, 42);
        let b = uniform_mean_rows(6, 12, 42);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let runs = figure_runs("fig5", 1, 7).unwrap();
        assert_eq!(runs.len(), 6);
        assert!(runs.iter().all(|r| !r.config.model.is_homogeneous()));
    }
}
