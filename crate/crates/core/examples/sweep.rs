//! Quick sweep of final regret / collisions across algorithms, for tuning.

use mpmab_core::runner::{run_experiment, Metric, Statistic};
use mpmab_core::{AlgorithmSpec, ChannelModel, ExperimentConfig};

fn main() {
    let means = vec![0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78];
    let horizon = 100_000;
    let reps = 10;
    let n = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4usize);
    let algos = [
        AlgorithmSpec::mctopm(n),
        AlgorithmSpec::umctopm(),
        AlgorithmSpec::seq_hop(8),
        AlgorithmSpec::musical_chairs(8, horizon),
        AlgorithmSpec::scf(8),
        AlgorithmSpec::tsn(8, horizon),
        AlgorithmSpec::mega(),
    ];
    println!("N={n} T={horizon} R={reps}");
    for algo in algos {
        let model = ChannelModel::homogeneous(means.clone()).unwrap();
        let cfg = ExperimentConfig::new(model, algo.clone(), n, horizon)
            .with_replications(reps)
            .with_seed(2024);
        let start = std::time::Instant::now();
        let res = run_experiment(&cfg).unwrap();
        let med = res.final_stat(Metric::PseudoRegret, Statistic::Median);
        let col = res.final_stat(Metric::Collisions, Statistic::Median);
        let flat_half = res
            .replications
            .iter()
            .filter(|m| m.last_positive_increment_slot.map(|s| s < horizon / 2).unwrap_or(true))
            .count();
        println!(
            "{:<12} median_regret={:>10.1} median_collisions={:>8.0} flat_last_half={}/{} ({:?})",
            cfg.algorithm.name(),
            med,
            col,
            flat_half,
            reps,
            start.elapsed()
        );
    }
}
