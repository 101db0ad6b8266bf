//! CSV and manifest emission.
//!
//! Every CSV uses the long-format schema `slot,metric,algorithm,statistic,value`.
//! The manifest echoes the fully-resolved config under the standard section
//! names, so feeding a manifest back to `mpmab run --config` reproduces the
//! run byte-for-byte; a `[manifest]` section carries run metadata and output
//! digests.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mpmab_core::env::RewardLaw;
use mpmab_core::runner::{ExperimentResult, Metric, Statistic};
use mpmab_core::{AlgorithmSpec, DynamicsEvent, ExperimentConfig, LeaveTarget};
use sha2::{Digest, Sha256};

pub const CSV_HEADER: &str = "slot,metric,algorithm,statistic,value";

/// One labelled experiment's rows for a set of metrics.
pub fn series_csv(result: &ExperimentResult, algorithm: &str, metrics: &[Metric]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let slots = result.slots();
    for &metric in metrics {
        for &stat in &Statistic::ALL {
            let curve = result.curve(metric, stat);
            for (slot, value) in slots.iter().zip(curve) {
                let _ = writeln!(
                    out,
                    "{slot},{},{algorithm},{},{value}",
                    metric.name(),
                    stat.name()
                );
            }
        }
    }
    out
}

/// Final-value rows: one per replication plus the aggregate statistics.
pub fn summary_csv(result: &ExperimentResult, algorithm: &str, horizon: u64) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for &metric in &Metric::ALL {
        for (i, v) in result.final_values(metric).iter().enumerate() {
            let _ = writeln!(out, "{horizon},{},{algorithm},rep{i:03},{v}", metric.name());
        }
        for &stat in &Statistic::ALL {
            let _ = writeln!(
                out,
                "{horizon},{},{algorithm},{},{}",
                metric.name(),
                stat.name(),
                result.final_stat(metric, stat)
            );
        }
    }
    out
}

fn toml_f64(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

fn toml_row(row: &[f64]) -> String {
    let items: Vec<String> = row.iter().map(|&x| toml_f64(x)).collect();
    format!("[{}]", items.join(", "))
}

/// Render the resolved config as loadable TOML sections.
pub fn config_toml(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "horizon = {}", cfg.horizon);
    let _ = writeln!(s, "replications = {}", cfg.replications);
    let _ = writeln!(s, "seed = {}", cfg.base_seed);
    let _ = writeln!(s, "users = {}", cfg.initial_users);
    let _ = writeln!(s, "downsample = {}", cfg.downsample);
    let _ = writeln!(s);
    let _ = writeln!(s, "[env]");
    let _ = writeln!(s, "channels = {}", cfg.model.num_channels());
    let rows = cfg.model.means_at(0);
    if rows.len() == 1 {
        let _ = writeln!(s, "means = {}", toml_row(&rows[0]));
    } else {
        let formatted: Vec<String> = rows.iter().map(|r| toml_row(r)).collect();
        let _ = writeln!(s, "mean_rows = [{}]", formatted.join(", "));
    }
    let _ = writeln!(s, "occupancy = {}", toml_row(cfg.model.occupancy()));
    match cfg.model.reward_law() {
        RewardLaw::Bernoulli => {
            let _ = writeln!(s, "reward_law = \"bernoulli\"");
        }
        RewardLaw::Uniform { half_width } => {
            let _ = writeln!(s, "reward_law = \"uniform\"");
            let _ = writeln!(s, "uniform_half_width = {}", toml_f64(half_width));
        }
    }
    if cfg.model.fade_probability() > 0.0 {
        let _ = writeln!(s, "fade_probability = {}", toml_f64(cfg.model.fade_probability()));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[radio]");
    let _ = writeln!(s, "kind = \"{}\"", cfg.radio.key());
    let _ = writeln!(s);
    let _ = writeln!(s, "[algorithm]");
    let _ = writeln!(s, "name = \"{}\"", cfg.algorithm.name());
    match cfg.algorithm {
        AlgorithmSpec::RandomHop => {}
        AlgorithmSpec::SeqHop { t_rh } => {
            let _ = writeln!(s, "t_rh = {t_rh}");
        }
        AlgorithmSpec::RhoRand { n_known, ucb_c } | AlgorithmSpec::McTopM { n_known, ucb_c } => {
            let _ = writeln!(s, "n_known = {n_known}");
            let _ = writeln!(s, "ucb_c = {}", toml_f64(ucb_c));
        }
        AlgorithmSpec::UMcTopM { ucb_c } => {
            let _ = writeln!(s, "ucb_c = {}", toml_f64(ucb_c));
        }
        AlgorithmSpec::MusicalChairs { t0 } => {
            let _ = writeln!(s, "t0 = {t0}");
        }
        AlgorithmSpec::Mega { c, d, p0, alpha, beta } => {
            let _ = writeln!(s, "c = {}", toml_f64(c));
            let _ = writeln!(s, "d = {}", toml_f64(d));
            let _ = writeln!(s, "p0 = {}", toml_f64(p0));
            let _ = writeln!(s, "alpha = {}", toml_f64(alpha));
            let _ = writeln!(s, "beta = {}", toml_f64(beta));
        }
        AlgorithmSpec::Scf { t_rh, l_sh } => {
            let _ = writeln!(s, "t_rh = {t_rh}");
            let _ = writeln!(s, "l_sh = {l_sh}");
        }
        AlgorithmSpec::Tsn { t_rh, l_sh, trek_window } => {
            let _ = writeln!(s, "t_rh = {t_rh}");
            let _ = writeln!(s, "l_sh = {l_sh}");
            let _ = writeln!(s, "trek_window = {trek_window}");
        }
        AlgorithmSpec::Tdn { t_rh, l_sh, trek_window, probe_period, l_entry } => {
            let _ = writeln!(s, "t_rh = {t_rh}");
            let _ = writeln!(s, "l_sh = {l_sh}");
            let _ = writeln!(s, "trek_window = {trek_window}");
            let _ = writeln!(s, "probe_period = {probe_period}");
            let _ = writeln!(s, "l_entry = {l_entry}");
        }
        AlgorithmSpec::Dmc { t0, epoch0 } => {
            let _ = writeln!(s, "t0 = {t0}");
            let _ = writeln!(s, "epoch0 = {epoch0}");
        }
        AlgorithmSpec::Dscf { t_rh, l_sh, epoch0 } => {
            let _ = writeln!(s, "t_rh = {t_rh}");
            let _ = writeln!(s, "l_sh = {l_sh}");
            let _ = writeln!(s, "epoch0 = {epoch0}");
        }
        AlgorithmSpec::Eser { t_rh, l_explore, exploit0, bits } => {
            let _ = writeln!(s, "t_rh = {t_rh}");
            let _ = writeln!(s, "l_explore = {l_explore}");
            let _ = writeln!(s, "exploit0 = {exploit0}");
            let _ = writeln!(s, "bits = {bits}");
        }
        AlgorithmSpec::MEser { t_rh, l_explore, exploit0 } => {
            let _ = writeln!(s, "t_rh = {t_rh}");
            let _ = writeln!(s, "l_explore = {l_explore}");
            let _ = writeln!(s, "exploit0 = {exploit0}");
        }
    }
    if !cfg.dynamics.events.is_empty() || cfg.dynamics.max_users > 0 {
        let _ = writeln!(s);
        let _ = writeln!(s, "[dynamics]");
        let _ = writeln!(s, "max_users = {}", cfg.dynamics.max_users);
        for (slot, ev) in &cfg.dynamics.events {
            let _ = writeln!(s);
            let _ = writeln!(s, "[[dynamics.event]]");
            let _ = writeln!(s, "slot = {slot}");
            match ev {
                DynamicsEvent::Enter => {
                    let _ = writeln!(s, "kind = \"enter\"");
                }
                DynamicsEvent::Leave(LeaveTarget::Random) => {
                    let _ = writeln!(s, "kind = \"leave\"");
                    let _ = writeln!(s, "user = \"random\"");
                }
                DynamicsEvent::Leave(LeaveTarget::User(id)) => {
                    let _ = writeln!(s, "kind = \"leave\"");
                    let _ = writeln!(s, "user = {id}");
                }
            }
        }
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Write one experiment's outputs into `dir`. Returns the written paths.
pub fn write_run_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    result: &ExperimentResult,
    started_unix: u64,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let algorithm = cfg.algorithm.name();
    let files = [
        (
            "regret.csv",
            series_csv(result, algorithm, &[Metric::PseudoRegret, Metric::RealizedRegret]),
        ),
        (
            "collisions.csv",
            series_csv(result, algorithm, &[Metric::Collisions, Metric::PuInterference]),
        ),
        ("summary.csv", summary_csv(result, algorithm, cfg.horizon)),
    ];
    let mut written = Vec::new();
    let mut digests = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        fs::write(&path, &content)?;
        digests.push((name.to_string(), sha256_hex(content.as_bytes())));
        written.push(path);
    }

    let mut manifest = String::new();
    let _ = writeln!(manifest, "[manifest]");
    let _ = writeln!(manifest, "tool = \"mpmab {}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(manifest, "seed = {}", cfg.base_seed);
    let _ = writeln!(manifest, "started_unix = {started_unix}");
    let _ = writeln!(manifest, "finished_unix = {}", unix_now());
    let _ = writeln!(
        manifest,
        "note = \"oracle and regret both discount channel means by their PU vacancy (1 - occupancy)\""
    );
    let _ = writeln!(manifest);
    let _ = writeln!(manifest, "[outputs]");
    for (name, digest) in &digests {
        let _ = writeln!(manifest, "\"{name}\" = \"sha256:{digest}\"");
    }
    let _ = writeln!(manifest);
    manifest.push_str(&config_toml(cfg));
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mpmab_core::runner::run_experiment;
    use mpmab_core::ChannelModel;

    fn tiny_result() -> (ExperimentConfig, ExperimentResult) {
        let model = ChannelModel::homogeneous(vec![0.3, 0.7]).unwrap();
        let cfg = ExperimentConfig::new(model, AlgorithmSpec::random_hop(), 1, 100)
            .with_replications(3)
            .with_seed(5);
        let res = run_experiment(&cfg).unwrap();
        (cfg, res)
    }

    #[test]
    fn csv_schema_is_the_five_column_long_format() {
        let (_, res) = tiny_result();
        let csv = series_csv(&res, "random_hop", &[Metric::PseudoRegret]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "slot,metric,algorithm,statistic,value");
        for line in lines {
            assert_eq!(line.split(',').count(), 5, "bad row: {line}");
        }
    }

    #[test]
    fn manifest_config_echo_reparses_to_the_same_config() {
        let (cfg, _) = tiny_result();
        let text = config_toml(&cfg);
        let reparsed = crate::textcfg::parse_config(&text).unwrap().experiment;
        assert_eq!(reparsed.horizon, cfg.horizon);
        assert_eq!(reparsed.base_seed, cfg.base_seed);
        assert_eq!(reparsed.algorithm, cfg.algorithm);
        assert_eq!(reparsed.downsample, cfg.downsample);
    }

    #[test]
    fn digests_are_stable_for_identical_content() {
        assert_eq!(sha256_hex(b"abc").len(), 64);
        assert_eq!(sha256_hex(b"abc"), sha256_hex(b"abc"));
        assert_ne!(sha256_hex(b"abc"), sha256_hex(b"abd"));
    }
}
