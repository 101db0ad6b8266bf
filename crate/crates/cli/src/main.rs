//! `mpmab`: run decentralized multi-user channel-selection experiments from
//! a config file, reproduce the canned figure bundles, or validate a config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 replication abort.

mod output;
mod presets;
mod textcfg;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use mpmab_core::runner::{run_experiment, Metric};
use mpmab_core::{AlgorithmSpec, ExperimentConfig};

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "mpmab", version, about = "Decentralized multi-player bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Replication count override.
    #[arg(long)]
    replications: Option<u32>,
    /// Horizon (slots) override.
    #[arg(long)]
    horizon: Option<u64>,
    /// Algorithm override (defaults re-resolved for the new name).
    #[arg(long)]
    algorithm: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores; MPMAB_THREADS as fallback).
    #[arg(long)]
    threads: Option<usize>,
    /// Record a cumulative sample every N slots.
    #[arg(long)]
    downsample: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to the TOML config.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a canned figure bundle (fig2a, fig2b, fig3, fig4, fig5).
    Figures {
        /// Figure name.
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Validate a config and print the resolved parameters without running.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn init_threads(flag: Option<usize>) -> Result<(), String> {
    let n = flag.or_else(|| {
        std::env::var("MPMAB_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    Ok(())
}

fn apply_overrides(cfg: &mut ExperimentConfig, ov: &Overrides) -> Result<(), String> {
    if let Some(seed) = ov.seed {
        cfg.base_seed = seed;
    }
    if let Some(r) = ov.replications {
        cfg.replications = r;
    }
    if let Some(t) = ov.horizon {
        cfg.horizon = t;
        cfg.downsample = (t / 1000).max(1);
    }
    if let Some(d) = ov.downsample {
        cfg.downsample = d.max(1);
    }
    if let Some(name) = &ov.algorithm {
        let k = cfg.model.num_channels();
        cfg.algorithm = AlgorithmSpec::by_name(name, k, cfg.horizon, cfg.initial_users)
            .ok_or_else(|| {
                format!("unknown algorithm `{name}` (valid: {})", AlgorithmSpec::ALL_NAMES.join(", "))
            })?;
    }
    cfg.validate().map_err(|e| e.to_string())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn cmd_run(config: PathBuf, overrides: Overrides) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("cannot read {}: {e}", config.display())),
    };
    let loaded = match textcfg::parse_config(&text) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let mut cfg = loaded.experiment;
    if let Err(e) = apply_overrides(&mut cfg, &overrides) {
        return fail(EXIT_CONFIG, e);
    }
    let out_dir = overrides
        .out
        .or(loaded.out_dir.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = init_threads(overrides.threads) {
        return fail(EXIT_CONFIG, e);
    }

    let started = unix_now();
    let result = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_ABORT, e),
    };
    match output::write_run_outputs(&out_dir, &cfg, &result, started) {
        Ok(paths) => {
            let mut stdout = std::io::stdout().lock();
            for p in paths {
                let _ = writeln!(stdout, "wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_ABORT, format!("writing outputs: {e}")),
    }
}

fn cmd_figures(name: String, overrides: Overrides) -> ExitCode {
    let replications = overrides.replications.unwrap_or(50);
    let seed = overrides.seed.unwrap_or(1);
    let Some(mut runs) = presets::figure_runs(&name, replications, seed) else {
        return fail(
            EXIT_CONFIG,
            format!("unknown figure `{name}` (valid: {})", presets::FIGURE_NAMES.join(", ")),
        );
    };
    if let Err(e) = init_threads(overrides.threads) {
        return fail(EXIT_CONFIG, e);
    }
    let out_dir = overrides.out.unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(EXIT_ABORT, format!("creating {}: {e}", out_dir.display()));
    }

    let metrics = [Metric::PseudoRegret, Metric::RealizedRegret, Metric::Collisions];
    let mut combined = String::from(output::CSV_HEADER);
    combined.push('\n');
    for run in runs.iter_mut() {
        if let Some(t) = overrides.horizon {
            run.config.horizon = t;
            run.config.downsample = (t / 1000).max(1);
        }
        if let Some(d) = overrides.downsample {
            run.config.downsample = d.max(1);
        }
        let started = unix_now();
        eprintln!("running {name}/{} ...", run.label);
        let result = match run_experiment(&run.config) {
            Ok(r) => r,
            Err(e) => return fail(EXIT_ABORT, format!("{name}/{}: {e}", run.label)),
        };
        let csv = output::series_csv(&result, &run.label, &metrics);
        let path = out_dir.join(format!("{name}_{}.csv", run.label));
        if let Err(e) = std::fs::write(&path, &csv) {
            return fail(EXIT_ABORT, format!("writing {}: {e}", path.display()));
        }
        println!("wrote {}", path.display());
        for line in csv.lines().skip(1) {
            combined.push_str(line);
            combined.push('\n');
        }
        // Per-run manifest for exact reproduction of any single curve.
        let sub = out_dir.join(format!("{name}_{}", run.label));
        if let Err(e) = output::write_run_outputs(&sub, &run.config, &result, started) {
            return fail(EXIT_ABORT, format!("writing {}: {e}", sub.display()));
        }
    }
    let combined_path = out_dir.join(format!("{name}_combined.csv"));
    if let Err(e) = std::fs::write(&combined_path, combined) {
        return fail(EXIT_ABORT, format!("writing {}: {e}", combined_path.display()));
    }
    println!("wrote {}", combined_path.display());
    ExitCode::SUCCESS
}

fn cmd_check(config: PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("cannot read {}: {e}", config.display())),
    };
    let loaded = match textcfg::parse_config(&text) {
        Ok(l) => l,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let cfg = loaded.experiment;
    println!("OK");
    println!("resolved configuration:");
    print!("{}", indent(&output::config_toml(&cfg)));
    let user_slots = cfg.horizon as u128
        * cfg.initial_users as u128
        * cfg.replications as u128;
    println!("workload: {} slots x {} replications (~{} user-slot steps)",
        cfg.horizon, cfg.replications, user_slots);
    ExitCode::SUCCESS
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {l}\n")).collect()
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, overrides } => cmd_run(config, overrides),
        Command::Figures { name, overrides } => cmd_figures(name, overrides),
        Command::Check { config } => cmd_check(config),
    }
}
