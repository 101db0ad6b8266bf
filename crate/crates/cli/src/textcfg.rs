//! Text config loading: a flat key/value format with section headers (TOML),
//! validated against the known key set with nearest-key suggestions, then
//! materialized into a fully-resolved [`ExperimentConfig`].

use std::fmt::Write as _;

use mpmab_core::config::{
    default_eser_explore, default_l_sh, default_mc_t0, default_t_rh, default_trek_window,
};
use mpmab_core::env::RewardLaw;
use mpmab_core::{
    AlgorithmSpec, ChannelModel, DynamicsEvent, DynamicsSchedule, ExperimentConfig, LeaveTarget,
    RadioCapability,
};
use toml::Value;

#[derive(Debug)]
pub struct ConfigFileError(pub String);

impl std::fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigFileError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigFileError> {
    Err(ConfigFileError(msg.into()))
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn nearest<'a>(key: &str, valid: &[&'a str]) -> Option<&'a str> {
    valid
        .iter()
        .map(|v| (levenshtein(key, v), *v))
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, v)| v)
}

/// Reject unknown keys in `table`, suggesting the closest valid key.
fn check_keys(
    table: &toml::map::Map<String, Value>,
    section: &str,
    valid: &[&str],
) -> Result<(), ConfigFileError> {
    for key in table.keys() {
        if !valid.contains(&key.as_str()) {
            let mut msg = format!("unknown key `{key}` in [{section}]");
            if let Some(s) = nearest(key, valid) {
                let _ = write!(msg, " (did you mean `{s}`?)");
            } else {
                let _ = write!(msg, " (valid keys: {})", valid.join(", "));
            }
            return err(msg);
        }
    }
    Ok(())
}

fn as_table<'v>(
    v: &'v Value,
    section: &str,
) -> Result<&'v toml::map::Map<String, Value>, ConfigFileError> {
    v.as_table().ok_or_else(|| ConfigFileError(format!("[{section}] must be a table")))
}

fn get_u64(t: &toml::map::Map<String, Value>, section: &str, key: &str) -> Result<Option<u64>, ConfigFileError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
        Some(v) => err(format!("[{section}] {key} must be a nonnegative integer, got {v}")),
    }
}

fn get_f64(t: &toml::map::Map<String, Value>, section: &str, key: &str) -> Result<Option<f64>, ConfigFileError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(f)) => Ok(Some(*f)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(v) => err(format!("[{section}] {key} must be a number, got {v}")),
    }
}

fn get_str<'v>(
    t: &'v toml::map::Map<String, Value>,
    section: &str,
    key: &str,
) -> Result<Option<&'v str>, ConfigFileError> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(v) => err(format!("[{section}] {key} must be a string, got {v}")),
    }
}

fn number_vec(v: &Value, what: &str) -> Result<Vec<f64>, ConfigFileError> {
    let arr = v.as_array().ok_or_else(|| ConfigFileError(format!("{what} must be an array")))?;
    arr.iter()
        .map(|x| match x {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => err(format!("{what} entries must be numbers, got {other}")),
        })
        .collect()
}

fn matrix(v: &Value, what: &str) -> Result<Vec<Vec<f64>>, ConfigFileError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ConfigFileError(format!("{what} must be an array of arrays")))?;
    arr.iter().map(|row| number_vec(row, what)).collect()
}

const EXPERIMENT_KEYS: [&str; 6] =
    ["horizon", "replications", "seed", "users", "downsample", "out"];
const ENV_KEYS: [&str; 8] = [
    "channels",
    "means",
    "mean_rows",
    "occupancy",
    "reward_law",
    "uniform_half_width",
    "fade_probability",
    "change",
];
const CHANGE_KEYS: [&str; 3] = ["slot", "means", "mean_rows"];
const RADIO_KEYS: [&str; 1] = ["kind"];
const ALGO_KEYS: [&str; 18] = [
    "name",
    "n_known",
    "ucb_c",
    "t0",
    "t_rh",
    "l_sh",
    "trek_window",
    "probe_period",
    "l_entry",
    "epoch0",
    "l_explore",
    "exploit0",
    "bits",
    "c",
    "d",
    "p0",
    "alpha",
    "beta",
];
const DYNAMICS_KEYS: [&str; 2] = ["max_users", "event"];
const EVENT_KEYS: [&str; 3] = ["slot", "kind", "user"];
const TOP_KEYS: [&str; 7] =
    ["experiment", "env", "radio", "algorithm", "dynamics", "manifest", "outputs"];

/// Everything parsed from a config file, before CLI overrides.
#[derive(Debug)]
pub struct LoadedConfig {
    pub experiment: ExperimentConfig,
    pub out_dir: Option<String>,
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigFileError> {
    let root: toml::Table = text
        .parse()
        .map_err(|e| ConfigFileError(format!("config does not parse as TOML: {e}")))?;
    check_keys(&root, "config root", &TOP_KEYS)?;

    // --- [env] ---
    let env = match root.get("env") {
        Some(v) => as_table(v, "env")?.clone(),
        None => return err("missing [env] section"),
    };
    check_keys(&env, "env", &ENV_KEYS)?;
    let mean_rows: Vec<Vec<f64>> = if let Some(v) = env.get("mean_rows") {
        if env.contains_key("means") {
            return err("[env] give either `means` or `mean_rows`, not both");
        }
        matrix(v, "[env] mean_rows")?
    } else if let Some(v) = env.get("means") {
        vec![number_vec(v, "[env] means")?]
    } else {
        return err("[env] missing key `means` (per-channel mean rates)");
    };
    let k = mean_rows.first().map(|r| r.len()).unwrap_or(0);
    if let Some(ch) = get_u64(&env, "env", "channels")? {
        if ch as usize != k {
            return err(format!("[env] channels = {ch} but means have {k} entries"));
        }
    }
    let occupancy = match env.get("occupancy") {
        Some(v) => number_vec(v, "[env] occupancy")?,
        None => vec![0.0; k],
    };
    let reward_law = match get_str(&env, "env", "reward_law")? {
        None | Some("bernoulli") => RewardLaw::Bernoulli,
        Some("uniform") => {
            let hw = get_f64(&env, "env", "uniform_half_width")?.unwrap_or(0.1);
            RewardLaw::Uniform { half_width: hw }
        }
        Some(other) => {
            return err(format!(
                "[env] reward_law must be `bernoulli` or `uniform`, got `{other}`"
            ))
        }
    };
    let mut model = ChannelModel::new(mean_rows, occupancy, reward_law)
        .map_err(|e| ConfigFileError(format!("[env] invalid channel model: {e}")))?;
    if let Some(p) = get_f64(&env, "env", "fade_probability")? {
        model = model
            .with_fade_probability(p)
            .map_err(|e| ConfigFileError(format!("[env] {e}")))?;
    }
    if let Some(changes) = env.get("change") {
        let arr = changes
            .as_array()
            .ok_or_else(|| ConfigFileError("[[env.change]] must be an array of tables".into()))?;
        let mut points = Vec::new();
        for c in arr {
            let t = as_table(c, "env.change")?;
            check_keys(t, "env.change", &CHANGE_KEYS)?;
            let slot = get_u64(t, "env.change", "slot")?
                .ok_or_else(|| ConfigFileError("[[env.change]] missing `slot`".into()))?;
            let rows = if let Some(v) = t.get("mean_rows") {
                matrix(v, "[[env.change]] mean_rows")?
            } else if let Some(v) = t.get("means") {
                vec![number_vec(v, "[[env.change]] means")?]
            } else {
                return err("[[env.change]] missing `means` or `mean_rows`");
            };
            points.push((slot, rows));
        }
        model = model
            .with_change_points(points)
            .map_err(|e| ConfigFileError(format!("[env] invalid change points: {e}")))?;
    }

    // --- [experiment] ---
    let exp = match root.get("experiment") {
        Some(v) => as_table(v, "experiment")?.clone(),
        None => return err("missing [experiment] section"),
    };
    check_keys(&exp, "experiment", &EXPERIMENT_KEYS)?;
    let horizon = get_u64(&exp, "experiment", "horizon")?
        .ok_or_else(|| ConfigFileError("[experiment] missing key `horizon`".into()))?;
    if horizon == 0 {
        return err("horizon must be >= 1");
    }
    let users = get_u64(&exp, "experiment", "users")?
        .ok_or_else(|| ConfigFileError("[experiment] missing key `users`".into()))?
        as usize;
    let replications = get_u64(&exp, "experiment", "replications")?.unwrap_or(1) as u32;
    let seed = get_u64(&exp, "experiment", "seed")?.unwrap_or(0);
    let downsample = get_u64(&exp, "experiment", "downsample")?.unwrap_or((horizon / 1000).max(1));
    let out_dir = get_str(&exp, "experiment", "out")?.map(|s| s.to_string());

    // --- [radio] ---
    let radio = match root.get("radio") {
        Some(v) => {
            let t = as_table(v, "radio")?;
            check_keys(t, "radio", &RADIO_KEYS)?;
            let kind = get_str(t, "radio", "kind")?.unwrap_or("type2_nb");
            RadioCapability::from_key(kind).ok_or_else(|| {
                ConfigFileError(format!(
                    "[radio] unknown kind `{kind}` (valid: {})",
                    RadioCapability::ALL_KEYS.join(", ")
                ))
            })?
        }
        None => RadioCapability::TYPE2_NB,
    };

    // --- [algorithm] ---
    let algo_table = match root.get("algorithm") {
        Some(v) => as_table(v, "algorithm")?.clone(),
        None => return err("missing [algorithm] section"),
    };
    check_keys(&algo_table, "algorithm", &ALGO_KEYS)?;
    let name = get_str(&algo_table, "algorithm", "name")?
        .ok_or_else(|| ConfigFileError("[algorithm] missing key `name`".into()))?
        .to_string();
    let algorithm = build_algorithm(&name, &algo_table, k, horizon, users)?;

    // --- [dynamics] ---
    let mut dynamics = DynamicsSchedule::empty();
    if let Some(v) = root.get("dynamics") {
        let t = as_table(v, "dynamics")?;
        check_keys(t, "dynamics", &DYNAMICS_KEYS)?;
        dynamics.max_users = get_u64(t, "dynamics", "max_users")?.unwrap_or(0) as usize;
        if let Some(evs) = t.get("event") {
            let arr = evs.as_array().ok_or_else(|| {
                ConfigFileError("[[dynamics.event]] must be an array of tables".into())
            })?;
            for e in arr {
                let et = as_table(e, "dynamics.event")?;
                check_keys(et, "dynamics.event", &EVENT_KEYS)?;
                let slot = get_u64(et, "dynamics.event", "slot")?
                    .ok_or_else(|| ConfigFileError("[[dynamics.event]] missing `slot`".into()))?;
                let kind = get_str(et, "dynamics.event", "kind")?
                    .ok_or_else(|| ConfigFileError("[[dynamics.event]] missing `kind`".into()))?;
                let ev = match kind {
                    "enter" => DynamicsEvent::Enter,
                    "leave" => match et.get("user") {
                        None => DynamicsEvent::Leave(LeaveTarget::Random),
                        Some(Value::String(s)) if s == "random" => {
                            DynamicsEvent::Leave(LeaveTarget::Random)
                        }
                        Some(Value::Integer(id)) if *id >= 0 => {
                            DynamicsEvent::Leave(LeaveTarget::User(*id as usize))
                        }
                        Some(v) => {
                            return err(format!(
                                "[[dynamics.event]] user must be `random` or an id, got {v}"
                            ))
                        }
                    },
                    other => {
                        return err(format!(
                            "[[dynamics.event]] kind must be `enter` or `leave`, got `{other}`"
                        ))
                    }
                };
                dynamics.events.push((slot, ev));
            }
        }
    }

    let mut experiment = ExperimentConfig::new(model, algorithm, users, horizon)
        .with_replications(replications)
        .with_seed(seed)
        .with_dynamics(dynamics);
    experiment.radio = radio;
    experiment.downsample = downsample;
    experiment
        .validate()
        .map_err(|e| ConfigFileError(format!("invalid configuration: {e}")))?;
    Ok(LoadedConfig { experiment, out_dir })
}

/// Build the named algorithm, starting from defaults for (k, horizon, users)
/// and applying any overrides present in the table.
pub fn build_algorithm(
    name: &str,
    t: &toml::map::Map<String, Value>,
    k: usize,
    horizon: u64,
    users: usize,
) -> Result<AlgorithmSpec, ConfigFileError> {
    let sect = "algorithm";
    let u64_or = |key: &str, default: u64| -> Result<u64, ConfigFileError> {
        Ok(get_u64(t, sect, key)?.unwrap_or(default))
    };
    let f64_or = |key: &str, default: f64| -> Result<f64, ConfigFileError> {
        Ok(get_f64(t, sect, key)?.unwrap_or(default))
    };
    let spec = match name {
        "random_hop" => AlgorithmSpec::RandomHop,
        "sh" => AlgorithmSpec::SeqHop { t_rh: u64_or("t_rh", default_t_rh(k))? },
        "rho_rand" => AlgorithmSpec::RhoRand {
            n_known: u64_or("n_known", users as u64)? as usize,
            ucb_c: f64_or("ucb_c", 2.0)?,
        },
        "mctopm" => AlgorithmSpec::McTopM {
            n_known: u64_or("n_known", users as u64)? as usize,
            ucb_c: f64_or("ucb_c", 2.0)?,
        },
        "umctopm" => AlgorithmSpec::UMcTopM { ucb_c: f64_or("ucb_c", 2.0)? },
        "mc" => AlgorithmSpec::MusicalChairs { t0: u64_or("t0", default_mc_t0(k, horizon))? },
        "mega" => AlgorithmSpec::Mega {
            c: f64_or("c", 0.1)?,
            d: f64_or("d", 0.05)?,
            p0: f64_or("p0", 0.6)?,
            alpha: f64_or("alpha", 0.5)?,
            beta: f64_or("beta", 0.8)?,
        },
        "scf" => AlgorithmSpec::Scf {
            t_rh: u64_or("t_rh", default_t_rh(k))?,
            l_sh: u64_or("l_sh", default_l_sh(k))?,
        },
        "tsn" => AlgorithmSpec::Tsn {
            t_rh: u64_or("t_rh", default_t_rh(k))?,
            l_sh: u64_or("l_sh", default_l_sh(k))?,
            trek_window: u64_or("trek_window", default_trek_window(horizon))?,
        },
        "tdn" => AlgorithmSpec::Tdn {
            t_rh: u64_or("t_rh", default_t_rh(k))?,
            l_sh: u64_or("l_sh", default_l_sh(k))?,
            trek_window: u64_or("trek_window", default_trek_window(horizon))?,
            probe_period: u64_or("probe_period", 500)?,
            l_entry: u64_or("l_entry", default_l_sh(k) / 4)?,
        },
        "dmc" => AlgorithmSpec::Dmc {
            t0: u64_or("t0", default_mc_t0(k, horizon))?,
            epoch0: u64_or("epoch0", horizon / 20)?,
        },
        "dscf" => AlgorithmSpec::Dscf {
            t_rh: u64_or("t_rh", default_t_rh(k))?,
            l_sh: u64_or("l_sh", default_l_sh(k))?,
            epoch0: u64_or("epoch0", horizon / 20)?,
        },
        "eser" => {
            let l = default_eser_explore(k, horizon);
            AlgorithmSpec::Eser {
                t_rh: u64_or("t_rh", default_t_rh(k))?,
                l_explore: u64_or("l_explore", l)?,
                exploit0: u64_or("exploit0", 2 * l)?,
                bits: u64_or("bits", 8)? as u8,
            }
        }
        "meser" => {
            let l = default_eser_explore(k, horizon);
            AlgorithmSpec::MEser {
                t_rh: u64_or("t_rh", default_t_rh(k))?,
                l_explore: u64_or("l_explore", l)?,
                exploit0: u64_or("exploit0", 2 * l)?,
            }
        }
        other => {
            let mut msg = format!("[algorithm] unknown name `{other}`");
            if let Some(s) = nearest(other, &AlgorithmSpec::ALL_NAMES) {
                let _ = write!(msg, " (did you mean `{s}`?)");
            } else {
                let _ = write!(msg, " (valid: {})", AlgorithmSpec::ALL_NAMES.join(", "));
            }
            return Err(ConfigFileError(msg));
        }
    };
    Ok(spec)
}
