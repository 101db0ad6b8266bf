//! Browser demo bindings: run small seeded experiments and explore the
//! per-slot channel occupancy interactively from a static page.
//!
//! Three operations are exposed to JavaScript, all JSON-in / JSON-out:
//! regret/collision curves for a set of algorithms, a slot-by-slot stepper
//! over one replication, and the max-weight channel assignment for an
//! editable mean matrix.
//!
//! Build with `wasm-pack build crates/demo --target web` and serve `www/`.

use mpmab_core::allocation::hungarian;
use mpmab_core::env::{draw_slot, oracle_slot_value, resolve_slot};
use mpmab_core::policies::{build_policy, EntryMode, Policy};
use mpmab_core::radio::observe;
use mpmab_core::runner::{run_experiment, user_seed, Metric, Statistic};
use mpmab_core::{AlgorithmSpec, ChannelModel, ExperimentConfig, RadioCapability};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

fn default_means() -> Vec<f64> {
    vec![0.29, 0.36, 0.43, 0.50, 0.57, 0.64, 0.71, 0.78]
}

#[derive(Deserialize)]
struct CurveRequest {
    algorithms: Vec<String>,
    #[serde(default = "default_users")]
    users: usize,
    #[serde(default = "default_horizon")]
    horizon: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_reps")]
    replications: u32,
    #[serde(default)]
    means: Option<Vec<f64>>,
}

fn default_users() -> usize {
    4
}
fn default_horizon() -> u64 {
    20_000
}
fn default_reps() -> u32 {
    5
}

#[derive(Serialize)]
struct CurveResponse {
    slots: Vec<u64>,
    curves: Vec<Curve>,
}

#[derive(Serialize)]
struct Curve {
    algorithm: String,
    median_regret: Vec<f64>,
    median_collisions: Vec<f64>,
}

fn build_config(
    name: &str,
    means: Vec<f64>,
    users: usize,
    horizon: u64,
    seed: u64,
) -> Result<ExperimentConfig, String> {
    let k = means.len();
    let algorithm = AlgorithmSpec::by_name(name, k, horizon, users)
        .ok_or_else(|| format!("unknown algorithm `{name}`"))?;
    let model = ChannelModel::homogeneous(means).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::new(model, algorithm, users, horizon).with_seed(seed);
    cfg.downsample = (horizon / 400).max(1);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Aggregate regret and collision curves for a set of algorithms on the same
/// seeded environment. Input and output are JSON strings.
#[wasm_bindgen]
pub fn run_regret_curves(request_json: &str) -> Result<String, JsError> {
    curves_json(request_json).map_err(|e| JsError::new(&e))
}

pub fn curves_json(request_json: &str) -> Result<String, String> {
    let req: CurveRequest = serde_json::from_str(request_json).map_err(|e| e.to_string())?;
    let horizon = req.horizon.clamp(1_000, 200_000);
    let replications = req.replications.clamp(1, 20);
    let means = req.means.unwrap_or_else(default_means);
    let mut response =
        CurveResponse { slots: Vec::new(), curves: Vec::with_capacity(req.algorithms.len()) };
    for name in &req.algorithms {
        let cfg = build_config(name, means.clone(), req.users, horizon, req.seed)?
            .with_replications(replications);
        let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
        if response.slots.is_empty() {
            response.slots = result.slots();
        }
        response.curves.push(Curve {
            algorithm: name.clone(),
            median_regret: result.curve(Metric::PseudoRegret, Statistic::Median),
            median_collisions: result.curve(Metric::Collisions, Statistic::Median),
        });
    }
    serde_json::to_string(&response).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct StepFrame {
    t: u64,
    /// Channel each user transmitted on this slot (null while sensing/idle).
    channels: Vec<Option<usize>>,
    /// Whether each user's transmission collided.
    collided: Vec<bool>,
    /// Channels carrying a collision this slot.
    collision_channels: Vec<usize>,
    cumulative_regret: f64,
}

/// One replication driven slot by slot: the page animates who sits where,
/// where collisions burn slots, and how the regret accumulates.
#[wasm_bindgen]
pub struct SlotStepper {
    model: ChannelModel,
    policies: Vec<Box<dyn Policy>>,
    env_rng: ChaCha8Rng,
    oracle: f64,
    t: u64,
    cumulative_regret: f64,
}

#[wasm_bindgen]
impl SlotStepper {
    #[wasm_bindgen(constructor)]
    pub fn new(request_json: &str) -> Result<SlotStepper, JsError> {
        Self::from_json(request_json).map_err(|e| JsError::new(&e))
    }

    /// Advance `n` slots and return their frames as JSON.
    pub fn step(&mut self, n: u32) -> Result<String, JsError> {
        self.step_json(n).map_err(|e| JsError::new(&e))
    }

    pub fn num_channels(&self) -> usize {
        self.model.num_channels()
    }
}

impl SlotStepper {
    pub fn from_json(request_json: &str) -> Result<SlotStepper, String> {
        #[derive(Deserialize)]
        struct StepRequest {
            algorithm: String,
            #[serde(default = "default_users")]
            users: usize,
            #[serde(default)]
            seed: u64,
            #[serde(default)]
            means: Option<Vec<f64>>,
        }
        let req: StepRequest =
            serde_json::from_str(request_json).map_err(|e| e.to_string())?;
        let means = req.means.unwrap_or_else(default_means);
        let cfg = build_config(&req.algorithm, means, req.users, 1_000_000, req.seed)?;
        let k = cfg.model.num_channels();
        let policies = (0..req.users)
            .map(|u| {
                build_policy(
                    &cfg.algorithm,
                    k,
                    cfg.horizon,
                    user_seed(cfg.base_seed, 0, u),
                    0,
                    EntryMode::Initial,
                )
            })
            .collect();
        let oracle = oracle_slot_value(&cfg.model, req.users, 0);
        Ok(SlotStepper {
            env_rng: ChaCha8Rng::seed_from_u64(cfg.base_seed),
            model: cfg.model,
            policies,
            oracle,
            t: 0,
            cumulative_regret: 0.0,
        })
    }

    pub fn step_json(&mut self, n: u32) -> Result<String, String> {
        let mut frames = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let actions: Vec<_> = self
                .policies
                .iter_mut()
                .enumerate()
                .map(|(u, p)| (u, p.act(self.t)))
                .collect();
            let draws = draw_slot(&self.model, self.t, &mut self.env_rng);
            let ground = resolve_slot(&self.model, &draws, self.t, &actions, &mut self.env_rng)
                .map_err(|e| e.to_string())?;
            self.cumulative_regret +=
                mpmab_core::allocation::pseudo_regret_step(self.oracle, &ground, &self.model);
            frames.push(StepFrame {
                t: self.t,
                channels: ground
                    .outcomes
                    .iter()
                    .map(|o| o.action.transmit_channel())
                    .collect(),
                collided: ground.outcomes.iter().map(|o| o.collided).collect(),
                collision_channels: ground.collision_channels.clone(),
                cumulative_regret: self.cumulative_regret,
            });
            for (u, p) in self.policies.iter_mut().enumerate() {
                p.update(&observe(RadioCapability::TYPE2_NB, &ground, u));
            }
            self.t += 1;
        }
        serde_json::to_string(&frames).map_err(|e| e.to_string())
    }
}

/// Max-weight channel assignment for a user-by-channel mean matrix.
/// Input: JSON array of rows. Output: `{ assignment: [...], value: ... }`.
#[wasm_bindgen]
pub fn matching_demo(rows_json: &str) -> Result<String, JsError> {
    matching_json(rows_json).map_err(|e| JsError::new(&e))
}

pub fn matching_json(rows_json: &str) -> Result<String, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(rows_json).map_err(|e| e.to_string())?;
    let assignment = hungarian(&rows).map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct MatchResponse {
        assignment: Vec<usize>,
        value: f64,
    }
    let resp =
        MatchResponse { assignment: assignment.channel_of_user.clone(), value: assignment.value };
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}
