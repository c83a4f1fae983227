//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and strings and returns a JSON string.
//! The `*_json` functions hold the logic and also run natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use uwmac::agent::{order_correction, reward, FairnessState, RewardParams};
use uwmac::baselines::{MacProtocol, SlottedAloha, Sfama, Tdma, UwAlohaQ};
use uwmac::channel::{resolve_collisions, RxCandidate};
use uwmac::config::{ExperimentConfig, TopologyKind};
use uwmac::harness::{run_protocol, TopologySpec};
use uwmac::{NetworkConfig, Position};

#[derive(Debug, Serialize)]
pub struct SimSummary {
    pub protocol: String,
    pub seed: u64,
    pub raster: Vec<Vec<u8>>,
    pub tc: Vec<u64>,
    pub rac: Vec<u64>,
    pub rdc: u64,
    pub collisions: u64,
    pub jain: f64,
    /// Sender ranges to the sink in metres.
    pub ranges: Vec<f64>,
}

/// Runs a baseline protocol on a fresh topology.
pub fn simulate_json(
    protocol: &str,
    topology: &str,
    n_senders: usize,
    steps: usize,
    seed: u64,
    data_loss: f64,
    ack_loss: f64,
) -> Result<SimSummary, String> {
    if !(1..=16).contains(&n_senders) {
        return Err("n_senders must be between 1 and 16".into());
    }
    if steps > 5000 {
        return Err("at most 5000 steps".into());
    }
    if !(0.0..=1.0).contains(&data_loss) || !(0.0..=1.0).contains(&ack_loss) {
        return Err("loss probabilities must lie in [0, 1]".into());
    }
    let kind = match topology {
        "equidistant" => TopologyKind::Equidistant,
        "nonequidistant" => TopologyKind::Nonequidistant,
        other => return Err(format!("unknown topology `{other}`")),
    };
    let exp = ExperimentConfig { topology: kind, ..Default::default() };
    let mut cfg = NetworkConfig { n_senders, seed, ..Default::default() };
    cfg.positions = TopologySpec::from_experiment(&exp, &cfg, seed).positions();
    cfg.set_uniform_loss(data_loss, ack_loss);
    let mut p: Box<dyn MacProtocol> = match protocol {
        "tdma" => Box::new(Tdma::new(n_senders)),
        "aloha" => Box::new(SlottedAloha::new(n_senders, 1.0 / n_senders as f64, seed)),
        "uwalohaq" => Box::new(UwAlohaQ::new(n_senders, n_senders, exp.uwalohaq_alpha, exp.uwalohaq_explore_frames, seed)),
        "sfama" => Box::new(Sfama::new(n_senders, seed)),
        other => return Err(format!("unknown protocol `{other}`")),
    };
    let run = run_protocol(p.as_mut(), &cfg, steps, 0.0);
    let sink = cfg.positions[n_senders];
    let r = run.report;
    Ok(SimSummary {
        protocol: r.protocol,
        seed,
        raster: run.raster,
        tc: r.tc,
        rac: r.rac,
        rdc: r.rdc,
        collisions: r.collisions,
        jain: r.jain,
        ranges: cfg.positions[..n_senders].iter().map(|p| p.distance(&sink)).collect(),
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct RewardStep {
    pub action: u8,
    pub ack: bool,
    pub f: f64,
    pub c: f64,
    pub reward: f64,
}

/// Replays one sender's action/ACK sequence through the fairness penalty
/// and reward. `actions` and `acks` are strings of `0`/`1`; `phi` is the
/// sender's queue position, `n_concurrent` the confirmed senders per slot.
pub fn reward_trace_json(
    actions: &str,
    acks: &str,
    n_senders: usize,
    n_concurrent: u32,
    phi: usize,
    p_base: f64,
) -> Result<Vec<RewardStep>, String> {
    let bits = |s: &str| -> Result<Vec<u8>, String> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(format!("unexpected `{other}`, use 0 and 1")),
            })
            .collect()
    };
    let a = bits(actions)?;
    let k = bits(acks)?;
    if a.len() != k.len() {
        return Err("actions and acks must have the same length".into());
    }
    if n_senders == 0 {
        return Err("n_senders must be positive".into());
    }
    let params = RewardParams { r_s: 1.0, r_p: -1.0, p_base, w_order: 1.0 / (2.0 * n_senders as f64) };
    let mut state = FairnessState::new(a.len());
    Ok(a.iter()
        .zip(&k)
        .map(|(&action, &ack)| {
            let ack = action == 1 && ack == 1;
            let f = state.step(action, n_concurrent, p_base);
            let c = order_correction(action, ack, phi, params.w_order);
            RewardStep { action, ack, f, c, reward: reward(action, ack, f, c, &params) }
        })
        .collect())
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Arrival {
    pub sender: usize,
    pub start: f64,
    pub end: f64,
    pub outcome: &'static str,
}

#[derive(Debug, Serialize)]
pub struct TimingSummary {
    pub arrivals: Vec<Arrival>,
    pub ack_offset: f64,
}

/// Arrival windows at the sink for senders at `ranges_m` that start
/// transmitting at `offsets_s` into the slot, without jitter.
pub fn collision_timing_json(ranges_m: &[f64], offsets_s: &[f64]) -> Result<TimingSummary, String> {
    if ranges_m.len() != offsets_s.len() || ranges_m.is_empty() {
        return Err("give one offset per range".into());
    }
    if ranges_m.iter().chain(offsets_s).any(|x| !x.is_finite() || *x < 0.0) {
        return Err("ranges and offsets must be non-negative".into());
    }
    let n = ranges_m.len();
    let mut positions: Vec<Position> = ranges_m
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let a = i as f64 * std::f64::consts::TAU / n as f64;
            Position::new(r * a.cos(), r * a.sin(), 0.0)
        })
        .collect();
    positions.push(Position::default());
    let cfg = NetworkConfig { n_senders: n, positions, ..Default::default() };
    let tx = cfg.tx_delay();
    let cands: Vec<RxCandidate> = (0..n)
        .map(|i| {
            let start = offsets_s[i] + ranges_m[i] / cfg.sound_speed;
            RxCandidate { start, end: start + tx, lost: false }
        })
        .collect();
    let outcomes = resolve_collisions(&cands, &[]);
    Ok(TimingSummary {
        arrivals: cands
            .iter()
            .zip(outcomes)
            .enumerate()
            .map(|(i, (c, o))| Arrival { sender: i, start: c.start, end: c.end, outcome: o.as_str() })
            .collect(),
        ack_offset: cfg.ack_offset(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e)).and_then(|v| serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())))
}

#[wasm_bindgen]
pub fn simulate(
    protocol: &str,
    topology: &str,
    n_senders: usize,
    steps: usize,
    seed: u32,
    data_loss: f64,
    ack_loss: f64,
) -> Result<String, JsError> {
    to_js(simulate_json(protocol, topology, n_senders, steps, seed as u64, data_loss, ack_loss))
}

#[wasm_bindgen]
pub fn reward_trace(
    actions: &str,
    acks: &str,
    n_senders: usize,
    n_concurrent: u32,
    phi: usize,
    p_base: f64,
) -> Result<String, JsError> {
    to_js(reward_trace_json(actions, acks, n_senders, n_concurrent, phi, p_base))
}

#[wasm_bindgen]
pub fn collision_timing(ranges_m: Vec<f64>, offsets_s: Vec<f64>) -> Result<String, JsError> {
    to_js(collision_timing_json(&ranges_m, &offsets_s))
}
