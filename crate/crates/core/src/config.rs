//! Configuration schema and validation.
//!
//! A run is described by a TOML document with three sections,
//! `[network]`, `[learning]` and `[experiment]`, whose keys are exactly the
//! field names below. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{propagation_delay, NodeId, Position};

/// Margin between the last data arrival at the sink and the aggregated ACK.
pub const ACK_GUARD_S: f64 = 0.1;

/// Per-link delivery ratios from a lake deployment, `[src][dst]` with the
/// sink last. The diagonal is unused.
pub const FIELD_SUCCESS: [[f64; 5]; 5] = [
    [1.00, 0.94, 0.47, 0.89, 0.94],
    [0.95, 1.00, 0.93, 0.30, 0.64],
    [0.69, 0.81, 1.00, 0.42, 0.56],
    [0.24, 0.29, 0.59, 1.00, 0.39],
    [1.00, 0.96, 0.35, 1.00, 1.00],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_senders: usize,
    /// Sender positions followed by the sink position. Left empty in a
    /// config file, it is filled by the topology generator.
    pub positions: Vec<Position>,
    pub sound_speed: f64,
    pub slot_length_s: f64,
    pub packet_bytes: u32,
    pub bitrate_bps: f64,
    pub tx_power_w: f64,
    pub turnaround_s: f64,
    /// `loss_matrix[src][dst]`, indexed like [`NodeId::matrix_index`].
    /// Empty means every link is lossless.
    pub loss_matrix: Vec<Vec<f64>>,
    /// Replaces every sink-to-sender entry of the loss matrix when set.
    pub ack_loss_override: Option<f64>,
    pub rtt_jitter_max_s: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_senders: 4,
            positions: Vec::new(),
            sound_speed: 1500.0,
            slot_length_s: 9.0,
            packet_bytes: 10,
            bitrate_bps: 100.0,
            tx_power_w: 30.0,
            turnaround_s: 5.0,
            loss_matrix: Vec::new(),
            ack_loss_override: None,
            rtt_jitter_max_s: 0.2,
            seed: 1,
        }
    }
}

impl NetworkConfig {
    pub fn node_count(&self) -> usize {
        self.n_senders + 1
    }

    pub fn position(&self, node: NodeId) -> Position {
        self.positions[node.matrix_index(self.n_senders)]
    }

    /// Airtime of one frame.
    pub fn tx_delay(&self) -> f64 {
        self.packet_bytes as f64 * 8.0 / self.bitrate_bps
    }

    pub fn delay(&self, a: NodeId, b: NodeId) -> f64 {
        propagation_delay(&self.position(a), &self.position(b), self.sound_speed)
    }

    /// Largest sender-to-sink propagation delay.
    pub fn max_sink_delay(&self) -> f64 {
        (0..self.n_senders)
            .map(|i| self.delay(NodeId::sender(i), NodeId::SINK))
            .fold(0.0, f64::max)
    }

    /// Offset into the slot at which the sink broadcasts its aggregated ACK:
    /// every same-slot data arrival, jitter included, has completed by then.
    pub fn ack_offset(&self) -> f64 {
        (0..self.n_senders)
            .map(|i| self.delay(NodeId::sender(i), NodeId::SINK) + self.tx_delay() + self.rtt_jitter_max_s)
            .fold(0.0, f64::max)
            + ACK_GUARD_S
    }

    /// Effective loss probability of the directed link `src -> dst`.
    pub fn loss(&self, src: NodeId, dst: NodeId) -> f64 {
        if src.is_sink() && !dst.is_sink() {
            if let Some(p) = self.ack_loss_override {
                return p;
            }
        }
        if self.loss_matrix.is_empty() {
            return 0.0;
        }
        let n = self.n_senders;
        self.loss_matrix[src.matrix_index(n)][dst.matrix_index(n)]
    }

    /// Sets a uniform loss scenario: `data_p` on every sender-originated
    /// link, `ack_p` on every sink-to-sender link.
    pub fn set_uniform_loss(&mut self, data_p: f64, ack_p: f64) {
        let m = self.node_count();
        let sink = self.n_senders;
        self.loss_matrix = (0..m)
            .map(|src| {
                (0..m)
                    .map(|dst| match (src == dst, src == sink) {
                        (true, _) => 0.0,
                        (false, true) => ack_p,
                        (false, false) => data_p,
                    })
                    .collect()
            })
            .collect();
        self.ack_loss_override = None;
    }

    /// Sets the loss matrix measured in a four-sender lake deployment
    /// ([`FIELD_SUCCESS`]). Fails unless `n_senders` is 4.
    pub fn set_field_loss(&mut self) -> Result<()> {
        if self.n_senders != 4 {
            return Err(Error::InvalidConfig(vec![Violation::new("n_senders", "the field loss matrix has 4 senders")]));
        }
        self.loss_matrix = FIELD_SUCCESS.iter().map(|row| row.iter().map(|s| 1.0 - s).collect()).collect();
        self.ack_loss_override = None;
        Ok(())
    }

    pub fn lossless(&self) -> Self {
        let mut c = self.clone();
        c.loss_matrix.clear();
        c.ack_loss_override = None;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    /// Fraction of all episodes over which epsilon decays linearly.
    pub decay_fraction: f64,
}

impl EpsilonSchedule {
    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        let span = self.decay_fraction * episodes as f64;
        if span <= 0.0 {
            return self.end;
        }
        let frac = (episode as f64 / span).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub max_steps: usize,
    pub window_m: usize,
    pub gamma: f64,
    pub epsilon_schedule: EpsilonSchedule,
    pub target_sync_period: u64,
    pub replay_capacity: usize,
    pub r_s: f64,
    pub r_p: f64,
    pub p_base: f64,
    /// Order-correction weight; `None` resolves to `1 / (2 n_senders)`.
    pub w_order: Option<f64>,
    pub silence_threshold: u32,
    pub optimizer: OptimizerKind,
    /// Gradient steps are taken every `train_interval` slots.
    pub train_interval: usize,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![128, 256, 128],
            learning_rate: 1e-4,
            batch_size: 256,
            episodes: 1000,
            max_steps: 150,
            window_m: 8,
            gamma: 0.9,
            epsilon_schedule: EpsilonSchedule { start: 1.0, end: 0.05, decay_fraction: 0.6 },
            target_sync_period: 200,
            replay_capacity: 50_000,
            r_s: 1.0,
            r_p: -1.0,
            p_base: 0.1,
            w_order: None,
            silence_threshold: 8,
            optimizer: OptimizerKind::Sgd,
            train_interval: 1,
        }
    }
}

impl LearningConfig {
    pub fn w_order(&self, n_senders: usize) -> f64 {
        self.w_order.unwrap_or(1.0 / (2.0 * n_senders as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Eamac,
    Tdma,
    Aloha,
    Uwalohaq,
    Sfama,
}

impl Protocol {
    pub const ALL: [Protocol; 5] =
        [Protocol::Eamac, Protocol::Tdma, Protocol::Aloha, Protocol::Uwalohaq, Protocol::Sfama];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Eamac => "eamac",
            Protocol::Tdma => "tdma",
            Protocol::Aloha => "aloha",
            Protocol::Uwalohaq => "uwalohaq",
            Protocol::Sfama => "sfama",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Equidistant,
    Nonequidistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub topology: TopologyKind,
    /// Sender-to-sink distance for equidistant layouts.
    pub range_m: f64,
    pub range_min_m: f64,
    pub range_max_m: f64,
    /// Evaluation / comparison length in slots.
    pub steps: usize,
    /// Number of seeded trials in `compare`.
    pub seeds: usize,
    /// Evaluation loss scenario `[data_p, ack_p]`; absent means lossless.
    pub loss: Option<[f64; 2]>,
    pub completion: bool,
    /// Final fraction of training episodes feeding the convergence histograms.
    pub convergence_fraction: f64,
    /// Overheard sender-to-sender frames are lossless while training.
    pub train_lossless: bool,
    pub eval_seed_offset: u64,
    pub aloha_q: Option<f64>,
    pub uwalohaq_alpha: f64,
    /// Frames over which UW-ALOHA-Q exploration decays to zero.
    pub uwalohaq_explore_frames: usize,
    /// Extra loss applied to S-FAMA control frames (RTS/CTS).
    pub sfama_control_loss: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Eamac,
            topology: TopologyKind::Equidistant,
            range_m: 5000.0,
            range_min_m: 1000.0,
            range_max_m: 5000.0,
            steps: 150,
            seeds: 5,
            loss: None,
            completion: true,
            convergence_fraction: 0.2,
            train_lossless: true,
            eval_seed_offset: 1_000_003,
            aloha_q: None,
            uwalohaq_alpha: 0.1,
            uwalohaq_explore_frames: 20,
            sfama_control_loss: 0.0,
        }
    }
}

/// Contents of a config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub learning: LearningConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|source| Error::ConfigParse { path: path.into(), source })
    }
}

/// One broken invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self { field: field.into(), rule: rule.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn is_probability(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

/// Lists every invariant of the two configs that does not hold.
pub fn validate_config(cfg: &NetworkConfig, lrn: &LearningConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = cfg.n_senders;

    if n == 0 || n > 64 {
        out.push(Violation::new("n_senders", "must be between 1 and 64"));
    }
    if cfg.positions.len() != n + 1 {
        out.push(Violation::new(
            "positions",
            format!("expected {} entries (senders then sink), found {}", n + 1, cfg.positions.len()),
        ));
    } else if cfg.positions.iter().any(|p| !p.is_finite()) {
        out.push(Violation::new("positions", "coordinates must be finite"));
    }
    if !(cfg.sound_speed > 0.0 && cfg.sound_speed.is_finite()) {
        out.push(Violation::new("sound_speed", "must be positive"));
    }
    if !(cfg.bitrate_bps > 0.0 && cfg.bitrate_bps.is_finite()) {
        out.push(Violation::new("bitrate_bps", "must be positive"));
    }
    if cfg.packet_bytes == 0 {
        out.push(Violation::new("packet_bytes", "must be positive"));
    }
    if !(cfg.tx_power_w >= 0.0) {
        out.push(Violation::new("tx_power_w", "must be non-negative"));
    }
    if !(cfg.rtt_jitter_max_s >= 0.0) {
        out.push(Violation::new("rtt_jitter_max_s", "must be non-negative"));
    }
    if !cfg.loss_matrix.is_empty() {
        let m = n + 1;
        if cfg.loss_matrix.len() != m || cfg.loss_matrix.iter().any(|row| row.len() != m) {
            out.push(Violation::new("loss_matrix", format!("must be {m}x{m}")));
        }
        if cfg.loss_matrix.iter().flatten().any(|&p| !is_probability(p)) {
            out.push(Violation::new("loss_matrix", "probability out of range"));
        }
    }
    if let Some(p) = cfg.ack_loss_override {
        if !is_probability(p) {
            out.push(Violation::new("ack_loss_override", "probability out of range"));
        }
    }

    let geometry_ok = cfg.positions.len() == n + 1
        && cfg.positions.iter().all(Position::is_finite)
        && cfg.sound_speed > 0.0
        && cfg.bitrate_bps > 0.0;
    if geometry_ok {
        let tx = cfg.tx_delay();
        let prop = cfg.max_sink_delay();
        if !(cfg.slot_length_s > 2.0 * prop + 2.0 * tx) {
            out.push(Violation::new(
                "slot_length_s",
                format!("slot shorter than round trip ({:.3} s needed)", 2.0 * prop + 2.0 * tx),
            ));
        }
        if !(cfg.slot_length_s >= cfg.turnaround_s + tx) {
            out.push(Violation::new("slot_length_s", "shorter than turnaround plus transmission time"));
        }
    }

    if lrn.hidden_sizes.len() != 3 || lrn.hidden_sizes.contains(&0) {
        out.push(Violation::new("hidden_sizes", "must hold exactly 3 positive widths"));
    }
    if !(lrn.learning_rate >= 0.0 && lrn.learning_rate.is_finite()) {
        out.push(Violation::new("learning_rate", "must be finite and non-negative"));
    }
    if lrn.batch_size == 0 {
        out.push(Violation::new("batch_size", "must be positive"));
    }
    if lrn.replay_capacity < lrn.batch_size {
        out.push(Violation::new("replay_capacity", "must be at least batch_size"));
    }
    if lrn.max_steps == 0 {
        out.push(Violation::new("max_steps", "must be positive"));
    }
    if lrn.window_m < 1 {
        out.push(Violation::new("window_m", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&lrn.gamma) {
        out.push(Violation::new("gamma", "must lie in [0, 1)"));
    }
    let eps = lrn.epsilon_schedule;
    if !is_probability(eps.start) || !is_probability(eps.end) || !is_probability(eps.decay_fraction) {
        out.push(Violation::new("epsilon_schedule", "probability out of range"));
    }
    if lrn.target_sync_period == 0 {
        out.push(Violation::new("target_sync_period", "must be positive"));
    }
    if lrn.train_interval == 0 {
        out.push(Violation::new("train_interval", "must be positive"));
    }
    if !(lrn.r_s > 0.0) {
        out.push(Violation::new("r_s", "must be positive"));
    }
    if !(lrn.r_p < 0.0) {
        out.push(Violation::new("r_p", "must be negative"));
    }
    if !(lrn.p_base > 0.0) {
        out.push(Violation::new("p_base", "must be positive"));
    }
    if n > 0 {
        let w = lrn.w_order(n);
        if !(w > 0.0 && w <= 1.0 / n as f64) {
            out.push(Violation::new("w_order", "must lie in (0, 1/n_senders]"));
        }
    }
    out
}

/// Lists every invariant of the experiment section that does not hold.
pub fn validate_experiment(exp: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let positive = |x: f64| x > 0.0 && x.is_finite();
    if !positive(exp.range_m) {
        out.push(Violation::new("range_m", "must be positive"));
    }
    if !(positive(exp.range_min_m) && positive(exp.range_max_m) && exp.range_min_m <= exp.range_max_m) {
        out.push(Violation::new("range_min_m", "need 0 < range_min_m <= range_max_m"));
    }
    if exp.seeds == 0 {
        out.push(Violation::new("seeds", "must be positive"));
    }
    if let Some([d, a]) = exp.loss {
        if !is_probability(d) || !is_probability(a) {
            out.push(Violation::new("loss", "probability out of range"));
        }
    }
    if !is_probability(exp.convergence_fraction) {
        out.push(Violation::new("convergence_fraction", "must lie in [0, 1]"));
    }
    if let Some(q) = exp.aloha_q {
        if !is_probability(q) {
            out.push(Violation::new("aloha_q", "probability out of range"));
        }
    }
    if !(exp.uwalohaq_alpha > 0.0 && exp.uwalohaq_alpha <= 1.0) {
        out.push(Violation::new("uwalohaq_alpha", "must lie in (0, 1]"));
    }
    if !is_probability(exp.sfama_control_loss) {
        out.push(Violation::new("sfama_control_loss", "probability out of range"));
    }
    out
}

impl RunConfig {
    /// All violations across the three sections.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = validate_config(&self.network, &self.learning);
        v.extend(validate_experiment(&self.experiment));
        v
    }
}
