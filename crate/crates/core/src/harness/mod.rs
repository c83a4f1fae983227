//! Experiment orchestration: topologies, slot driver, training and
//! evaluation loops, metrics and output files.

pub mod compare;
pub mod eamac;
pub mod metrics;
pub mod plots;
pub mod sim;
pub mod store;
pub mod topology;

pub use metrics::{jain_index, MetricsAccumulator, MetricsReport, Plateau};
pub use sim::{SinkReply, SlotResult, SlotSim};
pub use topology::TopologySpec;

use crate::baselines::MacProtocol;
use crate::config::NetworkConfig;

/// Output of running a protocol for a fixed number of slots.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    /// Slot-by-node transmission raster.
    pub raster: Vec<Vec<u8>>,
    /// Channel event trace as JSON lines.
    pub trace: Vec<u8>,
}

/// Runs `protocol` over a fresh channel built from `cfg` (whose `seed`
/// drives the channel) for `steps` slots. `control_loss` is the extra loss
/// on RTS/CTS frames.
pub fn run_protocol(protocol: &mut dyn MacProtocol, cfg: &NetworkConfig, steps: usize, control_loss: f64) -> RunOutput {
    let n = cfg.n_senders;
    let mut sim = SlotSim::new(cfg).with_trace();
    sim.channel.set_control_loss(control_loss);
    let mut acc = MetricsAccumulator::new(n);
    for _ in 0..steps {
        let slot = sim.next_slot();
        let silent: Vec<bool> = (0..n).map(|i| protocol.is_silent(i)).collect();
        let plan = protocol.plan(slot, sim.slot_end(slot));
        let res = sim.run_slot(plan.frames, plan.reply);
        protocol.observe(&res);
        acc.record(&plan.data_tx, &silent, &res);
    }
    let raster = acc.raster.clone();
    let report = acc.finish(protocol.name(), cfg.seed, cfg);
    let trace = sim.trace.take().map(|t| t.as_bytes().to_vec()).unwrap_or_default();
    RunOutput { report, raster, trace }
}
