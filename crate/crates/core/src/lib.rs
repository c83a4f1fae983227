//! Discrete-event simulation of underwater acoustic MAC protocols.
//!
//! The crate models a cluster network (several senders around one sink)
//! over a slotted acoustic channel with long propagation delay, RTT jitter
//! and asymmetric per-link loss, and implements a learned access protocol
//! built from per-node deep Q-networks with fairness-aware rewards,
//! aggregated acknowledgements and observation completion, alongside the
//! TDMA, slotted ALOHA, UW-ALOHA-Q and S-FAMA baselines.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod dqn;
pub mod error;
pub mod harness;
pub mod rng;
pub mod sink;
pub mod types;

pub use config::{validate_config, LearningConfig, NetworkConfig, RunConfig};
pub use error::{Error, Result};
pub use types::{propagation_delay, NodeId, Position};

