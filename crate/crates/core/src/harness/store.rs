//! Checkpoint directories and run artifacts on disk.
//!
//! A checkpoint directory holds `node<i>.ckpt` (binary learner state),
//! `histogram<i>.json` (convergence statistics) and `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{ConvergenceHistogram, EamacAgent};
use crate::config::{LearningConfig, RunConfig};
use crate::dqn::{load_checkpoint, save_checkpoint};
use crate::error::{Error, Result};
use crate::types::Position;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_senders: usize,
    pub topology: String,
    pub positions: Vec<Position>,
    pub episodes: usize,
    pub artifacts: Vec<String>,
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    write_bytes(&dir.join(name), contents.as_bytes())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(dir, name, &(text + "\n"))
}

/// Writes one checkpoint and one histogram file per agent.
pub fn save_agents(dir: &Path, agents: &[EamacAgent]) -> Result<Vec<String>> {
    ensure_dir(dir)?;
    let mut names = Vec::new();
    for a in agents {
        let ckpt = format!("node{}.ckpt", a.id);
        write_bytes(&dir.join(&ckpt), &save_checkpoint(&a.learner))?;
        let hist = format!("histogram{}.json", a.id);
        write_json(dir, &hist, &a.histogram)?;
        names.push(ckpt);
        names.push(hist);
    }
    Ok(names)
}

/// Restores agents from `dir`. The directory must hold exactly
/// `n_senders` node checkpoints whose input width matches the observation.
pub fn load_agents(dir: &Path, n_senders: usize, lrn: &LearningConfig, seed: u64) -> Result<Vec<EamacAgent>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = 0;
    for e in entries {
        let e = e.map_err(|err| Error::io(dir, err))?;
        let name = e.file_name().to_string_lossy().into_owned();
        if name.starts_with("node") && name.ends_with(".ckpt") {
            found += 1;
        }
    }
    if found != n_senders {
        return Err(Error::ArityMismatch { expected: n_senders, found });
    }
    let expected_dim = lrn.window_m * crate::agent::SlotObservation::width(n_senders);
    let mut agents = Vec::with_capacity(n_senders);
    for i in 0..n_senders {
        let path = dir.join(format!("node{i}.ckpt"));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let learner = load_checkpoint(&bytes, lrn)?;
        if learner.online.input_dim() != expected_dim {
            return Err(Error::Checkpoint(format!(
                "{} expects {} inputs, the configured observation has {expected_dim}",
                path.display(),
                learner.online.input_dim()
            )));
        }
        let mut agent = EamacAgent::with_learner(i, n_senders, lrn, seed, learner);
        let hpath = dir.join(format!("histogram{i}.json"));
        if hpath.exists() {
            let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
            let hist: ConvergenceHistogram = serde_json::from_str(&text)?;
            if hist.n_senders != n_senders {
                return Err(Error::Checkpoint(format!("{} covers {} senders", hpath.display(), hist.n_senders)));
            }
            agent.histogram = hist;
        }
        agents.push(agent);
    }
    Ok(agents)
}

/// Copy of the effective configuration, stored beside the artifacts.
pub fn write_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    write_text(dir, "config.toml", &cfg.to_toml_string())
}
