//! Side-by-side protocol runs on shared channel seeds.

use std::fmt::Write as _;

use serde::Serialize;

use super::eamac::EamacPolicy;
use super::metrics::MetricsReport;
use super::{run_protocol, RunOutput};
use crate::agent::EamacAgent;
use crate::baselines::{MacProtocol, SlottedAloha, Sfama, Tdma, UwAlohaQ};
use crate::config::{ExperimentConfig, NetworkConfig, Protocol};
use crate::error::{Error, Result};

/// Builds a baseline protocol instance. The learned protocol needs trained
/// agents and is built with [`EamacPolicy`] instead.
pub fn baseline(protocol: Protocol, n_senders: usize, exp: &ExperimentConfig, seed: u64) -> Option<Box<dyn MacProtocol>> {
    Some(match protocol {
        Protocol::Eamac => return None,
        Protocol::Tdma => Box::new(Tdma::new(n_senders)),
        Protocol::Aloha => Box::new(SlottedAloha::new(n_senders, exp.aloha_q.unwrap_or(1.0 / n_senders as f64), seed)),
        Protocol::Uwalohaq => Box::new(UwAlohaQ::new(n_senders, n_senders, exp.uwalohaq_alpha, exp.uwalohaq_explore_frames, seed)),
        Protocol::Sfama => Box::new(Sfama::new(n_senders, seed)),
    })
}

/// One evaluation of `protocol` on the channel described by `cfg`.
pub fn run_trial(
    protocol: Protocol,
    cfg: &NetworkConfig,
    exp: &ExperimentConfig,
    steps: usize,
    agents: Option<&[EamacAgent]>,
) -> Result<RunOutput> {
    let control_loss = if protocol == Protocol::Sfama { exp.sfama_control_loss } else { 0.0 };
    let out = match baseline(protocol, cfg.n_senders, exp, cfg.seed) {
        Some(mut p) => run_protocol(p.as_mut(), cfg, steps, control_loss),
        None => {
            let agents = agents.ok_or_else(|| Error::Other("the learned protocol needs trained agents".into()))?;
            if agents.len() != cfg.n_senders {
                return Err(Error::ArityMismatch { expected: cfg.n_senders, found: agents.len() });
            }
            let mut p = EamacPolicy::new(agents.to_vec(), exp.completion);
            run_protocol(&mut p, cfg, steps, control_loss)
        }
    };
    out.report.check()?;
    Ok(out)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let (mean, std) = mean_std(xs);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub protocol: String,
    pub seeds: Vec<u64>,
    /// Per-node transmission counts.
    pub tc: Vec<Stat>,
    pub rac: Vec<Stat>,
    pub rdc: Stat,
    pub collisions: Stat,
    pub jain: Stat,
}

impl CompareRow {
    pub fn from_reports(protocol: &str, reports: &[MetricsReport]) -> Self {
        let n = reports.first().map_or(0, |r| r.n_senders());
        let col = |f: &dyn Fn(&MetricsReport) -> f64| Stat::of(&reports.iter().map(f).collect::<Vec<_>>());
        Self {
            protocol: protocol.to_string(),
            seeds: reports.iter().map(|r| r.seed).collect(),
            tc: (0..n).map(|i| col(&|r| r.tc[i] as f64)).collect(),
            rac: (0..n).map(|i| col(&|r| r.rac[i] as f64)).collect(),
            rdc: col(&|r| r.rdc as f64),
            collisions: col(&|r| r.collisions as f64),
            jain: col(&|r| r.jain),
        }
    }
}

pub fn rows_to_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("protocol,metric,node,mean,std\n");
    for r in rows {
        for (i, st) in r.tc.iter().enumerate() {
            writeln!(s, "{},tc,{i},{},{}", r.protocol, st.mean, st.std).expect("string write");
        }
        for (i, st) in r.rac.iter().enumerate() {
            writeln!(s, "{},rac,{i},{},{}", r.protocol, st.mean, st.std).expect("string write");
        }
        for (name, st) in [("rdc", r.rdc), ("collisions", r.collisions), ("jain", r.jain)] {
            writeln!(s, "{},{name},,{},{}", r.protocol, st.mean, st.std).expect("string write");
        }
    }
    s
}

/// Fixed-width text table, one row per protocol.
pub fn render_table(rows: &[CompareRow]) -> String {
    let fmt = |st: &Stat| format!("{:.1}±{:.1}", st.mean, st.std);
    let mut s = format!("{:<10} {:<40} {:<40} {:>12} {:>12} {:>11}\n", "protocol", "TC", "RAC", "RDC", "collisions", "jain");
    for r in rows {
        let tc = r.tc.iter().map(fmt).collect::<Vec<_>>().join(" ");
        let rac = r.rac.iter().map(fmt).collect::<Vec<_>>().join(" ");
        writeln!(
            s,
            "{:<10} {:<40} {:<40} {:>12} {:>12} {:>11}",
            r.protocol,
            tc,
            rac,
            fmt(&r.rdc),
            fmt(&r.collisions),
            format!("{:.3}±{:.3}", r.jain.mean, r.jain.std)
        )
        .expect("string write");
    }
    s
}
