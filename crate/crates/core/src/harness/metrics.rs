use serde::Serialize;

use super::sim::SlotResult;
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::types::NodeId;

/// `(sum x)^2 / (n * sum x^2)`; an all-zero vector counts as perfectly fair.
pub fn jain_index(x: &[f64]) -> f64 {
    assert!(!x.is_empty(), "Jain index of an empty vector");
    let sum: f64 = x.iter().sum();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        1.0
    } else {
        sum * sum / (x.len() as f64 * sq)
    }
}

/// Moving-average summary of the tail of a reward curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    /// Mean of the moving averages over the tail.
    pub mean: f64,
    /// `(max - min) / |mean|` of the moving averages over the tail.
    pub spread: f64,
}

impl Plateau {
    /// Moving averages of `window` episodes ending in the final `fraction`
    /// of `rewards`. `None` when the curve is shorter than one window.
    pub fn of(rewards: &[f64], window: usize, fraction: f64) -> Option<Self> {
        if window == 0 || rewards.len() < window {
            return None;
        }
        let tail = (rewards.len() as f64 * fraction).ceil() as usize;
        let first = (rewards.len() - tail.min(rewards.len())).max(window - 1);
        let ma: Vec<f64> = (first..rewards.len()).map(|i| rewards[i + 1 - window..=i].iter().sum::<f64>() / window as f64).collect();
        let mean = ma.iter().sum::<f64>() / ma.len() as f64;
        let (lo, hi) = ma.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        Some(Self { mean, spread: (hi - lo) / mean.abs() })
    }

    pub fn is_flat(&self, tolerance: f64) -> bool {
        self.spread < tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub protocol: String,
    pub seed: u64,
    pub steps: usize,
    pub tc: Vec<u64>,
    pub rac: Vec<u64>,
    pub rdc: u64,
    pub collisions: u64,
    pub silence: Vec<u64>,
    pub energy_j: Vec<f64>,
    pub jain: f64,
    pub episode_rewards: Vec<f64>,
}

impl MetricsReport {
    pub fn n_senders(&self) -> usize {
        self.tc.len()
    }

    pub fn total_tc(&self) -> u64 {
        self.tc.iter().sum()
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Other(format!("inconsistent metrics: {m}")));
        if self.rdc > self.total_tc() {
            return bad(format!("RDC {} exceeds total TC {}", self.rdc, self.total_tc()));
        }
        if let Some(i) = (0..self.tc.len()).find(|&i| self.rac[i] > self.tc[i]) {
            return bad(format!("node {i} RAC {} exceeds TC {}", self.rac[i], self.tc[i]));
        }
        let n = self.tc.len() as f64;
        if !(1.0 / n - 1e-12..=1.0 + 1e-12).contains(&self.jain) {
            return bad(format!("Jain index {} outside [1/n, 1]", self.jain));
        }
        Ok(())
    }

    /// Per-node CSV: `node,tc,rac,slot_count,silence,energy`, preceded by a
    /// comment line carrying the protocol and seed.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# protocol={} seed={} rdc={} collisions={}\n", self.protocol, self.seed, self.rdc, self.collisions);
        s.push_str("node,tc,rac,slot_count,silence,energy\n");
        for i in 0..self.tc.len() {
            s.push_str(&format!("{},{},{},{},{},{}\n", i, self.tc[i], self.rac[i], self.steps, self.silence[i], self.energy_j[i]));
        }
        s
    }
}

/// Per-slot tally that turns slot results into a [`MetricsReport`].
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    tc: Vec<u64>,
    rac: Vec<u64>,
    silence: Vec<u64>,
    rdc: u64,
    collisions: u64,
    steps: usize,
    /// Slot-by-node transmission raster, 1 = data frame sent.
    pub raster: Vec<Vec<u8>>,
}

impl MetricsAccumulator {
    pub fn new(n_senders: usize) -> Self {
        Self {
            tc: vec![0; n_senders],
            rac: vec![0; n_senders],
            silence: vec![0; n_senders],
            rdc: 0,
            collisions: 0,
            steps: 0,
            raster: Vec::new(),
        }
    }

    /// `data_tx[i]` is the sequence number of sender `i`'s data frame in this
    /// slot, if it sent one.
    pub fn record(&mut self, data_tx: &[Option<u32>], silent: &[bool], res: &SlotResult) {
        self.steps += 1;
        let mut row = vec![0u8; self.tc.len()];
        for (i, tx) in data_tx.iter().enumerate() {
            if let Some(seq) = tx {
                self.tc[i] += 1;
                row[i] = 1;
                let acked = res.inputs[i]
                    .ack
                    .as_ref()
                    .filter(|a| a.slot_index == res.slot)
                    .and_then(|a| a.find(NodeId::sender(i)))
                    .is_some_and(|c| c.seq == *seq as u16);
                self.rac[i] += acked as u64;
            }
            self.silence[i] += silent[i] as u64;
        }
        self.raster.push(row);
        self.rdc += res.sink_data.len() as u64;
        self.collisions += res.data_collisions as u64;
    }

    pub fn finish(self, protocol: &str, seed: u64, cfg: &NetworkConfig) -> MetricsReport {
        let per_tx = cfg.tx_power_w * cfg.tx_delay();
        let tcs: Vec<f64> = self.tc.iter().map(|&t| t as f64).collect();
        MetricsReport {
            protocol: protocol.to_string(),
            seed,
            steps: self.steps,
            energy_j: self.tc.iter().map(|&t| t as f64 * per_tx).collect(),
            jain: jain_index(&tcs),
            tc: self.tc,
            rac: self.rac,
            rdc: self.rdc,
            collisions: self.collisions,
            silence: self.silence,
            episode_rewards: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_of_rising_then_flat_curve() {
        let mut r: Vec<f64> = (0..70).map(|i| i as f64).collect();
        r.extend(std::iter::repeat_n(100.0, 30));
        // Tail starts at episode 70; its moving averages span 83.4 to 100.
        let p = Plateau::of(&r, 10, 0.3).unwrap();
        assert!(!p.is_flat(0.1));
        let flat = Plateau::of(&vec![-20.0; 100], 10, 0.3).unwrap();
        assert_eq!(flat, Plateau { mean: -20.0, spread: 0.0 });
        assert!(flat.is_flat(0.1));
        assert!(Plateau::of(&[1.0; 5], 10, 0.3).is_none());
    }

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[25.0, 25.0, 25.0, 25.0]), 1.0);
        assert_eq!(jain_index(&[100.0, 0.0, 0.0, 0.0]), 0.25);
        let expected = (150.0f64 * 150.0) / (4.0 * (35.0 * 35.0 + 40.0 * 40.0 + 40.0 * 40.0 + 35.0 * 35.0));
        assert_eq!(jain_index(&[35.0, 40.0, 40.0, 35.0]), expected);
        assert!((expected - 0.99557522).abs() < 1e-8);
        assert_eq!(jain_index(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn csv_column_order() {
        let r = MetricsReport {
            protocol: "tdma".into(),
            seed: 7,
            steps: 100,
            tc: vec![25, 25],
            rac: vec![25, 24],
            rdc: 49,
            collisions: 0,
            silence: vec![0, 0],
            energy_j: vec![600.0, 600.0],
            jain: 1.0,
            episode_rewards: vec![],
        };
        r.check().unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# protocol=tdma seed=7 rdc=49 collisions=0");
        assert_eq!(lines[1], "node,tc,rac,slot_count,silence,energy");
        assert_eq!(lines[2], "0,25,25,100,0,600");
    }

    #[test]
    fn inconsistent_report_is_rejected() {
        let r = MetricsReport {
            protocol: "x".into(),
            seed: 0,
            steps: 1,
            tc: vec![1],
            rac: vec![2],
            rdc: 0,
            collisions: 0,
            silence: vec![0],
            energy_j: vec![0.0],
            jain: 1.0,
            episode_rewards: vec![],
        };
        assert!(r.check().is_err());
    }
}
