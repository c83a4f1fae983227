use std::f64::consts::TAU;

use rand::Rng;

use crate::config::{ExperimentConfig, NetworkConfig, TopologyKind};
use crate::rng::{streams, SimRng};
use crate::types::Position;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub n_senders: usize,
    /// Fixed range of the equidistant layout.
    pub range_m: f64,
    /// Range interval of the nonequidistant layout.
    pub range_min_m: f64,
    pub range_max_m: f64,
    /// A nonequidistant draw is repeated until its nearest and farthest
    /// senders differ by more than this, so that at least one pair can share
    /// a slot. Zero accepts every draw.
    pub min_spread_m: f64,
    pub seed: u64,
}

impl TopologySpec {
    /// `net` supplies the sender count and the timing that decides which
    /// range differences avoid collisions.
    pub fn from_experiment(exp: &ExperimentConfig, net: &NetworkConfig, seed: u64) -> Self {
        Self {
            kind: exp.topology,
            n_senders: net.n_senders,
            range_m: exp.range_m,
            range_min_m: exp.range_min_m,
            range_max_m: exp.range_max_m,
            min_spread_m: net.sound_speed * (net.tx_delay() + net.rtt_jitter_max_s),
            seed,
        }
    }

    /// Sender positions followed by the sink at the origin.
    ///
    /// Equidistant senders sit evenly spaced on a circle. Nonequidistant
    /// senders get a uniform range and a uniform bearing each; the draw is
    /// repeated while the ranges are too close to allow any concurrency,
    /// unless the interval is too narrow for that.
    pub fn positions(&self) -> Vec<Position> {
        let n = self.n_senders;
        let mut out = Vec::with_capacity(n + 1);
        match self.kind {
            TopologyKind::Equidistant => {
                for i in 0..n {
                    let theta = TAU * i as f64 / n as f64;
                    out.push(Position::new(self.range_m * theta.cos(), self.range_m * theta.sin(), 0.0));
                }
            }
            TopologyKind::Nonequidistant => {
                let mut rng = SimRng::new(self.seed, streams::TOPOLOGY);
                let feasible = n >= 2 && self.range_max_m - self.range_min_m > self.min_spread_m;
                loop {
                    out.clear();
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for _ in 0..n {
                        let r = rng.random_range(self.range_min_m..=self.range_max_m);
                        let theta = rng.random_range(0.0..TAU);
                        out.push(Position::new(r * theta.cos(), r * theta.sin(), 0.0));
                        lo = lo.min(r);
                        hi = hi.max(r);
                    }
                    if !feasible || hi - lo > self.min_spread_m {
                        break;
                    }
                }
            }
        }
        out.push(Position::default());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: TopologyKind, seed: u64) -> TopologySpec {
        TopologySpec { kind, n_senders: 4, range_m: 5000.0, range_min_m: 1000.0, range_max_m: 5000.0, min_spread_m: 1500.0, seed }
    }

    fn ranges(p: &[Position]) -> Vec<f64> {
        p[..p.len() - 1].iter().map(|s| s.distance(&p[p.len() - 1])).collect()
    }

    #[test]
    fn equidistant_ring() {
        let p = spec(TopologyKind::Equidistant, 1).positions();
        assert_eq!(p.len(), 5);
        for s in &p[..4] {
            assert!((s.distance(&p[4]) - 5000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nonequidistant_ranges_and_replay() {
        for seed in 0..50 {
            let p = spec(TopologyKind::Nonequidistant, seed).positions();
            for s in &p[..4] {
                let d = s.distance(&p[4]);
                assert!((1000.0 - 1e-9..=5000.0 + 1e-9).contains(&d), "{d}");
            }
            assert_eq!(p, spec(TopologyKind::Nonequidistant, seed).positions());
        }
        assert_ne!(spec(TopologyKind::Nonequidistant, 1).positions(), spec(TopologyKind::Nonequidistant, 2).positions());
    }

    #[test]
    fn nonequidistant_draws_leave_room_for_concurrency() {
        let mut redrawn = 0;
        for seed in 0..200 {
            let r = ranges(&spec(TopologyKind::Nonequidistant, seed).positions());
            let spread = r.iter().cloned().fold(f64::MIN, f64::max) - r.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread > 1500.0, "seed {seed}: {r:?}");
            let free = TopologySpec { min_spread_m: 0.0, ..spec(TopologyKind::Nonequidistant, seed) }.positions();
            redrawn += (free != spec(TopologyKind::Nonequidistant, seed).positions()) as usize;
        }
        // about 15% of uniform 4-sender draws span less than 1.5 km
        assert!((10..=60).contains(&redrawn), "{redrawn}");
        let narrow = TopologySpec { range_min_m: 1000.0, range_max_m: 2000.0, ..spec(TopologyKind::Nonequidistant, 1) };
        assert_eq!(narrow.positions().len(), 5);
    }

    #[test]
    fn spread_follows_frame_timing() {
        let net = NetworkConfig::default();
        let s = TopologySpec::from_experiment(&ExperimentConfig::default(), &net, 1);
        assert!((s.min_spread_m - 1500.0 * (0.8 + 0.2)).abs() < 1e-9);
        assert_eq!(s.n_senders, 4);
    }
}
