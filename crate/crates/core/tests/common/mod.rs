//! Brute-force oracles shared by the oracle and acceptance suites. Each
//! returns a mismatch count or worst error instead of asserting.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;

use uwmac::agent::ConvergenceHistogram;
use uwmac::channel::{resolve_collisions, Channel, EventKind, RxCandidate, RxOutcome};
use uwmac::dqn::QNetwork;
use uwmac::harness::sim::data_frame;
use uwmac::rng::SimRng;
use uwmac::{NetworkConfig, NodeId, Position};

fn overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Pairwise definition: lost or self-blocked frames are unheard, any other
/// frame overlapping a surviving frame is corrupted.
fn brute_force(cands: &[RxCandidate], own: &[(f64, f64)]) -> Vec<RxOutcome> {
    (0..cands.len())
        .map(|i| {
            let c = cands[i];
            if c.lost || own.iter().any(|&t| overlap((c.start, c.end), t)) {
                RxOutcome::Unheard
            } else if (0..cands.len()).any(|j| j != i && !cands[j].lost && overlap((c.start, c.end), (cands[j].start, cands[j].end))) {
                RxOutcome::Corrupted
            } else {
                RxOutcome::Clean
            }
        })
        .collect()
}

/// Random receiver configurations checked against [`brute_force`], plus
/// a reordering check. Returns the number of disagreements.
pub fn resolver_mismatches(trials: usize) -> usize {
    let mut bad = 0;
    let mut rng = SimRng::new(11, 900);
    for _ in 0..trials {
        let k = rng.random_range(0..8);
        let cands: Vec<RxCandidate> = (0..k)
            .map(|_| {
                // Coarse grid so touching and identical intervals occur.
                let start = rng.random_range(0..40) as f64 * 0.25;
                let len = rng.random_range(1..8) as f64 * 0.25;
                RxCandidate { start, end: start + len, lost: rng.random_bool(0.15) }
            })
            .collect();
        let own: Vec<(f64, f64)> = (0..rng.random_range(0..2))
            .map(|_| {
                let s = rng.random_range(0..40) as f64 * 0.25;
                (s, s + 0.8)
            })
            .collect();
        let got = resolve_collisions(&cands, &own);
        if got != brute_force(&cands, &own) {
            bad += 1;
        }

        // Reordering the candidates reorders the verdicts and nothing else.
        let mut perm: Vec<usize> = (0..k).collect();
        perm.reverse();
        perm.rotate_left(k / 3);
        let shuffled: Vec<RxCandidate> = perm.iter().map(|&i| cands[i]).collect();
        let again = resolve_collisions(&shuffled, &own);
        if perm.iter().enumerate().any(|(pos, &i)| again[pos] != got[i]) {
            bad += 1;
        }
    }
    bad
}

/// Random slots pushed through the full channel, every reception checked
/// against [`brute_force`]. Returns the number of disagreeing receptions.
pub fn channel_mismatches(trials: u64) -> usize {
    let mut bad = 0;
    let mut rng = SimRng::new(12, 901);
    for trial in 0..trials {
        let n = rng.random_range(2..=6);
        let mut positions: Vec<Position> = (0..n)
            .map(|_| {
                let r = rng.random_range(500.0..5000.0);
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                Position::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect();
        positions.push(Position::default());
        let cfg = NetworkConfig { n_senders: n, positions, rtt_jitter_max_s: 0.0, seed: trial, ..Default::default() };
        let mut ch = Channel::new(&cfg);
        let mut starts = vec![None; n];
        for (i, s) in starts.iter_mut().enumerate() {
            if rng.random_bool(0.6) {
                let t = rng.random_range(0..16) as f64 * 0.25;
                *s = Some(t);
                ch.schedule_tx(data_frame(i, 0, 1), t);
            }
        }
        let tx = cfg.tx_delay();
        let events = ch.run_until(cfg.slot_length_s * 2.0);
        for e in &events {
            let EventKind::RxEnd { receiver, frame, outcome } = &e.kind else { continue };
            let r = *receiver;
            let own: Vec<(f64, f64)> =
                if r.is_sink() { vec![] } else { starts[r.0 as usize].map(|t| vec![(t, t + tx)]).unwrap_or_default() };
            let mut cands = Vec::new();
            let mut me = 0;
            for (j, s) in starts.iter().enumerate() {
                let (Some(t), true) = (s, NodeId::sender(j) != r) else { continue };
                if NodeId::sender(j) == frame.src {
                    me = cands.len();
                }
                let start = t + cfg.delay(NodeId::sender(j), r);
                cands.push(RxCandidate { start, end: start + tx, lost: false });
            }
            if *outcome != brute_force(&cands, &own)[me] {
                bad += 1;
            }
        }
    }
    bad
}

fn lex_less(a: u64, b: u64, n: usize) -> bool {
    let bits = |v: u64| (0..n).map(|j| (v >> j) & 1).collect::<Vec<_>>();
    bits(a) < bits(b)
}

fn random_histogram(n: usize, rng: &mut SimRng) -> ConvergenceHistogram {
    let mut h = ConvergenceHistogram::new(n);
    let support = rng.random_range(1..=(1usize << n));
    for _ in 0..support {
        let v = rng.random_range(0..(1u64 << n));
        // Small counts make ties common.
        h.add_count(v, rng.random_range(1..4));
    }
    h
}

/// Every observable subset of random 3- to 5-sender histograms. Returns
/// the number of MAP or posterior disagreements.
pub fn completion_mismatches() -> usize {
    let mut bad = 0;
    let mut rng = SimRng::new(13, 902);
    for n in 3..=5usize {
        for _ in 0..20 {
            let h = random_histogram(n, &mut rng);
            let counts: BTreeMap<u64, u64> = (0..1u64 << n).map(|v| (v, h.tally(v).count)).collect();
            for mask in 0..(1u64 << n) {
                for known in 0..(1u64 << n) {
                    if known & !mask != 0 {
                        continue;
                    }
                    let consistent: Vec<(u64, u64)> =
                        counts.iter().filter(|(&v, &c)| v & mask == known && c > 0).map(|(&v, &c)| (v, c)).collect();
                    let evidence: u64 = consistent.iter().map(|(_, c)| c).sum();

                    let mut best: Option<(u64, u64)> = None;
                    for &(v, c) in &consistent {
                        best = match best {
                            Some((bv, bc)) if bc > c || (bc == c && lex_less(bv, v, n)) => Some((bv, bc)),
                            _ => Some((v, c)),
                        };
                    }
                    if h.map_completion(mask, known) != best.map(|(v, _)| v) {
                        bad += 1;
                    }
                    let post = h.posterior(mask, known);
                    if post.len() != consistent.len()
                        || post.iter().any(|&(v, p)| (p - counts[&v] as f64 / evidence as f64).abs() >= 1e-12)
                    {
                        bad += 1;
                    }
                }
            }
        }
    }
    bad
}

/// Largest relative error between analytic and central-difference
/// gradients of a 4-8-8-4-2 network over `points` random points.
pub fn worst_gradient_error(points: u64) -> f64 {
    let mut rng = SimRng::new(14, 903);
    let mut worst: f64 = 0.0;
    for point in 0..points {
        let mut init = SimRng::new(point, 904);
        let mut net = QNetwork::new(4, &[8, 8, 4], 2, &mut init);
        let batch = rng.random_range(1..4);
        let x = Array2::from_shape_fn((batch, 4), |_| rng.random_range(-2.0..2.0));
        let actions: Vec<usize> = (0..batch).map(|_| rng.random_range(0..2)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, grads) = net.loss_and_gradients(x.view(), &actions, &targets);
        let analytic: Vec<f64> = grads.values().copied().collect();
        let h = 1e-6;
        for (k, &a) in analytic.iter().enumerate() {
            let orig = *net.params().nth(k).unwrap();
            *net.params_mut().nth(k).unwrap() = orig + h;
            let (up, _) = net.loss_and_gradients(x.view(), &actions, &targets);
            *net.params_mut().nth(k).unwrap() = orig - h;
            let (down, _) = net.loss_and_gradients(x.view(), &actions, &targets);
            *net.params_mut().nth(k).unwrap() = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
