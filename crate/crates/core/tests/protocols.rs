//! Whole-protocol runs: baselines, determinism and node-order symmetry.

use rand::Rng;

use uwmac::baselines::{MacProtocol, SlotPlan, UwAlohaQ};
use uwmac::config::{ExperimentConfig, LearningConfig, OptimizerKind, Protocol, TopologyKind};
use uwmac::dqn::save_checkpoint;
use uwmac::harness::compare::run_trial;
use uwmac::harness::eamac::{train, EamacPolicy};
use uwmac::harness::{run_protocol, SlotResult, TopologySpec};
use uwmac::rng::SimRng;
use uwmac::NetworkConfig;

fn network(kind: TopologyKind, n: usize, seed: u64) -> NetworkConfig {
    let spec = TopologySpec { kind, n_senders: n, range_m: 5000.0, range_min_m: 1000.0, range_max_m: 5000.0, min_spread_m: 0.0, seed };
    NetworkConfig { n_senders: n, positions: spec.positions(), seed, ..Default::default() }
}

fn small_learning(episodes: usize) -> LearningConfig {
    LearningConfig {
        hidden_sizes: vec![8, 8, 8],
        batch_size: 8,
        replay_capacity: 500,
        episodes,
        max_steps: 30,
        window_m: 2,
        optimizer: OptimizerKind::Adam,
        learning_rate: 1e-3,
        ..Default::default()
    }
}

#[test]
fn uwalohaq_settles_collision_free_in_most_seeds() {
    let n = 4;
    let frames = 150;
    let mut settled = 0;
    for seed in 0..20 {
        let cfg = network(TopologyKind::Equidistant, n, seed);
        let mut p = UwAlohaQ::new(n, n, 0.1, 20, seed);
        let run = run_protocol(&mut p, &cfg, n * frames, 0.0);
        let tail = &run.raster[n * (frames - 50)..];
        // Equidistant senders collide exactly when they share a slot.
        if tail.iter().all(|row| row.iter().map(|&b| b as u32).sum::<u32>() <= 1) {
            settled += 1;
        }
    }
    assert!(settled >= 18, "{settled} of 20 seeds settled");
}

#[test]
fn sfama_never_collides_data_and_loses_to_control_loss() {
    let cfg = network(TopologyKind::Equidistant, 4, 3);
    let exp = ExperimentConfig::default();
    let clean = run_trial(Protocol::Sfama, &cfg, &exp, 150, None).unwrap();
    assert_eq!(clean.report.collisions, 0);
    assert!(clean.report.rdc > 0);
    // At most one data slot per handshake.
    assert!(clean.report.rdc <= 75);
    let lossy = run_trial(Protocol::Sfama, &cfg, &ExperimentConfig { sfama_control_loss: 0.6, ..exp }, 150, None).unwrap();
    assert!(lossy.report.rdc < clean.report.rdc);
}

#[test]
fn runs_are_byte_identical() {
    let exp = ExperimentConfig::default();
    for p in [Protocol::Tdma, Protocol::Aloha, Protocol::Uwalohaq, Protocol::Sfama] {
        let mut cfg = network(TopologyKind::Nonequidistant, 4, 9);
        cfg.set_uniform_loss(0.2, 0.3);
        let a = run_trial(p, &cfg, &exp, 150, None).unwrap();
        let b = run_trial(p, &cfg, &exp, 150, None).unwrap();
        assert!(!a.trace.is_empty());
        assert_eq!(a.trace, b.trace, "{p} trace");
        assert_eq!(a.report.to_csv(), b.report.to_csv(), "{p} metrics");
    }

    let cfg = network(TopologyKind::Nonequidistant, 3, 4);
    let lrn = small_learning(3);
    let t1 = train(&cfg, &lrn, &exp, 4, |_, _| {}).unwrap();
    let t2 = train(&cfg, &lrn, &exp, 4, |_, _| {}).unwrap();
    assert_eq!(t1.episode_rewards, t2.episode_rewards);
    for (a, b) in t1.agents.iter().zip(&t2.agents) {
        assert_eq!(save_checkpoint(&a.learner), save_checkpoint(&b.learner));
        assert_eq!(a.histogram, b.histogram);
    }
    let mut lossy = cfg.clone();
    lossy.set_uniform_loss(0.2, 0.3);
    let e1 = run_trial(Protocol::Eamac, &lossy, &exp, 100, Some(&t1.agents)).unwrap();
    let e2 = run_trial(Protocol::Eamac, &lossy, &exp, 100, Some(&t2.agents)).unwrap();
    assert_eq!(e1.trace, e2.trace);
    assert_eq!(e1.report.to_csv(), e2.report.to_csv());
}

/// Replays a fixed action matrix, `schedule[slot][node]`.
struct Scripted {
    schedule: Vec<Vec<bool>>,
    seqs: Vec<u32>,
}

impl MacProtocol for Scripted {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn n_senders(&self) -> usize {
        self.seqs.len()
    }

    fn plan(&mut self, slot: u64, _slot_end: f64) -> SlotPlan {
        SlotPlan::data(slot, &self.schedule[slot as usize], &mut self.seqs)
    }

    fn observe(&mut self, _res: &SlotResult) {}
}

#[test]
fn relabelling_senders_relabels_results() {
    let n = 5;
    let steps = 200;
    let mut rng = SimRng::new(21, 905);
    for seed in 0..10 {
        let mut cfg = network(TopologyKind::Nonequidistant, n, seed);
        cfg.rtt_jitter_max_s = 0.0;
        let schedule: Vec<Vec<bool>> = (0..steps).map(|_| (0..n).map(|_| rng.random_bool(0.4)).collect()).collect();
        // Node i of the original run becomes node perm[i].
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(1 + seed as usize % (n - 1));
        perm.swap(0, n - 1);
        let mut moved = cfg.clone();
        let mut moved_schedule = vec![vec![false; n]; steps];
        for i in 0..n {
            moved.positions[perm[i]] = cfg.positions[i];
            for t in 0..steps {
                moved_schedule[t][perm[i]] = schedule[t][i];
            }
        }
        let a = run_protocol(&mut Scripted { schedule, seqs: vec![0; n] }, &cfg, steps, 0.0).report;
        let b = run_protocol(&mut Scripted { schedule: moved_schedule, seqs: vec![0; n] }, &moved, steps, 0.0).report;
        assert_eq!(a.rdc, b.rdc);
        assert_eq!(a.collisions, b.collisions);
        for i in 0..n {
            assert_eq!(a.tc[i], b.tc[perm[i]]);
            assert_eq!(a.rac[i], b.rac[perm[i]]);
        }
    }
}

#[test]
fn learned_policy_logs_every_node_slot() {
    let cfg = network(TopologyKind::Equidistant, 3, 2);
    let exp = ExperimentConfig::default();
    let out = train(&cfg, &small_learning(2), &exp, 2, |_, _| {}).unwrap();
    let mut p = EamacPolicy::new(out.agents, true);
    let run = run_protocol(&mut p, &cfg, 40, 0.0);
    assert_eq!(p.logs.len(), 3 * 40);
    assert_eq!(run.report.steps, 40);
    assert_eq!(p.n_senders(), 3);
}
