//! Discrete-event model of a shared acoustic broadcast channel.
//!
//! Every transmission reaches every other node after its propagation delay.
//! A per-link Bernoulli draw made at transmission time may remove a
//! delivery; surviving deliveries that overlap in time at a receiver are
//! corrupted, and a node hears nothing while it transmits. Reception
//! completion carries a processing jitter drawn from `U(0, jitter_max)`.

mod collision;
mod trace;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::Rng;

pub use collision::{resolve_collisions, RxCandidate, RxOutcome};
pub use trace::{TraceRecord, TraceWriter};

use crate::config::NetworkConfig;
use crate::rng::{streams, SimRng};
use crate::sink::AggregatedAck;
use crate::types::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Data,
    AggAck,
    Rts,
    Cts,
}

impl FrameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::Data => "data",
            FrameKind::AggAck => "aggack",
            FrameKind::Rts => "rts",
            FrameKind::Cts => "cts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    None,
    AggAck(AggregatedAck),
    /// CTS reservation granted to one sender.
    Grant(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub src: NodeId,
    pub slot_index: u64,
    /// Per-(src, kind) counter.
    pub seq: u32,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    SlotBoundary { slot: u64 },
    TxStart { frame: Arc<Frame> },
    TxEnd { frame: Arc<Frame> },
    RxEnd { receiver: NodeId, frame: Arc<Frame>, outcome: RxOutcome },
}

impl EventKind {
    pub fn rank(&self) -> u8 {
        match self {
            EventKind::SlotBoundary { .. } => 0,
            EventKind::TxStart { .. } => 1,
            EventKind::TxEnd { .. } => 2,
            EventKind::RxEnd { .. } => 3,
        }
    }
}

/// Dispatch order: time, then kind rank, node, seq, and finally the
/// insertion counter, which makes the order total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderKey {
    pub time: f64,
    pub rank: u8,
    pub node: usize,
    pub seq: u64,
    pub uid: u64,
}

impl Eq for OrderKey {}

impl Ord for OrderKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.rank.cmp(&other.rank))
            .then(self.node.cmp(&other.node))
            .then(self.seq.cmp(&other.seq))
            .then(self.uid.cmp(&other.uid))
    }
}

impl PartialOrd for OrderKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub key: OrderKey,
    pub kind: EventKind,
}

impl Event {
    pub fn time(&self) -> f64 {
        self.key.time
    }
}

// Heap entries carry the interval id an RxEnd resolves.
#[derive(Debug, Clone)]
struct Pending {
    key: OrderKey,
    kind: PendingKind,
}

#[derive(Debug, Clone)]
enum PendingKind {
    Ready(EventKind),
    Rx { receiver: usize, interval: u64, frame: Arc<Frame> },
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

/// A frame's presence at one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceptionInterval {
    pub id: u64,
    pub start: f64,
    pub end: f64,
    pub lost: bool,
}

#[derive(Debug, Clone)]
pub struct Channel {
    n_senders: usize,
    nodes: usize,
    delays: Vec<f64>,
    loss: Vec<f64>,
    tx_delay: f64,
    jitter_max: f64,
    slot_length: f64,
    turnaround: f64,
    lossless: bool,
    control_loss: f64,
    now: f64,
    queue: BinaryHeap<Reverse<Pending>>,
    rx: Vec<Vec<ReceptionInterval>>,
    tx_busy: Vec<Vec<(f64, f64)>>,
    links: Vec<SimRng>,
    next_uid: u64,
}

impl Channel {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let n = cfg.n_senders;
        let m = n + 1;
        let mut delays = vec![0.0; m * m];
        let mut loss = vec![0.0; m * m];
        let mut links = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                let (na, nb) = (NodeId::from_matrix_index(a, n), NodeId::from_matrix_index(b, n));
                delays[a * m + b] = cfg.delay(na, nb);
                loss[a * m + b] = if a == b { 0.0 } else { cfg.loss(na, nb) };
                links.push(SimRng::new(cfg.seed, streams::LINK + (a * m + b) as u64));
            }
        }
        Self {
            n_senders: n,
            nodes: m,
            delays,
            loss,
            tx_delay: cfg.tx_delay(),
            jitter_max: cfg.rtt_jitter_max_s,
            slot_length: cfg.slot_length_s,
            turnaround: cfg.turnaround_s,
            lossless: false,
            control_loss: 0.0,
            now: 0.0,
            queue: BinaryHeap::new(),
            rx: vec![Vec::new(); m],
            tx_busy: vec![Vec::new(); m],
            links,
            next_uid: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn tx_delay(&self) -> f64 {
        self.tx_delay
    }

    /// Suppresses the effect of loss draws (draws still happen, so the
    /// random streams stay aligned between lossy and lossless runs).
    pub fn set_lossless(&mut self, lossless: bool) {
        self.lossless = lossless;
    }

    pub fn set_link_loss(&mut self, src: NodeId, dst: NodeId, p: f64) {
        let (a, b) = (self.idx(src), self.idx(dst));
        self.loss[a * self.nodes + b] = p;
    }

    /// Extra loss for RTS/CTS frames, combined with the link loss in the
    /// same draw.
    pub fn set_control_loss(&mut self, p: f64) {
        self.control_loss = p;
    }

    pub fn link_loss(&self, src: NodeId, dst: NodeId) -> f64 {
        self.loss[self.idx(src) * self.nodes + self.idx(dst)]
    }

    fn idx(&self, node: NodeId) -> usize {
        node.matrix_index(self.n_senders)
    }

    fn uid(&mut self) -> u64 {
        self.next_uid += 1;
        self.next_uid
    }

    fn key(&mut self, time: f64, rank: u8, node: usize, seq: u64) -> OrderKey {
        let uid = self.uid();
        OrderKey { time, rank, node, seq, uid }
    }

    pub fn schedule_slot_boundary(&mut self, slot: u64) {
        let t = slot as f64 * self.slot_length;
        assert!(t >= self.now, "slot boundary {slot} at {t} is in the past (now {})", self.now);
        let key = self.key(t, 0, 0, slot);
        self.queue.push(Reverse(Pending { key, kind: PendingKind::Ready(EventKind::SlotBoundary { slot }) }));
    }

    /// Schedules a broadcast of `frame` starting at `t_start`.
    ///
    /// Panics when `t_start` lies in the past, when the source is still
    /// transmitting, or when two transmissions of one node in the same slot
    /// are closer than the modem turnaround time.
    pub fn schedule_tx(&mut self, frame: Frame, t_start: f64) {
        assert!(t_start >= self.now, "transmission at {t_start} scheduled in the past (now {})", self.now);
        let src = self.idx(frame.src);
        if let Some(&(s, e)) = self.tx_busy[src].last() {
            assert!(t_start >= e, "node {} already transmitting at {t_start}", frame.src);
            let same_slot = (s / self.slot_length).floor() == (t_start / self.slot_length).floor();
            assert!(
                !same_slot || t_start >= e + self.turnaround - 1e-9 || frame.src.is_sink(),
                "node {} violates turnaround time",
                frame.src
            );
        }
        let t_end = t_start + self.tx_delay;
        let seq = frame.seq as u64;
        let control = matches!(frame.kind, FrameKind::Rts | FrameKind::Cts);
        let frame = Arc::new(frame);
        self.tx_busy[src].push((t_start, t_end));

        let key = self.key(t_start, 1, src, seq);
        self.queue.push(Reverse(Pending { key, kind: PendingKind::Ready(EventKind::TxStart { frame: frame.clone() }) }));
        let key = self.key(t_end, 2, src, seq);
        self.queue.push(Reverse(Pending { key, kind: PendingKind::Ready(EventKind::TxEnd { frame: frame.clone() }) }));

        for r in 0..self.nodes {
            if r == src {
                continue;
            }
            let link = src * self.nodes + r;
            let rng = &mut self.links[link];
            let jitter = if self.jitter_max > 0.0 { rng.random::<f64>() * self.jitter_max } else { 0.0 };
            let mut p_loss = self.loss[link];
            if control {
                p_loss = 1.0 - (1.0 - p_loss) * (1.0 - self.control_loss);
            }
            let lost_draw = rng.random::<f64>() < p_loss;
            let lost = lost_draw && !self.lossless;
            let start = t_start + self.delays[link];
            let end = start + self.tx_delay + jitter;
            let id = self.uid();
            self.rx[r].push(ReceptionInterval { id, start, end, lost });
            if !lost {
                let key = self.key(end, 3, r, seq);
                self.queue.push(Reverse(Pending {
                    key,
                    kind: PendingKind::Rx { receiver: r, interval: id, frame: frame.clone() },
                }));
            }
        }
    }

    fn outcome(&self, receiver: usize, interval: u64) -> RxOutcome {
        let list = &self.rx[receiver];
        let cands: Vec<RxCandidate> =
            list.iter().map(|iv| RxCandidate { start: iv.start, end: iv.end, lost: iv.lost }).collect();
        let outcomes = resolve_collisions(&cands, &self.tx_busy[receiver]);
        let k = list.iter().position(|iv| iv.id == interval).expect("interval registered");
        outcomes[k]
    }

    /// Dispatches every event with time `<= t` and advances the clock to `t`.
    pub fn run_until(&mut self, t: f64) -> Vec<Event> {
        assert!(t >= self.now, "cannot run backwards to {t} (now {})", self.now);
        let mut out = Vec::new();
        while self.queue.peek().is_some_and(|Reverse(p)| p.key.time <= t) {
            let Reverse(p) = self.queue.pop().expect("peeked");
            self.now = p.key.time;
            let kind = match p.kind {
                PendingKind::Ready(kind) => kind,
                PendingKind::Rx { receiver, interval, frame } => {
                    let outcome = self.outcome(receiver, interval);
                    EventKind::RxEnd { receiver: NodeId::from_matrix_index(receiver, self.n_senders), frame, outcome }
                }
            };
            out.push(Event { key: p.key, kind });
        }
        self.now = t;
        self.prune();
        out
    }

    // Anything that ended more than one maximal reception length ago can no
    // longer overlap a reception that is still pending.
    fn prune(&mut self) {
        let horizon = self.now - self.tx_delay - self.jitter_max - 1.0;
        for list in &mut self.rx {
            list.retain(|iv| iv.end >= horizon);
        }
        for list in &mut self.tx_busy {
            if list.len() > 1 {
                let keep_last = *list.last().expect("nonempty");
                list.retain(|&(_, e)| e >= horizon);
                if list.is_empty() {
                    list.push(keep_last);
                }
            }
        }
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }
}
