//! Slot-by-slot driver over the event channel.

use crate::agent::NodeSlotInput;
use crate::channel::{Channel, Event, EventKind, Frame, FrameKind, Payload, RxOutcome, TraceWriter};
use crate::config::NetworkConfig;
use crate::sink::{AggregatedAck, Sink};
use crate::types::NodeId;

/// What the sink sends back at the ACK offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkReply {
    /// Aggregated ACK of the clean data frames (none if there were none).
    AggAck,
    /// CTS granting the first clean RTS.
    Cts,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotResult {
    pub slot: u64,
    /// Per sender: clean overheard data, clean sink frames.
    pub inputs: Vec<NodeSlotInput>,
    /// Per sender: the grant carried by a clean CTS, if any.
    pub grants_heard: Vec<Option<NodeId>>,
    /// Clean data frames at the sink, in arrival order, as (sender, seq).
    pub sink_data: Vec<(NodeId, u32)>,
    pub sink_rts: Vec<NodeId>,
    /// Data frames that reached the sink but overlapped another reception.
    pub data_collisions: usize,
    pub control_collisions: usize,
    pub ack: Option<AggregatedAck>,
    pub grant: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct SlotSim {
    pub channel: Channel,
    pub sink: Sink,
    n_senders: usize,
    slot_length: f64,
    ack_offset: f64,
    next_slot: u64,
    cts_seq: u32,
    pub trace: Option<TraceWriter>,
}

impl SlotSim {
    pub fn new(cfg: &NetworkConfig) -> Self {
        Self {
            channel: Channel::new(cfg),
            sink: Sink::new(cfg.n_senders),
            n_senders: cfg.n_senders,
            slot_length: cfg.slot_length_s,
            ack_offset: cfg.ack_offset(),
            next_slot: 0,
            cts_seq: 0,
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(TraceWriter::new());
        self
    }

    pub fn n_senders(&self) -> usize {
        self.n_senders
    }

    pub fn next_slot(&self) -> u64 {
        self.next_slot
    }

    pub fn slot_start(&self, slot: u64) -> f64 {
        slot as f64 * self.slot_length
    }

    pub fn slot_end(&self, slot: u64) -> f64 {
        self.slot_start(slot + 1)
    }

    pub fn ack_offset(&self) -> f64 {
        self.ack_offset
    }

    /// Starts a fresh sink queue, as at the start of an episode.
    pub fn reset_sink(&mut self) {
        self.sink = Sink::new(self.n_senders);
    }

    /// Runs one slot: `frames` all start at the slot boundary, the sink
    /// answers at the ACK offset, and everything that completes by the
    /// slot end is collected.
    pub fn run_slot(&mut self, frames: Vec<Frame>, reply: SinkReply) -> SlotResult {
        let slot = self.next_slot;
        self.next_slot += 1;
        let start = self.slot_start(slot);
        let n = self.n_senders;
        let mut res = SlotResult {
            slot,
            inputs: vec![NodeSlotInput::default(); n],
            grants_heard: vec![None; n],
            ..Default::default()
        };

        self.channel.schedule_slot_boundary(slot);
        for f in frames {
            debug_assert_eq!(f.slot_index, slot);
            self.channel.schedule_tx(f, start);
        }

        let first = self.channel.run_until(start + self.ack_offset);
        self.absorb(&first, &mut res);
        for (sender, seq) in res.sink_data.clone() {
            self.sink.on_data_received(sender, seq, slot);
        }
        let t_reply = start + self.ack_offset;
        match reply {
            SinkReply::AggAck => {
                res.ack = self.sink.broadcast_ack(slot, &mut self.channel, t_reply);
            }
            SinkReply::Cts => {
                if let Some(&g) = res.sink_rts.first() {
                    self.cts_seq += 1;
                    let frame =
                        Frame { kind: FrameKind::Cts, src: NodeId::SINK, slot_index: slot, seq: self.cts_seq, payload: Payload::Grant(g) };
                    self.channel.schedule_tx(frame, t_reply);
                    res.grant = Some(g);
                }
            }
        }
        let rest = self.channel.run_until(self.slot_end(slot));
        self.absorb(&rest, &mut res);
        if let Some(t) = self.trace.as_mut() {
            t.record(&first);
            t.record(&rest);
        }
        res
    }

    fn absorb(&self, events: &[Event], res: &mut SlotResult) {
        for e in events {
            let EventKind::RxEnd { receiver, frame, outcome } = &e.kind else { continue };
            if receiver.is_sink() {
                match (frame.kind, outcome) {
                    (FrameKind::Data, RxOutcome::Clean) => res.sink_data.push((frame.src, frame.seq)),
                    (FrameKind::Data, RxOutcome::Corrupted) => res.data_collisions += 1,
                    (FrameKind::Rts, RxOutcome::Clean) => res.sink_rts.push(frame.src),
                    (FrameKind::Rts, RxOutcome::Corrupted) => res.control_collisions += 1,
                    _ => {}
                }
                continue;
            }
            if *outcome != RxOutcome::Clean {
                continue;
            }
            let r = receiver.0 as usize;
            if frame.src.is_sink() {
                let input = &mut res.inputs[r];
                input.sink_frame_heard = true;
                match &frame.payload {
                    Payload::AggAck(a) => input.ack = Some(a.clone()),
                    Payload::Grant(g) => res.grants_heard[r] = Some(*g),
                    Payload::None => {}
                }
            } else if frame.kind == FrameKind::Data {
                res.inputs[r].overheard |= 1 << frame.src.0;
            }
        }
    }
}

/// A data frame from sender `node` in `slot`.
pub fn data_frame(node: usize, slot: u64, seq: u32) -> Frame {
    Frame { kind: FrameKind::Data, src: NodeId::sender(node), slot_index: slot, seq, payload: Payload::None }
}

pub fn rts_frame(node: usize, slot: u64, seq: u32) -> Frame {
    Frame { kind: FrameKind::Rts, src: NodeId::sender(node), slot_index: slot, seq, payload: Payload::None }
}
