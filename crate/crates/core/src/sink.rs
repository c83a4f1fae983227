//! Sink node: the transmission-order queue and aggregated ACKs.

use serde::{Deserialize, Serialize};

use crate::channel::{Channel, Frame, FrameKind, Payload};
use crate::types::NodeId;

/// Sender ids ordered from least to most recently confirmed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxQueue {
    order: Vec<NodeId>,
}

impl TxQueue {
    pub fn new(n_senders: usize) -> Self {
        Self { order: (0..n_senders).map(NodeId::sender).collect() }
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.order
    }

    pub fn position(&self, sender: NodeId) -> Option<usize> {
        self.order.iter().position(|&s| s == sender)
    }

    /// Returns the 0-based position of `sender`, then moves it to the tail.
    pub fn promote(&mut self, sender: NodeId) -> usize {
        let phi = self.position(sender).unwrap_or_else(|| panic!("sender {sender} not in queue"));
        let id = self.order.remove(phi);
        self.order.push(id);
        phi
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.order.len()];
        self.order.iter().all(|s| {
            let i = s.0 as usize;
            i < seen.len() && !std::mem::replace(&mut seen[i], true)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confirmation {
    pub sender: NodeId,
    pub phi: u8,
    pub seq: u16,
}

/// One sink broadcast confirming every sender heard in a slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedAck {
    pub slot_index: u64,
    pub confirmations: Vec<Confirmation>,
}

impl AggregatedAck {
    /// Wire layout, big-endian: `slot_index: u32`, `count: u8`, then one
    /// `(sender: u8, phi: u8, seq: u16)` triplet per confirmation.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 4 * self.confirmations.len());
        out.extend_from_slice(&(self.slot_index as u32).to_be_bytes());
        out.push(self.confirmations.len() as u8);
        for c in &self.confirmations {
            out.push(c.sender.0 as u8);
            out.push(c.phi);
            out.extend_from_slice(&c.seq.to_be_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let slot_index = u32::from_be_bytes(bytes.get(0..4)?.try_into().ok()?) as u64;
        let count = *bytes.get(4)? as usize;
        let body = bytes.get(5..)?;
        if body.len() != 4 * count {
            return None;
        }
        let confirmations = body
            .chunks_exact(4)
            .map(|c| Confirmation {
                sender: NodeId(c[0] as u16),
                phi: c[1],
                seq: u16::from_be_bytes([c[2], c[3]]),
            })
            .collect();
        Some(Self { slot_index, confirmations })
    }

    pub fn bitmap(&self) -> u64 {
        self.confirmations.iter().fold(0, |m, c| m | 1 << c.sender.0)
    }

    pub fn find(&self, sender: NodeId) -> Option<&Confirmation> {
        self.confirmations.iter().find(|c| c.sender == sender)
    }
}

#[derive(Debug, Clone)]
pub struct Sink {
    queue: TxQueue,
    pending: AggregatedAck,
    ack_seq: u32,
}

impl Sink {
    pub fn new(n_senders: usize) -> Self {
        Self {
            queue: TxQueue::new(n_senders),
            pending: AggregatedAck { slot_index: 0, confirmations: Vec::new() },
            ack_seq: 0,
        }
    }

    pub fn queue(&self) -> &TxQueue {
        &self.queue
    }

    pub fn pending(&self) -> &AggregatedAck {
        &self.pending
    }

    /// Handles a clean data reception and returns the sender's queue
    /// position before it moved to the tail. A repeated (sender, slot)
    /// keeps its first confirmation.
    pub fn on_data_received(&mut self, sender: NodeId, seq: u32, slot: u64) -> usize {
        if self.pending.slot_index != slot {
            self.pending = AggregatedAck { slot_index: slot, confirmations: Vec::new() };
        }
        if let Some(c) = self.pending.find(sender) {
            return c.phi as usize;
        }
        let phi = self.queue.promote(sender);
        self.pending.confirmations.push(Confirmation { sender, phi: phi as u8, seq: seq as u16 });
        phi
    }

    /// Takes the confirmations pending for `slot`, if any.
    pub fn take_ack(&mut self, slot: u64) -> Option<AggregatedAck> {
        if self.pending.slot_index != slot || self.pending.confirmations.is_empty() {
            return None;
        }
        let ack = std::mem::replace(
            &mut self.pending,
            AggregatedAck { slot_index: slot, confirmations: Vec::new() },
        );
        Some(ack)
    }

    /// Schedules this slot's aggregated ACK at `t`. Slots without a clean
    /// reception produce no frame. Returns the broadcast contents.
    pub fn broadcast_ack(&mut self, slot: u64, channel: &mut Channel, t: f64) -> Option<AggregatedAck> {
        let ack = self.take_ack(slot)?;
        let seq = self.ack_seq;
        self.ack_seq += 1;
        channel.schedule_tx(
            Frame { kind: FrameKind::AggAck, src: NodeId::SINK, slot_index: slot, seq, payload: Payload::AggAck(ack.clone()) },
            t,
        );
        Some(ack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn front_of_queue_has_phi_zero() {
        let mut sink = Sink::new(4);
        // Senders are 0-based here: node "1" of a 1..4 labelling is NodeId(0).
        assert_eq!(sink.on_data_received(NodeId(0), 0, 0), 0);
        assert_eq!(sink.queue().as_slice(), &[NodeId(1), NodeId(2), NodeId(3), NodeId(0)]);
        assert_eq!(sink.on_data_received(NodeId(0), 1, 1), 3);
        assert_eq!(sink.queue().as_slice(), &[NodeId(1), NodeId(2), NodeId(3), NodeId(0)]);
    }

    #[test]
    fn round_robin_keeps_phi_zero() {
        let mut sink = Sink::new(4);
        for slot in 0..40u64 {
            let s = NodeId::sender((slot % 4) as usize);
            assert_eq!(sink.on_data_received(s, slot as u32, slot), 0);
        }
    }

    #[test]
    fn duplicate_reception_is_idempotent() {
        let mut sink = Sink::new(3);
        assert_eq!(sink.on_data_received(NodeId(1), 5, 2), 1);
        assert_eq!(sink.on_data_received(NodeId(1), 5, 2), 1);
        let ack = sink.take_ack(2).unwrap();
        assert_eq!(ack.confirmations.len(), 1);
        assert_eq!(sink.queue().as_slice(), &[NodeId(0), NodeId(2), NodeId(1)]);
    }

    #[test]
    fn empty_slot_yields_no_ack() {
        let mut sink = Sink::new(3);
        assert!(sink.take_ack(0).is_none());
        sink.on_data_received(NodeId(2), 0, 1);
        assert!(sink.take_ack(0).is_none());
        assert!(sink.take_ack(1).is_some());
        assert!(sink.take_ack(1).is_none());
    }

    #[test]
    fn wire_layout_is_fixed() {
        let ack = AggregatedAck {
            slot_index: 0x0102,
            confirmations: vec![
                Confirmation { sender: NodeId(3), phi: 2, seq: 0x0a0b },
                Confirmation { sender: NodeId(0), phi: 0, seq: 7 },
            ],
        };
        let bytes = ack.encode();
        assert_eq!(bytes, vec![0, 0, 1, 2, 2, 3, 2, 0x0a, 0x0b, 0, 0, 0, 7]);
        assert!(bytes.len() <= 10 + 3, "two confirmations fit the 10 B abstraction plus header");
        assert_eq!(AggregatedAck::decode(&bytes), Some(ack.clone()));
        assert_eq!(ack.bitmap(), 0b1001);
        assert!(AggregatedAck::decode(&bytes[..7]).is_none());
    }

    proptest! {
        #[test]
        fn queue_stays_a_permutation(n in 1usize..8, rx in proptest::collection::vec(0usize..8, 0..64)) {
            let mut sink = Sink::new(n);
            for (slot, s) in rx.into_iter().enumerate() {
                sink.on_data_received(NodeId::sender(s % n), slot as u32, slot as u64);
                prop_assert!(sink.queue().is_permutation());
            }
        }

        #[test]
        fn starved_sender_outranks_recent_one(n in 2usize..7, rx in proptest::collection::vec(0usize..7, 1..40)) {
            // Any sender not confirmed since the last confirmation of `recent`
            // sits ahead of it in the queue.
            let mut sink = Sink::new(n);
            let mut last = None;
            for (slot, s) in rx.iter().enumerate() {
                let s = NodeId::sender(s % n);
                sink.on_data_received(s, slot as u32, slot as u64);
                last = Some(s);
            }
            let recent = last.unwrap();
            let phi_recent = sink.queue().position(recent).unwrap();
            for other in (0..n).map(NodeId::sender).filter(|&o| o != recent) {
                prop_assert!(sink.queue().position(other).unwrap() < phi_recent);
            }
        }
    }
}
