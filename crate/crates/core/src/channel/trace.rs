use std::io::{self, Write};

use serde::Serialize;

use super::{Event, EventKind, Payload};
use crate::types::NodeId;

/// One line of the JSON-lines event trace. Field order is fixed.
///
/// Node ids are sender indices; the sink is written as `-1`. `payload` holds
/// the hex-encoded aggregated-ACK wire bytes for ACK frames.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub time: f64,
    pub kind: String,
    pub src: Option<i32>,
    pub dst: Option<i32>,
    pub slot: u64,
    pub seq: u64,
    pub outcome: Option<&'static str>,
    pub payload: Option<String>,
}

fn label(n: NodeId) -> i32 {
    if n.is_sink() {
        -1
    } else {
        n.0 as i32
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl From<&Event> for TraceRecord {
    fn from(e: &Event) -> Self {
        let time = e.time();
        match &e.kind {
            EventKind::SlotBoundary { slot } => TraceRecord {
                time,
                kind: "slot".into(),
                src: None,
                dst: None,
                slot: *slot,
                seq: 0,
                outcome: None,
                payload: None,
            },
            EventKind::TxStart { frame } | EventKind::TxEnd { frame } | EventKind::RxEnd { frame, .. } => {
                let (phase, dst, outcome) = match &e.kind {
                    EventKind::TxStart { .. } => ("tx_start", None, None),
                    EventKind::TxEnd { .. } => ("tx_end", None, None),
                    EventKind::RxEnd { receiver, outcome, .. } => ("rx_end", Some(label(*receiver)), Some(outcome.as_str())),
                    EventKind::SlotBoundary { .. } => unreachable!(),
                };
                let payload = match &frame.payload {
                    Payload::AggAck(ack) => Some(hex(&ack.encode())),
                    Payload::Grant(n) => Some(format!("{:02x}", label(*n) as u8)),
                    Payload::None => None,
                };
                TraceRecord {
                    time,
                    kind: format!("{}:{}", phase, frame.kind.as_str()),
                    src: Some(label(frame.src)),
                    dst,
                    slot: frame.slot_index,
                    seq: frame.seq as u64,
                    outcome,
                    payload,
                }
            }
        }
    }
}

/// Accumulates trace lines in memory.
#[derive(Debug, Default, Clone)]
pub struct TraceWriter {
    buf: Vec<u8>,
}

impl TraceWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, events: &[Event]) {
        for e in events {
            serde_json::to_writer(&mut self.buf, &TraceRecord::from(e)).expect("trace record serializes");
            self.buf.push(b'\n');
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(&self.buf)
    }
}
