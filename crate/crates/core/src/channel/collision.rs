//! Per-receiver collision resolution.

use serde::Serialize;

/// A frame arriving at one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxCandidate {
    pub start: f64,
    pub end: f64,
    /// Removed by the per-link loss draw; a lost frame carries no energy
    /// at the receiver and does not interfere with others.
    pub lost: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RxOutcome {
    Clean,
    Corrupted,
    Unheard,
}

impl RxOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            RxOutcome::Clean => "clean",
            RxOutcome::Corrupted => "corrupted",
            RxOutcome::Unheard => "unheard",
        }
    }
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Classifies every candidate at one receiver.
///
/// A candidate is unheard when it was lost or the receiver was transmitting
/// during any part of it; otherwise it is corrupted when it overlaps any
/// other surviving candidate (both sides are lost, no capture), else clean.
/// Intervals are open, so back-to-back frames do not collide.
pub fn resolve_collisions(cands: &[RxCandidate], own_tx: &[(f64, f64)]) -> Vec<RxOutcome> {
    let mut out = vec![RxOutcome::Clean; cands.len()];

    // Sweep surviving intervals in start order: an interval overlaps an
    // earlier one iff its start precedes the running max end, and a later
    // one iff its end exceeds the next start.
    let mut order: Vec<usize> = (0..cands.len()).filter(|&i| !cands[i].lost).collect();
    order.sort_by(|&a, &b| cands[a].start.total_cmp(&cands[b].start).then(a.cmp(&b)));
    let mut max_end = f64::NEG_INFINITY;
    for (k, &i) in order.iter().enumerate() {
        let c = cands[i];
        let hit_prev = c.start < max_end;
        let hit_next = order.get(k + 1).is_some_and(|&j| c.end > cands[j].start);
        if hit_prev || hit_next {
            out[i] = RxOutcome::Corrupted;
        }
        max_end = max_end.max(c.end);
    }

    for (i, c) in cands.iter().enumerate() {
        if c.lost || own_tx.iter().any(|&t| overlaps((c.start, c.end), t)) {
            out[i] = RxOutcome::Unheard;
        }
    }
    out
}
