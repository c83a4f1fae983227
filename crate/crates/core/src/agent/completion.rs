//! Filling unobserved neighbour actions from convergence-phase statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::observation::SlotObservation;

/// Occurrences of joint sender-action vectors (bit `j` = sender `j`
/// transmitted), plus how many of those slots showed a collision.
///
/// Slots recorded with [`record_after`](Self::record_after) also land in a
/// per-predecessor table keyed by the previous slot's joint vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistogram {
    pub n_senders: usize,
    counts: BTreeMap<u64, Tally>,
    total: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    after: BTreeMap<u64, ConvergenceHistogram>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub count: u64,
    pub collided: u64,
}

/// Orders joint vectors by `(a_0, a_1, ..)` lexicographically.
pub fn lex_key(v: u64, n: usize) -> u64 {
    (0..n).fold(0, |acc, j| (acc << 1) | ((v >> j) & 1))
}

impl ConvergenceHistogram {
    pub fn new(n_senders: usize) -> Self {
        Self { n_senders, ..Default::default() }
    }

    pub fn record(&mut self, joint: u64, collided: bool) {
        let t = self.counts.entry(joint).or_default();
        t.count += 1;
        t.collided += collided as u64;
        self.total += 1;
    }

    /// Records `joint` both overall and as the successor of `previous`.
    pub fn record_after(&mut self, previous: u64, joint: u64, collided: bool) {
        self.record(joint, collided);
        let n = self.n_senders;
        self.after.entry(previous).or_insert_with(|| Self::new(n)).record(joint, collided);
    }

    /// Statistics of the slots that followed `previous`.
    pub fn after(&self, previous: u64) -> Option<&ConvergenceHistogram> {
        self.after.get(&previous)
    }

    pub fn add_count(&mut self, joint: u64, count: u64) {
        self.counts.entry(joint).or_default().count += count;
        self.total += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn tally(&self, joint: u64) -> Tally {
        self.counts.get(&joint).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Tally)> + '_ {
        self.counts.iter().map(|(&k, &t)| (k, t))
    }

    /// Posterior over the unknown positions given the bits in `known_mask`
    /// take the values in `known`, computed as likelihood times prior over
    /// evidence. Returns `(full joint vector, probability)` for every
    /// completion with nonzero probability; empty when the evidence never
    /// occurred.
    pub fn posterior(&self, known_mask: u64, known: u64) -> Vec<(u64, f64)> {
        let known = known & known_mask;
        let unknown_mask = !known_mask & full_mask(self.n_senders);
        let evidence: u64 = self.iter().filter(|(v, _)| v & known_mask == known).map(|(_, t)| t.count).sum();
        if evidence == 0 {
            return Vec::new();
        }
        let total = self.total as f64;
        let p_k = evidence as f64 / total;
        let mut out = Vec::new();
        for (v, t) in self.iter().filter(|(v, t)| v & known_mask == known && t.count > 0) {
            let u = v & unknown_mask;
            let prior_count: u64 = self.iter().filter(|(w, _)| w & unknown_mask == u).map(|(_, t)| t.count).sum();
            let p_u = prior_count as f64 / total;
            let likelihood = t.count as f64 / prior_count as f64;
            out.push((v, likelihood * p_u / p_k));
        }
        out
    }

    /// Most frequent joint vector consistent with the known bits; ties go
    /// to the lexicographically smallest vector. `None` when the evidence
    /// was never observed.
    pub fn map_completion(&self, known_mask: u64, known: u64) -> Option<u64> {
        let known = known & known_mask;
        self.iter()
            .filter(|(v, t)| v & known_mask == known && t.count > 0)
            .max_by(|(a, ta), (b, tb)| {
                ta.count.cmp(&tb.count).then_with(|| lex_key(*b, self.n_senders).cmp(&lex_key(*a, self.n_senders)))
            })
            .map(|(v, _)| v)
    }

    /// Per-sender transmit frequency over all recorded slots.
    pub fn marginals(&self) -> Vec<f64> {
        (0..self.n_senders)
            .map(|j| {
                if self.total == 0 {
                    return 0.0;
                }
                let c: u64 = self.iter().filter(|(v, _)| (v >> j) & 1 == 1).map(|(_, t)| t.count).sum();
                c as f64 / self.total as f64
            })
            .collect()
    }
}

fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Fills gaps in sender `me`'s observation of one slot.
///
/// With an ACK, every confirmed sender must have transmitted. Without one,
/// the own action and the overheard senders are the evidence; the most
/// likely completion under `hist` supplies the other senders' actions, and
/// its ACK bits too when that joint action was clean more often than not.
/// `previous` is the joint vector of the slot before, as `me` completed it;
/// when `hist` has seen that predecessor together with this evidence, only
/// the slots that followed it are used. Unseen evidence falls back to
/// per-sender majority.
pub fn complete_observation(
    partial: &SlotObservation,
    me: usize,
    hist: &ConvergenceHistogram,
    previous: Option<u64>,
) -> SlotObservation {
    let n = hist.n_senders;
    let own_bit = 1u64 << me;
    let mut out = *partial;
    if partial.ack_bitmap != 0 {
        out.overheard |= partial.ack_bitmap & !own_bit;
        return out;
    }
    let known_mask = own_bit | partial.overheard;
    if known_mask == full_mask(n) {
        return out;
    }
    let known = partial.joint_actions(me);
    let conditional = previous.and_then(|p| hist.after(p)).and_then(|h| Some((h, h.map_completion(known_mask, known)?)));
    let (hist, map) = match conditional {
        Some((h, joint)) => (h, Some(joint)),
        None => (hist, hist.map_completion(known_mask, known)),
    };
    match map {
        Some(joint) => {
            out.overheard = joint & !own_bit;
            let t = hist.tally(joint);
            if 2 * t.collided < t.count && joint != 0 {
                out.ack_bitmap = joint;
                out.own_ack = partial.own_action == 1;
                out.n_concurrent = joint.count_ones();
                out.phi_norm = 0.0;
            }
        }
        None => {
            for (j, p) in hist.marginals().into_iter().enumerate() {
                if known_mask >> j & 1 == 0 && p > 0.5 {
                    out.overheard |= 1 << j;
                }
            }
        }
    }
    out
}
