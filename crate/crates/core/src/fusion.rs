//! Authority-weighted evidence fusion over the candidate expirations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::extraction::{FocusedChunk, FocusedChunkSet};
use crate::inference::InferenceOutcome;
use crate::scalar::Scalar;
use crate::temporal::{hierarchical_match_depth, TimePoint};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FusionError {
    #[error("no candidate expirations")]
    NoCandidates,
    #[error("unsupported verdict: no chunk aligns with any candidate")]
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpirationVerdict<S: Scalar = f64> {
    pub t_exp: TimePoint,
    /// Accumulated weight per candidate, in candidate order. Zero-support
    /// candidates stay listed.
    pub support: Vec<(TimePoint, S)>,
    pub s_self: S,
    pub chunk_count: usize,
    pub tie_broken: bool,
}

impl<S: Scalar> ExpirationVerdict<S> {
    pub fn support_for(&self, t: &TimePoint) -> Option<S> {
        self.support.iter().find(|(c, _)| c == t).map(|(_, s)| *s)
    }
}

/// `authority * s_rel`.
pub fn chunk_weight<S: Scalar>(chunk: &FocusedChunk<S>) -> S {
    chunk.authority() * chunk.s_rel.clamp_unit()
}

/// Whether a chunk's evidence supports a candidate: an anchor contains or is
/// contained by it, or the chunk's own implied expiry falls inside it.
pub fn alignment_indicator<S: Scalar>(candidate: &TimePoint, chunk: &FocusedChunk<S>) -> bool {
    let anchored = chunk.anchor_times().iter().any(|a| {
        hierarchical_match_depth(a, candidate) == a.depth().min(candidate.depth())
    });
    anchored
        || chunk
            .validity_expiry
            .is_some_and(|x| candidate.contains(&x))
}

/// Two supports closer than a few ulps of the larger are a tie, so that
/// rescaling the weights cannot flip a tie through rounding alone.
fn tied<S: Scalar>(a: S, b: S) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= scale * S::epsilon() * S::of(64.0)
}

pub fn fuse<S: Scalar>(
    candidates: &[TimePoint],
    focus: &FocusedChunkSet<S>,
    outcome: &InferenceOutcome<S>,
) -> Result<ExpirationVerdict<S>, FusionError> {
    if candidates.is_empty() {
        return Err(FusionError::NoCandidates);
    }
    let mut unique: Vec<TimePoint> = Vec::with_capacity(candidates.len());
    for c in candidates {
        if !unique.contains(c) {
            unique.push(*c);
        }
    }
    let weights: Vec<S> = focus.chunks.iter().map(chunk_weight).collect();
    let support: Vec<(TimePoint, S)> = unique
        .iter()
        .map(|c| {
            let total = focus
                .chunks
                .iter()
                .zip(&weights)
                .filter(|(chunk, _)| alignment_indicator(c, chunk))
                .fold(S::zero(), |acc, (_, w)| acc + *w);
            (*c, total)
        })
        .collect();

    let best = support.iter().map(|(_, s)| *s).fold(S::zero(), S::max);
    if !(best > S::zero()) {
        return Err(FusionError::Unsupported);
    }
    let mut winners: Vec<TimePoint> = support
        .iter()
        .filter(|(_, s)| tied(*s, best))
        .map(|(c, _)| *c)
        .collect();
    winners.sort_by(earliest_first);
    let tie_broken = winners.len() > 1;
    Ok(ExpirationVerdict {
        t_exp: winners[0],
        support,
        s_self: outcome.s_self,
        chunk_count: focus.len(),
        tie_broken,
    })
}

/// Chronological order used for tie-breaking: earliest resolved day first.
pub fn earliest_first(a: &TimePoint, b: &TimePoint) -> Ordering {
    a.resolved_day().total_cmp(&b.resolved_day()).then_with(|| a.cmp(b))
}
