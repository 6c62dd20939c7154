use crate::scalar::Scalar;
use crate::temporal::{elapsed_days, hierarchical_match_depth, TimePoint};

use super::{ExtractionError, TextSimilarity, WindowSize};

/// Parameters of the chunk relevance score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringParams<S: Scalar = f64> {
    /// Weight of the semantic term against the temporal term.
    pub alpha: S,
    /// Recency decay rate per day, used when the query has no temporal entity.
    pub decay_rate: S,
    /// Focus threshold: chunks must score strictly above it.
    pub tau: S,
    pub window: WindowSize,
}

impl<S: Scalar> Default for ScoringParams<S> {
    fn default() -> Self {
        Self {
            alpha: S::of(0.6),
            decay_rate: Self::decay_for_half_life(30.0),
            tau: S::of(0.35),
            window: WindowSize::default(),
        }
    }
}

impl<S: Scalar> ScoringParams<S> {
    /// `ln 2 / H`: the rate at which the decay halves every `H` days.
    pub fn decay_for_half_life(days: f64) -> S {
        S::LN_2() / S::of(days)
    }

    pub fn validate(&self) -> Result<(), ExtractionError> {
        let in_unit = |v: S| v >= S::zero() && v <= S::one();
        if !in_unit(self.alpha) {
            return Err(ExtractionError::InvalidAlpha(self.alpha.as_f64()));
        }
        if !in_unit(self.tau) {
            return Err(ExtractionError::InvalidThreshold(self.tau.as_f64()));
        }
        if !(self.decay_rate > S::zero()) || !self.decay_rate.is_finite() {
            return Err(ExtractionError::InvalidDecay(self.decay_rate.as_f64()));
        }
        Ok(())
    }
}

pub fn rel_k<S: Scalar>(
    similarity: &dyn TextSimilarity<S>,
    chunk_tokens: &[String],
    keywords: &[String],
) -> S {
    if chunk_tokens.is_empty() {
        return S::zero();
    }
    similarity.similarity(chunk_tokens, keywords).clamp_unit()
}

/// `exp(-rate * elapsed)`.
pub fn recency_decay<S: Scalar>(elapsed_days: S, rate: S) -> S {
    (-(rate * elapsed_days)).exp()
}

/// Partial credit for hierarchical agreement: matched levels over the deeper
/// of the two depths. Exact full-depth matches score one, disjoint years zero.
pub fn temporal_match_score<S: Scalar>(query_time: &TimePoint, anchor: &TimePoint) -> S {
    let matched = hierarchical_match_depth(query_time, anchor);
    let deepest = query_time.depth().max(anchor.depth());
    S::of(matched as f64) / S::of(deepest as f64)
}

/// Temporal alignment of a chunk.
///
/// With query time entities, the best hierarchical match over all pairs
/// (zero when the chunk has no anchor). Without them, recency decay of the
/// chunk's most recent anchor, or of the publication date if it has none.
pub fn rel_t<S: Scalar>(
    anchor_times: &[TimePoint],
    pub_time: &TimePoint,
    query_times: &[TimePoint],
    reference: &TimePoint,
    decay_rate: S,
) -> S {
    if !query_times.is_empty() {
        return query_times
            .iter()
            .flat_map(|q| anchor_times.iter().map(move |a| temporal_match_score::<S>(q, a)))
            .fold(S::zero(), S::max);
    }
    let latest = anchor_times
        .iter()
        .max_by(|a, b| a.resolved_day().total_cmp(&b.resolved_day()))
        .unwrap_or(pub_time);
    let elapsed = S::of(elapsed_days(latest, reference));
    recency_decay(elapsed, decay_rate).clamp_unit()
}

/// Keyword-gated convex blend of semantic and temporal relevance.
pub fn combine_relevance<S: Scalar>(keyword_gate: bool, alpha: S, rel_k: S, rel_t: S) -> S {
    if !keyword_gate {
        return S::zero();
    }
    alpha * rel_k + (S::one() - alpha) * rel_t
}
