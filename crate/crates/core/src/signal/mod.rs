//! Online freshness signal: threshold acquisition through cache, backend and
//! fallback tiers, the binary expiry flag, and ranking features.
//!
//! Every failure path ends in the fallback provenance with `f_exp = 0`.

mod breaker;
mod cache;
mod clock;
mod source;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use breaker::{Admission, BreakerConfig, BreakerSnapshot, BreakerState, CircuitBreaker};
pub use cache::{normalize_query_key, CacheStats, Lookup, Provenance, ThresholdCache, ThresholdCacheEntry};
pub use clock::{Clock, ManualClock, SystemClock};
pub use source::{DocumentSource, KeywordIndex};

use crate::corpus::Document;
use crate::inference::InferenceError;
use crate::pipeline::{Pipeline, PipelineError};
use crate::temporal::{elapsed_days, TimePoint};

/// `1` iff the document time is strictly after the threshold.
pub fn expiry_flag(t_i: &TimePoint, t_exp: &TimePoint) -> u8 {
    u8::from(t_i.resolved_day() > t_exp.resolved_day())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SanityBounds {
    pub past_days: i64,
    pub future_days: i64,
}

impl Default for SanityBounds {
    fn default() -> Self {
        Self {
            past_days: 3650,
            future_days: 1825,
        }
    }
}

/// Accepts thresholds within `[search - past, search + future]` days.
pub fn sanity_check(t_exp: &TimePoint, search_time: &TimePoint, bounds: &SanityBounds) -> bool {
    let offset = t_exp.resolved_day() - search_time.resolved_day();
    offset >= -(bounds.past_days as f64) && offset <= bounds.future_days as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFactorPolicy {
    #[default]
    PubTime,
    ContentTime,
}

/// The time a document is judged by: its publication date, or the latest
/// event a forward pass finds in it (publication date on any failure).
pub fn document_time_factor(
    doc: &Document,
    policy: TimeFactorPolicy,
    pipeline: Option<&Pipeline<f64>>,
    reference: &TimePoint,
) -> TimePoint {
    match (policy, pipeline) {
        (TimeFactorPolicy::ContentTime, Some(p)) => {
            catch_unwind(AssertUnwindSafe(|| p.content_time(doc, reference)))
                .ok()
                .and_then(Result::ok)
                .unwrap_or(doc.pub_time)
        }
        _ => doc.pub_time,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalConfig {
    pub ttl_days: u32,
    pub breaker: BreakerConfig,
    pub oracle_deadline_ms: u64,
    pub remote_deadline_ms: u64,
    pub sanity: SanityBounds,
    pub time_factor: TimeFactorPolicy,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            ttl_days: 7,
            breaker: BreakerConfig::default(),
            oracle_deadline_ms: 50,
            remote_deadline_ms: 800,
            sanity: SanityBounds::default(),
            time_factor: TimeFactorPolicy::PubTime,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum FallbackReason {
    BreakerOpen,
    Timeout,
    Backend(String),
    SanityRejected,
    CacheCorrupt,
    Unresolved(String),
    Panic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub t_exp: Option<TimePoint>,
    pub provenance: Provenance,
    pub s_self: Option<f64>,
    pub reason: Option<FallbackReason>,
}

impl ThresholdResult {
    fn fallback(reason: FallbackReason) -> Self {
        Self {
            t_exp: None,
            provenance: Provenance::Fallback,
            s_self: None,
            reason: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpirySignal {
    pub f_exp: u8,
    pub t_exp_used: Option<TimePoint>,
    pub provenance: Provenance,
    pub breaker_state: BreakerState,
}

/// Ranking features for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureVector {
    pub f_exp: u8,
    pub s_rel_doc: f64,
    pub authority: f64,
    pub cross_rel: f64,
    pub cross_auth: f64,
    pub age_days: f64,
}

pub fn emit_features(
    signal: &ExpirySignal,
    doc_time: &TimePoint,
    s_rel_doc: f64,
    authority: f64,
    search_time: &TimePoint,
) -> FeatureVector {
    let finite_unit = |v: f64| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let s_rel_doc = finite_unit(s_rel_doc);
    let authority = finite_unit(authority);
    let f = f64::from(signal.f_exp);
    FeatureVector {
        f_exp: signal.f_exp,
        s_rel_doc,
        authority,
        cross_rel: f * s_rel_doc,
        cross_auth: f * authority,
        age_days: elapsed_days(doc_time, search_time),
    }
}

/// Three-tier threshold service shared by the CLI and the HTTP front end.
pub struct SignalEngine {
    config: SignalConfig,
    deadline: Duration,
    pipeline: Arc<Pipeline<f64>>,
    documents: Arc<dyn DocumentSource>,
    cache: Arc<ThresholdCache>,
    breaker: Arc<CircuitBreaker>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for SignalEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SignalEngine")
            .field("config", &self.config)
            .field("deadline", &self.deadline)
            .finish()
    }
}

impl SignalEngine {
    pub fn new(
        config: SignalConfig,
        pipeline: Arc<Pipeline<f64>>,
        documents: Arc<dyn DocumentSource>,
        cache: Arc<ThresholdCache>,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let deadline_ms = if pipeline.backend().name() == "oracle" {
            config.oracle_deadline_ms
        } else {
            config.remote_deadline_ms
        };
        let breaker = Arc::new(CircuitBreaker::new(config.breaker, clock.clone()));
        Self {
            deadline: Duration::from_millis(deadline_ms),
            config,
            pipeline,
            documents,
            cache,
            breaker,
            clock,
        }
    }

    pub fn with_deadline(mut self, deadline: Duration) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn config(&self) -> &SignalConfig {
        &self.config
    }

    pub fn breaker(&self) -> &CircuitBreaker {
        &self.breaker
    }

    pub fn cache(&self) -> &ThresholdCache {
        &self.cache
    }

    pub fn pipeline(&self) -> &Pipeline<f64> {
        &self.pipeline
    }

    pub fn now(&self) -> chrono::DateTime<chrono::Utc> {
        self.clock.now()
    }

    pub fn get_threshold(&self, query: &str, search_time: &TimePoint) -> ThresholdResult {
        match self.cache.lookup(query, self.clock.now()) {
            Lookup::Hit(e) => {
                return ThresholdResult {
                    t_exp: Some(e.t_exp),
                    provenance: Provenance::Cache,
                    s_self: Some(e.s_self),
                    reason: None,
                }
            }
            Lookup::Corrupt => {
                tracing::warn!(query, "cache record unreadable");
                return ThresholdResult::fallback(FallbackReason::CacheCorrupt);
            }
            Lookup::Expired | Lookup::Miss => {}
        }
        let Some(admission) = self.breaker.try_acquire() else {
            return ThresholdResult::fallback(FallbackReason::BreakerOpen);
        };

        let started = Instant::now();
        let run = catch_unwind(AssertUnwindSafe(|| {
            let docs = self.documents.documents_for(query);
            let refs: Vec<&Document> = docs.iter().collect();
            self.pipeline.run(query, &refs, search_time)
        }));
        let elapsed = started.elapsed();

        let verdict = match run {
            Err(_) => {
                self.breaker.record_failure(admission);
                return ThresholdResult::fallback(FallbackReason::Panic);
            }
            Ok(Err(PipelineError::Inference(InferenceError::Backend(e)))) => {
                self.breaker.record_failure(admission);
                let reason = match e {
                    crate::inference::BackendError::Timeout => FallbackReason::Timeout,
                    other => FallbackReason::Backend(other.to_string()),
                };
                return ThresholdResult::fallback(reason);
            }
            Ok(Err(e)) => {
                self.breaker.record_success(admission);
                return ThresholdResult::fallback(FallbackReason::Unresolved(e.to_string()));
            }
            Ok(Ok(run)) => run.verdict,
        };
        if elapsed > self.deadline {
            self.breaker.record_failure(admission);
            return ThresholdResult::fallback(FallbackReason::Timeout);
        }
        if !sanity_check(&verdict.t_exp, search_time, &self.config.sanity) {
            self.breaker.record_failure(admission);
            return ThresholdResult::fallback(FallbackReason::SanityRejected);
        }
        self.breaker.record_success(admission);
        if let Err(e) = self.cache.insert(
            query,
            verdict.t_exp,
            verdict.s_self,
            self.clock.now(),
            self.config.ttl_days,
        ) {
            tracing::warn!(error = %e, "cache write failed");
        }
        ThresholdResult {
            t_exp: Some(verdict.t_exp),
            provenance: Provenance::Backend,
            s_self: Some(verdict.s_self),
            reason: None,
        }
    }

    pub fn make_signal(&self, query: &str, doc_time: &TimePoint, search_time: &TimePoint) -> ExpirySignal {
        let threshold = self.get_threshold(query, search_time);
        let f_exp = match (threshold.provenance, threshold.t_exp) {
            (Provenance::Fallback, _) | (_, None) => 0,
            (_, Some(t)) => expiry_flag(doc_time, &t),
        };
        ExpirySignal {
            f_exp,
            t_exp_used: threshold.t_exp,
            provenance: threshold.provenance,
            breaker_state: self.breaker.state(),
        }
    }

    pub fn make_signal_for_doc(&self, query: &str, doc: &Document, search_time: &TimePoint) -> ExpirySignal {
        let doc_time = document_time_factor(
            doc,
            self.config.time_factor,
            Some(&self.pipeline),
            search_time,
        );
        self.make_signal(query, &doc_time, search_time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: &str) -> TimePoint {
        s.parse().unwrap()
    }

    #[test]
    fn flag_examples() {
        assert_eq!(expiry_flag(&tp("2025-06-03"), &tp("2025-06-02")), 1);
        assert_eq!(expiry_flag(&tp("2025-06-02"), &tp("2025-06-02")), 0);
        assert_eq!(expiry_flag(&tp("2025-05-01"), &tp("2025-06-02")), 0);
    }

    #[test]
    fn sanity_examples() {
        let s = tp("2025-06-01");
        let b = SanityBounds::default();
        assert!(sanity_check(&s.add_days(30).unwrap(), &s, &b));
        assert!(!sanity_check(&s.add_days(3000).unwrap(), &s, &b));
        assert!(!sanity_check(&s.add_days(-5000).unwrap(), &s, &b));
        assert!(sanity_check(&s.add_days(1825).unwrap(), &s, &b));
        assert!(!sanity_check(&s.add_days(1826).unwrap(), &s, &b));
    }

    #[test]
    fn features() {
        let signal = |f_exp| ExpirySignal {
            f_exp,
            t_exp_used: None,
            provenance: Provenance::Backend,
            breaker_state: BreakerState::Closed,
        };
        let r = tp("2025-06-01");
        let v = emit_features(&signal(0), &r, 0.7, 0.5, &r);
        assert_eq!((v.cross_rel, v.cross_auth), (0.0, 0.0));
        let v = emit_features(&signal(1), &tp("2025-05-25"), 0.7, 0.5, &r);
        assert_eq!((v.cross_rel, v.cross_auth), (0.7, 0.5));
        assert_eq!(v.age_days, 7.0);
        let back: FeatureVector = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn pub_time_policy() {
        let d = Document {
            docid: "d".into(),
            title: String::new(),
            sentences: vec!["Something happened on 2025-05-28.".into()],
            pub_time: tp("2025-05-30"),
            authority: 1.0,
            source: String::new(),
        };
        assert_eq!(document_time_factor(&d, TimeFactorPolicy::PubTime, None, &tp("2025-06-01")), tp("2025-05-30"));
        assert_eq!(document_time_factor(&d, TimeFactorPolicy::ContentTime, None, &tp("2025-06-01")), tp("2025-05-30"));
    }
}
