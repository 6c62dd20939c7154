use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::extraction::Extractor;
use crate::pipeline::{Pipeline, PipelineError};
use crate::signal::{
    emit_features, expiry_flag, sanity_check, BreakerState, ExpirySignal, FallbackReason,
    FeatureVector, Provenance, SanityBounds, SignalEngine, ThresholdResult,
};
use crate::temporal::{elapsed_days, TimePoint};

use super::metrics::{day_away_at_k, PairCounts, PairRatio, Summary};
use super::rerank::{rerank, RerankWeights};
use super::{EvalCorpus, EvalQuery, FreshnessTier};

pub const NO_FEATURE: &str = "no_feature";
pub const RECENCY_WINDOW: &str = "recency_window";
pub const EXPIRY_AWARE: &str = "expiry_aware";

/// Produces a query's expiration threshold for offline evaluation.
pub trait ThresholdSource: Sync {
    fn threshold(&self, query: &EvalQuery, docs: &[&Document]) -> ThresholdResult;
}

/// Runs the pipeline directly on the query's candidate documents, applying
/// the same sanity bounds as the online path. No cache, no breaker.
#[derive(Debug)]
pub struct PipelineThresholds<'a> {
    pub pipeline: &'a Pipeline<f64>,
    pub sanity: SanityBounds,
}

impl ThresholdSource for PipelineThresholds<'_> {
    fn threshold(&self, query: &EvalQuery, docs: &[&Document]) -> ThresholdResult {
        let fallback = |reason| ThresholdResult {
            t_exp: None,
            provenance: Provenance::Fallback,
            s_self: None,
            reason: Some(reason),
        };
        match self.pipeline.run(&query.text, docs, &query.search_time) {
            Ok(run) if sanity_check(&run.verdict.t_exp, &query.search_time, &self.sanity) => ThresholdResult {
                t_exp: Some(run.verdict.t_exp),
                provenance: Provenance::Backend,
                s_self: Some(run.verdict.s_self),
                reason: None,
            },
            Ok(_) => fallback(FallbackReason::SanityRejected),
            Err(PipelineError::Inference(crate::inference::InferenceError::Backend(e))) => {
                fallback(FallbackReason::Backend(e.to_string()))
            }
            Err(e) => fallback(FallbackReason::Unresolved(e.to_string())),
        }
    }
}

impl ThresholdSource for SignalEngine {
    fn threshold(&self, query: &EvalQuery, _docs: &[&Document]) -> ThresholdResult {
        self.get_threshold(&query.text, &query.search_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    pub weights: RerankWeights,
    /// Baseline flags documents at most this many days old.
    pub recency_window_days: f64,
    /// Worker threads; results do not depend on it.
    #[serde(default = "EvalOptions::default_threads")]
    pub threads: usize,
}

impl EvalOptions {
    fn default_threads() -> usize {
        4
    }
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            weights: RerankWeights::default(),
            recency_window_days: 30.0,
            threads: Self::default_threads(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRun {
    pub ranking: Vec<String>,
    pub day_away_4: Option<Summary>,
    pub day_away_10: Option<Summary>,
    pub pairs: PairCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDiagnostics {
    pub qid: String,
    pub tier: FreshnessTier,
    pub gt_expiry: Option<TimePoint>,
    pub t_exp: Option<TimePoint>,
    pub provenance: Provenance,
    pub fallback_reason: Option<FallbackReason>,
    pub systems: BTreeMap<String, SystemRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMetrics {
    /// Mean over queries of each query's median and mean.
    pub day_away_4: Option<Summary>,
    pub day_away_10: Option<Summary>,
    pub pairs: BTreeMap<FreshnessTier, PairCounts>,
    pub pnr: BTreeMap<FreshnessTier, Option<PairRatio>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub day_away_4_median: Option<f64>,
    pub day_away_4_mean: Option<f64>,
    pub day_away_10_median: Option<f64>,
    pub day_away_10_mean: Option<f64>,
    pub pnr: BTreeMap<FreshnessTier, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub query_count: usize,
    pub thresholds_resolved: usize,
    pub thresholds_exact: usize,
    pub systems: BTreeMap<String, SystemMetrics>,
    /// Expiry-aware minus recency-window baseline.
    pub deltas: Deltas,
    pub queries: Vec<QueryDiagnostics>,
}

fn system_run(
    docs: &[&Document],
    grades: &[u8],
    labels: &[u8],
    features: Vec<FeatureVector>,
    weights: &RerankWeights,
) -> SystemRun {
    let items: Vec<(u8, FeatureVector)> = grades.iter().copied().zip(features).collect();
    let order = rerank(&items, weights);
    let ages: Vec<f64> = order.iter().map(|&i| items[i].1.age_days).collect();
    let ranked_labels: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
    SystemRun {
        ranking: order.iter().map(|&i| docs[i].docid.clone()).collect(),
        day_away_4: day_away_at_k(&ages, 4),
        day_away_10: day_away_at_k(&ages, 10),
        pairs: PairCounts::of_ranking(&ranked_labels),
    }
}

fn evaluate_query(
    query: &EvalQuery,
    documents: &std::collections::HashMap<&str, &Document>,
    extractor: &Extractor<f64>,
    source: &dyn ThresholdSource,
    options: &EvalOptions,
) -> QueryDiagnostics {
    let present: Vec<_> = query
        .candidates
        .iter()
        .filter_map(|c| documents.get(c.docid.as_str()).map(|d| (c, *d)))
        .collect();
    let docs: Vec<&Document> = present.iter().map(|(_, d)| *d).collect();
    let grades: Vec<u8> = present.iter().map(|(c, _)| c.grade).collect();
    let labels: Vec<u8> = present.iter().map(|(c, _)| c.label).collect();
    let st = &query.search_time;

    let relevance = extractor.extract(&query.text, &docs, st).ok();
    let s_rel = |d: &Document| relevance.as_ref().map_or(0.0, |e| e.document_relevance(&d.docid));
    let threshold = if docs.is_empty() {
        ThresholdResult {
            t_exp: None,
            provenance: Provenance::Fallback,
            s_self: None,
            reason: Some(FallbackReason::Unresolved("no documents".into())),
        }
    } else {
        source.threshold(query, &docs)
    };

    let features = |flag: &dyn Fn(&Document) -> u8| -> Vec<FeatureVector> {
        docs.iter()
            .map(|d| {
                let signal = ExpirySignal {
                    f_exp: flag(d),
                    t_exp_used: threshold.t_exp,
                    provenance: threshold.provenance,
                    breaker_state: BreakerState::Closed,
                };
                emit_features(&signal, &d.pub_time, s_rel(d), d.authority, st)
            })
            .collect()
    };
    let expiry_flagged = |d: &Document| match (threshold.provenance, threshold.t_exp) {
        (Provenance::Fallback, _) | (_, None) => 0,
        (_, Some(t)) => expiry_flag(&d.pub_time, &t),
    };
    let recent = |d: &Document| u8::from(elapsed_days(&d.pub_time, st) <= options.recency_window_days);

    let mut systems = BTreeMap::new();
    let w = &options.weights;
    systems.insert(NO_FEATURE.to_string(), system_run(&docs, &grades, &labels, features(&|_| 0), w));
    systems.insert(RECENCY_WINDOW.to_string(), system_run(&docs, &grades, &labels, features(&recent), w));
    systems.insert(EXPIRY_AWARE.to_string(), system_run(&docs, &grades, &labels, features(&expiry_flagged), w));

    QueryDiagnostics {
        qid: query.qid.clone(),
        tier: query.tier,
        gt_expiry: query.gt_expiry,
        t_exp: threshold.t_exp,
        provenance: threshold.provenance,
        fallback_reason: threshold.reason,
        systems,
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(queries: &[QueryDiagnostics], system: &str) -> SystemMetrics {
    let runs: Vec<(&QueryDiagnostics, &SystemRun)> =
        queries.iter().map(|q| (q, &q.systems[system])).collect();
    let day_away = |pick: fn(&SystemRun) -> Option<Summary>| {
        let summaries: Vec<Summary> = runs.iter().filter_map(|(_, r)| pick(r)).collect();
        Some(Summary {
            median: mean_of(summaries.iter().map(|s| s.median))?,
            mean: mean_of(summaries.iter().map(|s| s.mean))?,
        })
    };
    let mut pairs = BTreeMap::new();
    for tier in FreshnessTier::ALL {
        let total = runs
            .iter()
            .filter(|(q, _)| q.tier == tier)
            .map(|(_, r)| r.pairs)
            .fold(PairCounts::default(), PairCounts::add);
        pairs.insert(tier, total);
    }
    SystemMetrics {
        day_away_4: day_away(|r| r.day_away_4),
        day_away_10: day_away(|r| r.day_away_10),
        pnr: pairs.iter().map(|(t, c)| (*t, c.ratio())).collect(),
        pairs,
    }
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    let d = a? - b?;
    d.is_finite().then_some(d)
}

/// Evaluates the no-feature, recency-window and expiry-aware rankings on the
/// same inputs.
pub fn run_offline_eval(
    corpus: &EvalCorpus,
    extractor: &Extractor<f64>,
    source: &dyn ThresholdSource,
    options: &EvalOptions,
) -> EvalReport {
    let documents = corpus.document_map();
    let threads = options.threads.max(1);
    let per_thread = corpus.queries.len().div_ceil(threads).max(1);
    let queries: Vec<QueryDiagnostics> = std::thread::scope(|scope| {
        let handles: Vec<_> = corpus
            .queries
            .chunks(per_thread)
            .map(|chunk| {
                let documents = &documents;
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|q| evaluate_query(q, documents, extractor, source, options))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });

    let systems: BTreeMap<String, SystemMetrics> = [NO_FEATURE, RECENCY_WINDOW, EXPIRY_AWARE]
        .iter()
        .map(|s| (s.to_string(), aggregate(&queries, s)))
        .collect();
    let (e, b) = (&systems[EXPIRY_AWARE], &systems[RECENCY_WINDOW]);
    let field = |m: &SystemMetrics, k: usize, median: bool| {
        let s = if k == 4 { m.day_away_4 } else { m.day_away_10 };
        s.map(|s| if median { s.median } else { s.mean })
    };
    let deltas = Deltas {
        day_away_4_median: diff(field(e, 4, true), field(b, 4, true)),
        day_away_4_mean: diff(field(e, 4, false), field(b, 4, false)),
        day_away_10_median: diff(field(e, 10, true), field(b, 10, true)),
        day_away_10_mean: diff(field(e, 10, false), field(b, 10, false)),
        pnr: FreshnessTier::ALL
            .iter()
            .map(|t| {
                let r = |m: &SystemMetrics| m.pnr[t].map(PairRatio::as_f64);
                (*t, diff(r(e), r(b)))
            })
            .collect(),
    };
    EvalReport {
        query_count: queries.len(),
        thresholds_resolved: queries.iter().filter(|q| q.t_exp.is_some()).count(),
        thresholds_exact: queries
            .iter()
            .filter(|q| q.t_exp.is_some() && q.t_exp == q.gt_expiry)
            .count(),
        systems,
        deltas,
        queries,
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "queries: {}  thresholds resolved: {}  exact: {}",
            self.query_count, self.thresholds_resolved, self.thresholds_exact
        );
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "system", "da@4 med", "da@4 mean", "da@10 med", "da@10 mean", "pnr none", "pnr month", "pnr week"
        );
        let num = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        let ratio = |v: Option<PairRatio>| v.map_or("-".to_string(), |r| r.to_string());
        for (name, m) in &self.systems {
            let _ = writeln!(
                out,
                "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
                name,
                num(m.day_away_4.map(|s| s.median)),
                num(m.day_away_4.map(|s| s.mean)),
                num(m.day_away_10.map(|s| s.median)),
                num(m.day_away_10.map(|s| s.mean)),
                ratio(m.pnr[&FreshnessTier::None]),
                ratio(m.pnr[&FreshnessTier::Month]),
                ratio(m.pnr[&FreshnessTier::Week]),
            );
        }
        let d = &self.deltas;
        let _ = writeln!(
            out,
            "{:<16} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
            "delta",
            num(d.day_away_4_median),
            num(d.day_away_4_mean),
            num(d.day_away_10_median),
            num(d.day_away_10_mean),
            num(d.pnr[&FreshnessTier::None]),
            num(d.pnr[&FreshnessTier::Month]),
            num(d.pnr[&FreshnessTier::Week]),
        );
        out
    }
}
