//! Query anchor parsing and time-anchored context refinement.
//!
//! Each candidate document is cut into sentence windows centred on its
//! temporal anchors (or title and lead sentences when it has none). Windows
//! are scored by a keyword-gated blend of semantic similarity and temporal
//! alignment, pooled across the query's documents, and thresholded into the
//! focused chunk set handed to inference.

mod scoring;
mod text;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use scoring::{
    combine_relevance, recency_decay, rel_k, rel_t, temporal_match_score, ScoringParams,
};
pub use text::{tokenize, Stopwords, TermFrequencyCosine, TextSimilarity};

use crate::corpus::Document;
use crate::scalar::Scalar;
use crate::temporal::{build_temporal_index, DocumentTemporalIndex, TemporalParser, TimePoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractionError {
    #[error("window size {0} must be odd and at least 1")]
    InvalidWindow(usize),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("decay rate {0} must be positive")]
    InvalidDecay(f64),
    #[error("query is empty")]
    EmptyQuery,
}

/// Centered sentence window length `L`; always odd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct WindowSize(usize);

impl WindowSize {
    pub fn new(len: usize) -> Result<Self, ExtractionError> {
        if len == 0 || len % 2 == 0 {
            return Err(ExtractionError::InvalidWindow(len));
        }
        Ok(Self(len))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn radius(self) -> usize {
        self.0 / 2
    }
}

impl Default for WindowSize {
    fn default() -> Self {
        Self(5)
    }
}

impl TryFrom<usize> for WindowSize {
    type Error = ExtractionError;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<WindowSize> for usize {
    fn from(w: WindowSize) -> usize {
        w.0
    }
}

/// Keywords `K_Q` and temporal entities `T_Q` of a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryAnchor {
    pub keywords: Vec<String>,
    pub temporal_entities: Vec<TimePoint>,
    pub raw_query: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkOrigin {
    Window,
    Title,
    Lead,
}

impl ChunkOrigin {
    pub fn is_fallback(self) -> bool {
        !matches!(self, ChunkOrigin::Window)
    }
}

/// An unscored text window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateChunk {
    pub source_id: String,
    pub origin: ChunkOrigin,
    /// Inclusive sentence range; `(0, 0)` for a title chunk.
    pub span: (usize, usize),
    pub sentences: Vec<String>,
    pub anchor_times: Vec<TimePoint>,
    pub authority: f64,
    pub pub_time: TimePoint,
}

impl CandidateChunk {
    pub fn text(&self) -> String {
        self.sentences.join(" ")
    }
}

/// A scored chunk carrying `S_rel` and its components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusedChunk<S: Scalar = f64> {
    #[serde(flatten)]
    pub chunk: CandidateChunk,
    pub rel_k: S,
    pub rel_t: S,
    pub s_rel: S,
    /// Expiry the chunk implies on its own, filled in once the evidence rules
    /// have been applied.
    #[serde(default)]
    pub validity_expiry: Option<TimePoint>,
}

impl<S: Scalar> FocusedChunk<S> {
    pub fn authority(&self) -> S {
        S::of(self.chunk.authority).clamp_unit()
    }

    pub fn source_id(&self) -> &str {
        &self.chunk.source_id
    }

    pub fn anchor_times(&self) -> &[TimePoint] {
        &self.chunk.anchor_times
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusedChunkSet<S: Scalar = f64> {
    pub chunks: Vec<FocusedChunk<S>>,
    pub fallback_used: bool,
}

impl<S: Scalar> FocusedChunkSet<S> {
    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }
}

/// One candidate window per anchor sentence, centred and truncated at the
/// document boundaries. Identical spans are merged.
pub fn window_chunks(
    doc: &Document,
    index: &DocumentTemporalIndex,
    window: WindowSize,
) -> Vec<CandidateChunk> {
    let n = doc.sentences.len();
    if n == 0 || index.is_empty() {
        return Vec::new();
    }
    let radius = window.radius();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for anchor in index.anchor_sentences() {
        if anchor >= n {
            continue;
        }
        let span = (anchor.saturating_sub(radius), (anchor + radius).min(n - 1));
        if !spans.contains(&span) {
            spans.push(span);
        }
    }
    spans
        .into_iter()
        .map(|(start, end)| CandidateChunk {
            source_id: doc.docid.clone(),
            origin: ChunkOrigin::Window,
            span: (start, end),
            sentences: doc.sentences[start..=end].to_vec(),
            anchor_times: index.times_in_span(start, end),
            authority: doc.authority,
            pub_time: doc.pub_time,
        })
        .collect()
}

/// Title plus the first `L` body sentences, for documents without anchors.
pub fn fallback_chunks(doc: &Document, window: WindowSize) -> Vec<CandidateChunk> {
    let mut chunks = Vec::new();
    let base = |origin, span, sentences| CandidateChunk {
        source_id: doc.docid.clone(),
        origin,
        span,
        sentences,
        anchor_times: Vec::new(),
        authority: doc.authority,
        pub_time: doc.pub_time,
    };
    if !doc.title.trim().is_empty() {
        chunks.push(base(ChunkOrigin::Title, (0, 0), vec![doc.title.clone()]));
    }
    if !doc.sentences.is_empty() {
        let end = window.get().min(doc.sentences.len()) - 1;
        chunks.push(base(
            ChunkOrigin::Lead,
            (0, end),
            doc.sentences[..=end].to_vec(),
        ));
    }
    chunks
}

/// Keeps chunks scoring strictly above `tau`, best first (stable on ties).
/// When nothing survives, every fallback chunk is kept and the flag is set.
pub fn select_focus<S: Scalar>(candidates: Vec<FocusedChunk<S>>, tau: S) -> FocusedChunkSet<S> {
    let (mut kept, rest): (Vec<_>, Vec<_>) = candidates.into_iter().partition(|c| c.s_rel > tau);
    let fallback_used = kept.is_empty();
    if fallback_used {
        kept = rest
            .into_iter()
            .filter(|c| c.chunk.origin.is_fallback())
            .collect();
    }
    kept.sort_by(|a, b| b.s_rel.partial_cmp(&a.s_rel).unwrap_or(std::cmp::Ordering::Equal));
    FocusedChunkSet {
        chunks: kept,
        fallback_used,
    }
}

/// Everything extraction produced for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction<S: Scalar = f64> {
    pub anchor: QueryAnchor,
    /// Every scored candidate, before thresholding, in pooled document order.
    pub scored: Vec<FocusedChunk<S>>,
    pub focus: FocusedChunkSet<S>,
}

impl<S: Scalar> Extraction<S> {
    /// Best chunk score per document, zero when it produced no candidate.
    pub fn document_relevance(&self, docid: &str) -> S {
        self.scored
            .iter()
            .filter(|c| c.chunk.source_id == docid)
            .map(|c| c.s_rel)
            .fold(S::zero(), S::max)
    }
}

/// Extraction front end bound to a parser, stopword list, similarity provider
/// and scoring parameters.
#[derive(Clone)]
pub struct Extractor<S: Scalar = f64> {
    parser: Arc<TemporalParser>,
    stopwords: Arc<Stopwords>,
    similarity: Arc<dyn TextSimilarity<S>>,
    params: ScoringParams<S>,
}

impl<S: Scalar> std::fmt::Debug for Extractor<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Extractor").field("params", &self.params).finish()
    }
}

impl<S: Scalar> Default for Extractor<S> {
    fn default() -> Self {
        Self::new(
            Arc::new(TemporalParser::default()),
            Stopwords::default(),
            ScoringParams::default(),
        )
    }
}

impl<S: Scalar> Extractor<S> {
    pub fn new(parser: Arc<TemporalParser>, stopwords: Stopwords, params: ScoringParams<S>) -> Self {
        Self {
            parser,
            stopwords: Arc::new(stopwords),
            similarity: Arc::new(TermFrequencyCosine),
            params,
        }
    }

    pub fn with_similarity(mut self, similarity: Arc<dyn TextSimilarity<S>>) -> Self {
        self.similarity = similarity;
        self
    }

    pub fn params(&self) -> &ScoringParams<S> {
        &self.params
    }

    pub fn parser(&self) -> &TemporalParser {
        &self.parser
    }

    pub fn extract_query_anchor(
        &self,
        query: &str,
        reference: &TimePoint,
    ) -> Result<QueryAnchor, ExtractionError> {
        if query.trim().is_empty() {
            return Err(ExtractionError::EmptyQuery);
        }
        let mentions = self.parser.parse_sentence(query, 0, reference);
        // Temporal expressions feed T_Q, not K_Q.
        let mut stripped = query.to_string();
        for m in mentions.iter().rev() {
            stripped.replace_range(m.start..m.end, " ");
        }
        let mut keywords: Vec<String> = Vec::new();
        for token in tokenize(&stripped) {
            if !self.stopwords.contains(&token) && !keywords.contains(&token) {
                keywords.push(token);
            }
        }
        if keywords.is_empty() {
            for token in tokenize(query) {
                if !keywords.contains(&token) {
                    keywords.push(token);
                }
            }
        }
        let mut temporal_entities = Vec::new();
        for m in mentions {
            if !temporal_entities.contains(&m.normalized) {
                temporal_entities.push(m.normalized);
            }
        }
        Ok(QueryAnchor {
            keywords,
            temporal_entities,
            raw_query: query.to_string(),
        })
    }

    /// Candidate windows for one document, or its fallback chunks when the
    /// temporal index is empty.
    pub fn candidates(&self, doc: &Document, reference: &TimePoint) -> Vec<CandidateChunk> {
        let index = build_temporal_index(&self.parser, &doc.sentences, reference);
        if index.is_empty() {
            fallback_chunks(doc, self.params.window)
        } else {
            window_chunks(doc, &index, self.params.window)
        }
    }

    /// Chunk tokens relevant for similarity: non-stopwords, plus any token
    /// that is itself a keyword.
    pub fn chunk_tokens(&self, chunk: &CandidateChunk, keywords: &[String]) -> Vec<String> {
        tokenize(&chunk.text())
            .into_iter()
            .filter(|t| !self.stopwords.contains(t) || keywords.contains(t))
            .collect()
    }

    pub fn score_chunk(
        &self,
        chunk: CandidateChunk,
        anchor: &QueryAnchor,
        reference: &TimePoint,
    ) -> FocusedChunk<S> {
        let tokens = self.chunk_tokens(&chunk, &anchor.keywords);
        let gate = tokens.iter().any(|t| anchor.keywords.contains(t));
        let rk = rel_k(self.similarity.as_ref(), &tokens, &anchor.keywords);
        let rt = rel_t(
            &chunk.anchor_times,
            &chunk.pub_time,
            &anchor.temporal_entities,
            reference,
            self.params.decay_rate,
        );
        let s_rel = combine_relevance(gate, self.params.alpha, rk, rt);
        FocusedChunk {
            chunk,
            rel_k: rk,
            rel_t: rt,
            s_rel,
            validity_expiry: None,
        }
    }

    /// Runs extraction over the query's candidate documents, pooling their
    /// chunks before thresholding.
    pub fn extract(
        &self,
        query: &str,
        docs: &[&Document],
        search_time: &TimePoint,
    ) -> Result<Extraction<S>, ExtractionError> {
        let anchor = self.extract_query_anchor(query, search_time)?;
        let scored: Vec<FocusedChunk<S>> = docs
            .iter()
            .flat_map(|doc| self.candidates(doc, search_time))
            .map(|c| self.score_chunk(c, &anchor, search_time))
            .collect();
        let focus = select_focus(scored.clone(), self.params.tau);
        Ok(Extraction {
            anchor,
            scored,
            focus,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: &str) -> TimePoint {
        s.parse().unwrap()
    }

    fn doc(n: usize, title: &str) -> Document {
        Document {
            docid: "d".into(),
            title: title.into(),
            sentences: (0..n).map(|i| format!("sentence {i}")).collect(),
            pub_time: tp("2025-05-01"),
            authority: 0.5,
            source: "test".into(),
        }
    }

    fn index_at(anchors: &[usize]) -> DocumentTemporalIndex {
        let mut index = DocumentTemporalIndex::default();
        for (k, &a) in anchors.iter().enumerate() {
            let t = TimePoint::day(2025, 1, k as u8 + 1).unwrap();
            index.entries.entry(t).or_default().push(a);
        }
        index
    }

    #[test]
    fn window_examples() {
        let d = doc(30, "t");
        let w = WindowSize::default();
        let spans = |anchors: &[usize]| -> Vec<(usize, usize)> {
            window_chunks(&d, &index_at(anchors), w)
                .iter()
                .map(|c| c.span)
                .collect()
        };
        assert_eq!(spans(&[10]), vec![(8, 12)]);
        assert_eq!(spans(&[0]), vec![(0, 2)]);
        assert_eq!(spans(&[3, 4]), vec![(1, 5), (2, 6)]);
        assert_eq!(spans(&[29]), vec![(27, 29)]);
        assert!(window_chunks(&d, &DocumentTemporalIndex::default(), w).is_empty());
    }

    #[test]
    fn duplicate_spans_merge() {
        // Both anchors of a 2-sentence doc produce the clamped span (0, 1).
        let d = doc(2, "t");
        let chunks = window_chunks(&d, &index_at(&[0, 1]), WindowSize::default());
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].span, (0, 1));
        assert_eq!(chunks[0].anchor_times.len(), 2);
    }

    #[test]
    fn window_size_must_be_odd() {
        assert!(WindowSize::new(4).is_err());
        assert!(WindowSize::new(0).is_err());
        assert_eq!(WindowSize::new(3).unwrap().radius(), 1);
    }

    #[test]
    fn fallback_examples() {
        let w = WindowSize::default();
        let spans = |d: &Document| -> Vec<(ChunkOrigin, (usize, usize))> {
            fallback_chunks(d, w).iter().map(|c| (c.origin, c.span)).collect()
        };
        assert_eq!(
            spans(&doc(20, "Title")),
            vec![(ChunkOrigin::Title, (0, 0)), (ChunkOrigin::Lead, (0, 4))]
        );
        assert_eq!(
            spans(&doc(3, "Title")),
            vec![(ChunkOrigin::Title, (0, 0)), (ChunkOrigin::Lead, (0, 2))]
        );
        assert_eq!(spans(&doc(0, "Title")), vec![(ChunkOrigin::Title, (0, 0))]);
        assert!(spans(&doc(0, "")).is_empty());
    }

    #[test]
    fn query_anchor_examples() {
        let ex = Extractor::<f64>::default();
        let r = tp("2025-06-01");
        let a = ex.extract_query_anchor("Traffic Regulations", &r).unwrap();
        assert_eq!(a.keywords, vec!["traffic", "regulations"]);
        assert!(a.temporal_entities.is_empty());
        let a = ex.extract_query_anchor("hong kong fire", &r).unwrap();
        assert_eq!(a.keywords, vec!["hong", "kong", "fire"]);
        assert!(a.temporal_entities.is_empty());
        let a = ex.extract_query_anchor("tax policy 2025", &r).unwrap();
        assert_eq!(a.temporal_entities, vec![tp("2025")]);
        assert_eq!(a.keywords, vec!["tax", "policy"]);
    }

    #[test]
    fn all_stopword_query_keeps_raw_tokens() {
        let ex = Extractor::<f64>::default();
        let a = ex.extract_query_anchor("what is the", &tp("2025-06-01")).unwrap();
        assert_eq!(a.keywords, vec!["what", "is", "the"]);
        assert!(ex.extract_query_anchor("   ", &tp("2025-06-01")).is_err());
    }

    fn scored(s: f64, origin: ChunkOrigin, id: &str) -> FocusedChunk<f64> {
        FocusedChunk {
            chunk: CandidateChunk {
                source_id: id.into(),
                origin,
                span: (0, 0),
                sentences: vec![],
                anchor_times: vec![],
                authority: 1.0,
                pub_time: tp("2025-01-01"),
            },
            rel_k: 0.0,
            rel_t: 0.0,
            s_rel: s,
            validity_expiry: None,
        }
    }

    #[test]
    fn select_focus_filters_and_sorts() {
        let set = select_focus(
            vec![
                scored(0.9, ChunkOrigin::Window, "a"),
                scored(0.4, ChunkOrigin::Window, "b"),
                scored(0.7, ChunkOrigin::Window, "c"),
            ],
            0.5,
        );
        let kept: Vec<f64> = set.chunks.iter().map(|c| c.s_rel).collect();
        assert_eq!(kept, vec![0.9, 0.7]);
        assert!(!set.fallback_used);
    }

    #[test]
    fn select_focus_falls_back() {
        let set = select_focus(
            vec![
                scored(0.1, ChunkOrigin::Title, "a"),
                scored(0.2, ChunkOrigin::Lead, "a"),
                scored(0.3, ChunkOrigin::Window, "b"),
            ],
            0.5,
        );
        assert!(set.fallback_used);
        assert_eq!(set.len(), 2);
        assert!(set.chunks.iter().all(|c| c.chunk.origin.is_fallback()));

        let empty = select_focus::<f64>(vec![], 0.5);
        assert!(empty.is_empty());
        assert!(empty.fallback_used);
    }

    #[test]
    fn ties_keep_document_order() {
        let set = select_focus(
            vec![
                scored(0.6, ChunkOrigin::Window, "first"),
                scored(0.8, ChunkOrigin::Window, "top"),
                scored(0.6, ChunkOrigin::Window, "second"),
            ],
            0.5,
        );
        let ids: Vec<&str> = set.chunks.iter().map(|c| c.source_id()).collect();
        assert_eq!(ids, vec!["top", "first", "second"]);
    }

    #[test]
    fn extract_pools_documents() {
        let ex = Extractor::<f64>::default();
        let d1 = Document {
            docid: "d1".into(),
            title: "Fire update".into(),
            sentences: vec![
                "A fire broke out in Hong Kong on 2025-05-28.".into(),
                "Crews responded quickly.".into(),
            ],
            pub_time: tp("2025-05-29"),
            authority: 0.9,
            source: "news".into(),
        };
        let d2 = Document {
            docid: "d2".into(),
            title: "Cooking tips".into(),
            sentences: vec!["Slice the onions.".into()],
            pub_time: tp("2025-05-01"),
            authority: 0.3,
            source: "blog".into(),
        };
        let out = ex.extract("hong kong fire", &[&d1, &d2], &tp("2025-06-01")).unwrap();
        assert_eq!(out.scored.len(), 3);
        assert_eq!(out.focus.len(), 1);
        assert_eq!(out.focus.chunks[0].source_id(), "d1");
        assert!(out.document_relevance("d1") > 0.35);
        assert_eq!(out.document_relevance("d2"), 0.0);
        assert_eq!(out.document_relevance("missing"), 0.0);
    }
}
