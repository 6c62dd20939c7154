//! Extraction, inference and fusion composed into one query-level run.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::extraction::{
    tokenize, ExtractionError, Extractor, FocusedChunk, FocusedChunkSet, QueryAnchor,
};
use crate::fusion::{fuse, ExpirationVerdict, FusionError};
use crate::inference::{
    consistency_penalty, infer_forward, objective_against, verify_backward, InferenceError,
    InferenceOutcome, ObjectiveWeights, PromptBuilder, PromptMode, ReasoningBackend, RuleTable,
    StepKind,
};
use crate::scalar::Scalar;
use crate::temporal::TimePoint;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun<S: Scalar = f64> {
    pub anchor: QueryAnchor,
    pub domain: String,
    pub focus: FocusedChunkSet<S>,
    pub outcome: InferenceOutcome<S>,
    pub verdict: ExpirationVerdict<S>,
    pub l_cons: S,
}

#[derive(Clone)]
pub struct Pipeline<S: Scalar = f64> {
    extractor: Extractor<S>,
    prompts: PromptBuilder,
    rules: Arc<RuleTable>,
    backend: Arc<dyn ReasoningBackend>,
    objective: ObjectiveWeights<S>,
    samples: usize,
}

impl<S: Scalar> std::fmt::Debug for Pipeline<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("backend", &self.backend.name())
            .field("samples", &self.samples)
            .finish()
    }
}

impl<S: Scalar> Pipeline<S> {
    pub fn new(
        extractor: Extractor<S>,
        prompts: PromptBuilder,
        rules: Arc<RuleTable>,
        backend: Arc<dyn ReasoningBackend>,
    ) -> Self {
        Self {
            extractor,
            prompts,
            rules,
            backend,
            objective: ObjectiveWeights::default(),
            samples: 3,
        }
    }

    pub fn with_objective(mut self, objective: ObjectiveWeights<S>) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(1);
        self
    }

    pub fn backend(&self) -> &dyn ReasoningBackend {
        self.backend.as_ref()
    }

    pub fn extractor(&self) -> &Extractor<S> {
        &self.extractor
    }

    pub fn rules(&self) -> &RuleTable {
        &self.rules
    }

    /// Fills in each chunk's rule-derived expiry.
    fn annotate(&self, focus: &mut FocusedChunkSet<S>, query: &str, search_time: &TimePoint) {
        let query_tokens = tokenize(query);
        for chunk in &mut focus.chunks {
            let ev = self.rules.evidence(
                self.extractor.parser(),
                &query_tokens,
                &chunk.chunk.sentences,
                search_time,
            );
            chunk.validity_expiry = ev.implied_expiry;
        }
    }

    fn infer_once(
        &self,
        anchor: &QueryAnchor,
        domain: &str,
        focus: &FocusedChunkSet<S>,
        search_time: &TimePoint,
    ) -> Result<InferenceOutcome<S>, InferenceError> {
        let backend = self.backend.as_ref();
        let fwd_prompt = self.prompts.build(anchor, domain, focus, search_time, PromptMode::Forward)?;
        let forward = infer_forward(backend, &fwd_prompt)?;
        let bwd_prompt = self.prompts.build(
            anchor,
            domain,
            focus,
            search_time,
            PromptMode::Backward { candidate: forward.t_init },
        )?;
        let check = verify_backward(backend, &bwd_prompt, &forward)?;
        Ok(InferenceOutcome::assemble(forward, check))
    }

    /// Among several sampled outcomes keeps the one closest to the consensus
    /// fused over all their candidates.
    fn select(&self, outcomes: Vec<InferenceOutcome<S>>, focus: &FocusedChunkSet<S>) -> InferenceOutcome<S> {
        if outcomes.len() == 1 {
            return outcomes.into_iter().next().expect("one outcome");
        }
        let mut pooled: Vec<TimePoint> = Vec::new();
        for o in &outcomes {
            for c in &o.candidates {
                if !pooled.contains(c) {
                    pooled.push(*c);
                }
            }
        }
        let consensus = fuse(&pooled, focus, &outcomes[0]).ok().map(|v| v.t_exp);
        let score = |o: &InferenceOutcome<S>| match consensus {
            Some(t) => objective_against(&o.t_init, &t, o.s_self, &self.objective),
            None => consistency_penalty(o.s_self),
        };
        let mut best = 0;
        for i in 1..outcomes.len() {
            if score(&outcomes[i]) < score(&outcomes[best]) {
                best = i;
            }
        }
        outcomes.into_iter().nth(best).expect("index in range")
    }

    pub fn run(
        &self,
        query: &str,
        docs: &[&Document],
        search_time: &TimePoint,
    ) -> Result<PipelineRun<S>, PipelineError> {
        let extraction = self.extractor.extract(query, docs, search_time)?;
        let mut focus = extraction.focus;
        self.annotate(&mut focus, query, search_time);
        let domain = self.rules.query_domain(query);
        let draws = if self.backend.supports_sampling() { self.samples } else { 1 };

        let mut outcomes = Vec::with_capacity(draws);
        let mut first_error = None;
        for _ in 0..draws {
            match self.infer_once(&extraction.anchor, &domain, &focus, search_time) {
                Ok(o) => outcomes.push(o),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        if outcomes.is_empty() {
            return Err(first_error.expect("at least one draw").into());
        }
        let outcome = self.select(outcomes, &focus);
        let verdict = fuse(&outcome.candidates, &focus, &outcome)?;
        Ok(PipelineRun {
            anchor: extraction.anchor,
            domain,
            l_cons: consistency_penalty(outcome.s_self),
            focus,
            outcome,
            verdict,
        })
    }

    /// Most recent event a forward pass over the document alone asserts.
    pub fn content_time(&self, doc: &Document, reference: &TimePoint) -> Result<TimePoint, PipelineError> {
        let mut chunks: Vec<FocusedChunk<S>> = self
            .extractor
            .candidates(doc, reference)
            .into_iter()
            .map(|chunk| FocusedChunk {
                chunk,
                rel_k: S::one(),
                rel_t: S::one(),
                s_rel: S::one(),
                validity_expiry: None,
            })
            .collect();
        let latest = |c: &FocusedChunk<S>| {
            c.chunk
                .anchor_times
                .iter()
                .map(TimePoint::resolved_day)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        chunks.sort_by(|a, b| latest(b).total_cmp(&latest(a)));
        let focus = FocusedChunkSet { chunks, fallback_used: false };
        let query = if doc.title.trim().is_empty() { doc.docid.as_str() } else { doc.title.as_str() };
        let anchor = QueryAnchor {
            keywords: tokenize(query),
            temporal_entities: vec![],
            raw_query: query.to_string(),
        };
        let domain = self.rules.query_domain(query);
        let prompt = self.prompts.build(&anchor, &domain, &focus, reference, PromptMode::Forward)?;
        let forward = infer_forward(self.backend.as_ref(), &prompt)?;
        forward
            .trajectory
            .steps
            .iter()
            .filter(|s| s.kind == StepKind::Event)
            .filter_map(|s| s.time)
            .max_by(|a, b| a.resolved_day().total_cmp(&b.resolved_day()))
            .ok_or(PipelineError::Inference(InferenceError::NoVerdict))
    }
}
