use std::sync::Arc;

use crate::extraction::tokenize;
use crate::temporal::{TemporalParser, TimePoint};

use super::{
    BackendError, BackendResponse, ChunkEvidence, Conclusion, PromptBundle, PromptMode,
    ReasoningBackend, ReasoningStep, ReasoningTrajectory, RuleTable, StepKind,
};

/// Deterministic rule-driven reasoner.
///
/// Forward: the primary chunk is the first one with an explicit validity
/// statement, else the first chunk with a dated event; its implied expiry is
/// the conclusion. Chunks whose events postdate the primary event are left out
/// of the forward trajectory, which is what the backward pass can then catch.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    rules: Arc<RuleTable>,
    parser: Arc<TemporalParser>,
}

impl Default for OracleBackend {
    fn default() -> Self {
        Self::new(Arc::new(RuleTable::default()), Arc::new(TemporalParser::default()))
    }
}

impl OracleBackend {
    pub fn new(rules: Arc<RuleTable>, parser: Arc<TemporalParser>) -> Self {
        Self { rules, parser }
    }

    fn evidence(&self, prompt: &PromptBundle) -> Vec<(usize, ChunkEvidence)> {
        let query_tokens = tokenize(&prompt.query);
        prompt
            .chunks
            .iter()
            .map(|c| {
                let ev = self
                    .rules
                    .evidence(&self.parser, &query_tokens, &c.sentences, &prompt.search_time);
                (c.id, ev)
            })
            .filter(|(_, ev)| ev.implied_expiry.is_some())
            .collect()
    }

    fn forward(&self, evidence: &[(usize, ChunkEvidence)]) -> ReasoningTrajectory {
        let primary = evidence
            .iter()
            .find(|(_, ev)| ev.explicit_expiry.is_some())
            .or_else(|| evidence.first());
        let Some((_, primary)) = primary else {
            return ReasoningTrajectory {
                steps: vec![],
                conclusion: Conclusion::Indeterminate,
            };
        };
        let cutoff = primary.event_time.map(|t| t.resolved_day());
        let mut steps = Vec::new();
        for (id, ev) in evidence {
            let included = match (ev.event_time, cutoff) {
                (Some(t), Some(c)) => t.resolved_day() <= c,
                _ => true,
            };
            if !included {
                continue;
            }
            push_steps(&mut steps, *id, ev, StepKind::Event, StepKind::Expiry);
        }
        ReasoningTrajectory {
            steps,
            conclusion: primary
                .implied_expiry
                .map_or(Conclusion::Indeterminate, Conclusion::Time),
        }
    }

    fn backward(&self, evidence: &[(usize, ChunkEvidence)], candidate: TimePoint) -> ReasoningTrajectory {
        let limit = candidate.resolved_day();
        let mut steps = Vec::new();
        for (id, ev) in evidence {
            let Some(expiry) = ev.implied_expiry else { continue };
            if expiry.resolved_day() <= limit {
                push_steps(&mut steps, *id, ev, StepKind::Confirm, StepKind::Confirm);
            } else if ev.supersedes {
                steps.push(ReasoningStep {
                    claim: format!(
                        "chunk {id} reports a later development implying expiry {expiry}"
                    ),
                    chunk_id: *id,
                    time: Some(expiry),
                    kind: StepKind::Contradict,
                });
            }
        }
        ReasoningTrajectory {
            steps,
            conclusion: Conclusion::Time(candidate),
        }
    }
}

fn push_steps(
    steps: &mut Vec<ReasoningStep>,
    id: usize,
    ev: &ChunkEvidence,
    event_kind: StepKind,
    expiry_kind: StepKind,
) {
    if let Some(t) = ev.event_time {
        steps.push(ReasoningStep {
            claim: format!("chunk {id}: {} event on {t}", ev.classification.class),
            chunk_id: id,
            time: Some(t),
            kind: event_kind,
        });
    }
    if let Some(x) = ev.implied_expiry {
        let claim = if ev.explicit_expiry.is_some() {
            format!("chunk {id}: explicitly valid until {x}")
        } else {
            format!(
                "chunk {id}: valid for {} days, expires {x}",
                ev.classification.validity_days
            )
        };
        steps.push(ReasoningStep {
            claim,
            chunk_id: id,
            time: Some(x),
            kind: expiry_kind,
        });
    }
}

impl ReasoningBackend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn respond(&self, prompt: &PromptBundle) -> Result<BackendResponse, BackendError> {
        let evidence = self.evidence(prompt);
        let trajectory = match prompt.mode {
            PromptMode::Forward => self.forward(&evidence),
            PromptMode::Backward { candidate } => self.backward(&evidence, candidate),
        };
        Ok(BackendResponse {
            trajectory,
            self_score: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{infer_forward, verify_backward, BackwardCheck, InferenceOutcome, PromptChunk};

    fn tp(s: &str) -> TimePoint {
        s.parse().unwrap()
    }

    fn bundle(query: &str, chunks: &[&str], mode: PromptMode) -> PromptBundle {
        PromptBundle {
            query: query.into(),
            query_times: vec![],
            domain: "x".into(),
            chunks: chunks
                .iter()
                .enumerate()
                .map(|(i, s)| PromptChunk {
                    id: i + 1,
                    source_id: format!("d{i}"),
                    sentences: vec![s.to_string()],
                    anchor_times: vec![],
                    authority: 1.0,
                    s_rel: 1.0,
                })
                .collect(),
            search_time: tp("2025-06-01"),
            few_shot: vec![],
            negative_constraints: vec![],
            mode,
        }
    }

    fn run(query: &str, chunks: &[&str]) -> InferenceOutcome<f64> {
        let oracle = OracleBackend::default();
        let fwd = infer_forward(&oracle, &bundle(query, chunks, PromptMode::Forward)).unwrap();
        let bwd = bundle(query, chunks, PromptMode::Backward { candidate: fwd.t_init });
        let check: BackwardCheck<f64> = verify_backward(&oracle, &bwd, &fwd).unwrap();
        InferenceOutcome::assemble(fwd, check)
    }

    #[test]
    fn explicit_validity_is_consistent() {
        let out = run("parking permit", &["The permit is valid until 2025-12-31."]);
        assert_eq!(out.t_init, tp("2025-12-31"));
        assert_eq!(out.s_self, 1.0);
        assert_eq!(out.candidates, vec![tp("2025-12-31")]);
    }

    #[test]
    fn superseding_development_is_caught() {
        let out = run(
            "harbour fire",
            &[
                "A fire broke out at the harbour on 2025-05-20.",
                "The harbour fire was extinguished on 2025-05-30.",
            ],
        );
        assert_eq!(out.t_init, tp("2025-05-23"));
        assert_eq!(out.s_self, 0.0);
        assert!(out.candidates.contains(&tp("2025-06-02")));
    }

    #[test]
    fn no_dates_is_indeterminate() {
        let oracle = OracleBackend::default();
        let r = oracle
            .respond(&bundle("q", &["nothing dated here"], PromptMode::Forward))
            .unwrap();
        assert_eq!(r.trajectory.conclusion, Conclusion::Indeterminate);
    }
}
