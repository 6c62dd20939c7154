use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{load_records, CorpusError};
use crate::extraction::{FocusedChunkSet, QueryAnchor};
use crate::scalar::Scalar;
use crate::temporal::TimePoint;

use super::InferenceError;

pub const NEGATIVE_CONSTRAINTS: &[&str] = &[
    "Do not extract auxiliary dates that do not bear on when the answer stops being valid.",
    "Do not conflate distinct temporal entities; keep each event with its own date.",
    "Do not invent dates absent from the evidence; complete partial dates only from the search time.",
];

pub(crate) const RESPONSE_SCHEMA: &str = r#"{"steps":[{"claim":string,"chunk_id":integer,"time":"YYYY|YYYY-Qn|YYYY-MM|YYYY-MM-DD"|null,"kind":"event"|"expiry"|"confirm"|"contradict"}],"conclusion":"YYYY|YYYY-Qn|YYYY-MM|YYYY-MM-DD"|"indeterminate","self_score":number|null}"#;

/// A worked example shown to the reasoner for its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exemplar {
    pub domain: String,
    pub query: String,
    pub chunks: Vec<String>,
    pub reasoning: String,
    pub expiration: TimePoint,
}

impl Exemplar {
    pub fn load_all(path: &Path) -> Result<Vec<Exemplar>, CorpusError> {
        load_records(path, |e: &Exemplar| {
            if e.domain.trim().is_empty() {
                Err("domain is empty".into())
            } else {
                Ok(())
            }
        })
    }

    pub fn builtin() -> Vec<Exemplar> {
        let ex = |domain: &str, query: &str, chunk: &str, reasoning: &str, expiration: &str| Exemplar {
            domain: domain.into(),
            query: query.into(),
            chunks: vec![chunk.into()],
            reasoning: reasoning.into(),
            expiration: expiration.parse().expect("valid builtin date"),
        };
        vec![
            ex(
                "breaking_news",
                "harbour warehouse fire",
                "Firefighters extinguished the warehouse blaze on 2024-03-02.",
                "The latest development is the extinguishment on 2024-03-02; breaking coverage stays current for three days.",
                "2024-03-05",
            ),
            ex(
                "policy",
                "parking regulations",
                "The revised parking regulations took effect on 2019-07-01.",
                "Regulations stay in force for years; start 2019-07-01 plus the ten-year validity.",
                "2029-06-28",
            ),
            ex(
                "scheduled_event",
                "city marathon",
                "The city marathon will be held on 2024-10-20.",
                "A scheduled event is current until it takes place on 2024-10-20.",
                "2024-10-20",
            ),
            ex(
                "periodic_weekly",
                "weekly fuel prices",
                "The weekly fuel price bulletin was issued on 2024-05-06.",
                "A weekly bulletin is replaced one period after 2024-05-06.",
                "2024-05-13",
            ),
            ex(
                "sports_fixture",
                "derby match result",
                "The derby match was played on 2024-09-14.",
                "Fixture coverage is current for one day after the match.",
                "2024-09-15",
            ),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PromptMode {
    Forward,
    Backward { candidate: TimePoint },
}

/// One numbered evidence block. Ids start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptChunk {
    pub id: usize,
    pub source_id: String,
    pub sentences: Vec<String>,
    pub anchor_times: Vec<TimePoint>,
    pub authority: f64,
    pub s_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub query: String,
    pub query_times: Vec<TimePoint>,
    pub domain: String,
    pub chunks: Vec<PromptChunk>,
    /// Absolute anchor, always a full date.
    pub search_time: TimePoint,
    pub few_shot: Vec<Exemplar>,
    pub negative_constraints: Vec<String>,
    pub mode: PromptMode,
}

impl PromptBundle {
    pub fn chunk(&self, id: usize) -> Option<&PromptChunk> {
        self.chunks.iter().find(|c| c.id == id)
    }

    pub fn candidate(&self) -> Option<TimePoint> {
        match self.mode {
            PromptMode::Forward => None,
            PromptMode::Backward { candidate } => Some(candidate),
        }
    }

    /// Deterministic text rendering sent to text-completion backends.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let direction = match self.mode {
            PromptMode::Forward => "forward",
            PromptMode::Backward { .. } => "backward",
        };
        let times = |ts: &[TimePoint]| -> String {
            if ts.is_empty() {
                "none".to_string()
            } else {
                ts.iter().map(TimePoint::to_string).collect::<Vec<_>>().join(", ")
            }
        };
        let _ = writeln!(out, "## Content expiration inference ({direction})");
        let _ = writeln!(out, "Query: {}", self.query);
        let _ = writeln!(out, "Query times: {}", times(&self.query_times));
        let _ = writeln!(out, "Domain: {}", self.domain);
        let _ = writeln!(out, "Search time: {}", self.search_time);
        let _ = writeln!(out);
        let _ = writeln!(out, "## Evidence");
        for c in &self.chunks {
            let _ = writeln!(
                out,
                "[chunk {}] source={} authority={:.3} relevance={:.3} times={}",
                c.id,
                c.source_id,
                c.authority,
                c.s_rel,
                times(&c.anchor_times)
            );
            let _ = writeln!(out, "{}", c.sentences.join(" "));
        }
        if !self.few_shot.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "## Examples");
            for e in &self.few_shot {
                let _ = writeln!(out, "Example query: {}", e.query);
                for chunk in &e.chunks {
                    let _ = writeln!(out, "  Evidence: {chunk}");
                }
                let _ = writeln!(out, "  Reasoning: {}", e.reasoning);
                let _ = writeln!(out, "  Expiration: {}", e.expiration);
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "## Constraints");
        for c in &self.negative_constraints {
            let _ = writeln!(out, "- {c}");
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "## Instructions");
        match self.mode {
            PromptMode::Forward => {
                let _ = writeln!(
                    out,
                    "Relative to the search time, infer the timestamp after which content for this query counts as current: \
                     find each event's start time and validity period, reason step by step citing chunk ids, \
                     and conclude with a single expiration timestamp."
                );
            }
            PromptMode::Backward { candidate } => {
                let _ = writeln!(out, "Candidate expiration under test: {candidate}");
                let _ = writeln!(
                    out,
                    "Assume the candidate is correct and re-derive what each evidence chunk implies. \
                     Confirm the dates that agree with it and report any later superseding event as a contradiction."
                );
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "## Response format");
        let _ = writeln!(out, "{RESPONSE_SCHEMA}");
        out
    }
}

/// Assembles prompts from focused chunks, selecting exemplars by domain.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    exemplars: Vec<Exemplar>,
    max_exemplars: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        Self::new(Exemplar::builtin())
    }
}

impl PromptBuilder {
    pub fn new(exemplars: Vec<Exemplar>) -> Self {
        Self {
            exemplars,
            max_exemplars: 2,
        }
    }

    pub fn exemplars_for(&self, domain: &str) -> Vec<Exemplar> {
        self.exemplars
            .iter()
            .filter(|e| e.domain == domain)
            .take(self.max_exemplars)
            .cloned()
            .collect()
    }

    pub fn build<S: Scalar>(
        &self,
        anchor: &QueryAnchor,
        domain: &str,
        focus: &FocusedChunkSet<S>,
        search_time: &TimePoint,
        mode: PromptMode,
    ) -> Result<PromptBundle, InferenceError> {
        if focus.is_empty() {
            return Err(InferenceError::NoEvidence);
        }
        let chunks = focus
            .chunks
            .iter()
            .enumerate()
            .map(|(i, c)| PromptChunk {
                id: i + 1,
                source_id: c.chunk.source_id.clone(),
                sentences: c.chunk.sentences.clone(),
                anchor_times: c.chunk.anchor_times.clone(),
                authority: c.chunk.authority,
                s_rel: c.s_rel.as_f64(),
            })
            .collect();
        let search_time = if search_time.depth() == 3 {
            *search_time
        } else {
            TimePoint::from_date(search_time.midpoint_date()).expect("midpoint is a valid date")
        };
        Ok(PromptBundle {
            query: anchor.raw_query.clone(),
            query_times: anchor.temporal_entities.clone(),
            domain: domain.to_string(),
            chunks,
            search_time,
            few_shot: self.exemplars_for(domain),
            negative_constraints: NEGATIVE_CONSTRAINTS.iter().map(|s| s.to_string()).collect(),
            mode,
        })
    }
}
