//! Temporal inference: prompt construction, reasoning backends, and the
//! forward-backward consistency check.
//!
//! A forward pass proposes an initial expiration `t_init` together with the
//! other expirations its trajectory considered. A backward pass then assumes
//! `t_init` and re-reads the evidence: each forward step whose date it
//! confirms raises the self-consistency score, and any superseding evidence
//! it finds zeroes the score and adds the superseding expiry to the candidate
//! set.

mod objective;
mod oracle;
mod prompt;
mod remote;
mod rules;
mod scripted;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use objective::{
    consistency_penalty, granularity_penalty, objective_against, temporal_objective, time_distance, ObjectiveWeights,
};
pub use oracle::OracleBackend;
pub use prompt::{Exemplar, PromptBuilder, PromptBundle, PromptChunk, PromptMode, NEGATIVE_CONSTRAINTS};
pub use remote::{RemoteBackend, RemoteConfig};
pub use rules::{
    ChunkEvidence, Classification, EventClassRule, PeriodicRule, RuleTable, RuleTableError,
};
pub use scripted::{FailingBackend, ScriptedBackend};

use crate::scalar::Scalar;
use crate::temporal::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    /// The chunk reports an event at `time`.
    Event,
    /// The chunk implies content expires at `time`.
    Expiry,
    /// Backward pass: the date at `time` is consistent with the candidate.
    Confirm,
    /// Backward pass: superseding evidence implies expiry at `time`.
    Contradict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub claim: String,
    pub chunk_id: usize,
    #[serde(default)]
    pub time: Option<TimePoint>,
    pub kind: StepKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conclusion {
    Time(TimePoint),
    Indeterminate,
}

impl Serialize for Conclusion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Conclusion::Time(t) => t.serialize(serializer),
            Conclusion::Indeterminate => serializer.serialize_str("indeterminate"),
        }
    }
}

impl<'de> Deserialize<'de> for Conclusion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        if raw.trim().eq_ignore_ascii_case("indeterminate") {
            return Ok(Conclusion::Indeterminate);
        }
        raw.parse().map(Conclusion::Time).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningTrajectory {
    pub steps: Vec<ReasoningStep>,
    pub conclusion: Conclusion,
}

/// Structured reply of a reasoning backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    #[serde(flatten)]
    pub trajectory: ReasoningTrajectory,
    #[serde(default)]
    pub self_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend deadline exceeded")]
    Timeout,
    #[error("response failed schema validation: {0}")]
    Schema(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InferenceError {
    #[error("no evidence")]
    NoEvidence,
    #[error("no verdict")]
    NoVerdict,
    #[error("prompt is in {0} mode")]
    WrongMode(&'static str),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Anything that turns a prompt into a structured reasoning trajectory.
pub trait ReasoningBackend: Send + Sync {
    fn name(&self) -> &str;

    fn respond(&self, prompt: &PromptBundle) -> Result<BackendResponse, BackendError>;

    /// Whether repeated calls on the same prompt may differ.
    fn supports_sampling(&self) -> bool {
        false
    }
}

/// Result of a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardPass {
    pub t_init: TimePoint,
    /// `t_init` first, then every other expiry the trajectory asserted.
    pub candidates: Vec<TimePoint>,
    pub trajectory: ReasoningTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardCheck<S: Scalar = f64> {
    pub trajectory: ReasoningTrajectory,
    pub s_self: S,
    /// Superseding expiries not among the forward candidates.
    pub superseding: Vec<TimePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOutcome<S: Scalar = f64> {
    pub t_init: TimePoint,
    pub candidates: Vec<TimePoint>,
    pub forward: ReasoningTrajectory,
    pub backward: ReasoningTrajectory,
    pub s_self: S,
}

impl<S: Scalar> InferenceOutcome<S> {
    pub fn assemble(forward: ForwardPass, check: BackwardCheck<S>) -> Self {
        let mut candidates = forward.candidates;
        for t in check.superseding {
            if !candidates.contains(&t) {
                candidates.push(t);
            }
        }
        Self {
            t_init: forward.t_init,
            candidates,
            forward: forward.trajectory,
            backward: check.trajectory,
            s_self: check.s_self,
        }
    }

    pub fn consistency_penalty(&self) -> S {
        consistency_penalty(self.s_self)
    }
}

fn check_citations(prompt: &PromptBundle, trajectory: &ReasoningTrajectory) -> Result<(), BackendError> {
    for step in &trajectory.steps {
        if prompt.chunk(step.chunk_id).is_none() {
            return Err(BackendError::Schema(format!(
                "step cites unknown chunk {}",
                step.chunk_id
            )));
        }
    }
    Ok(())
}

pub fn infer_forward(
    backend: &dyn ReasoningBackend,
    prompt: &PromptBundle,
) -> Result<ForwardPass, InferenceError> {
    if prompt.mode != PromptMode::Forward {
        return Err(InferenceError::WrongMode("backward"));
    }
    let response = backend.respond(prompt)?;
    check_citations(prompt, &response.trajectory)?;
    let t_init = match response.trajectory.conclusion {
        Conclusion::Time(t) => t,
        Conclusion::Indeterminate => return Err(InferenceError::NoVerdict),
    };
    let mut candidates = vec![t_init];
    for step in &response.trajectory.steps {
        if let (StepKind::Expiry, Some(t)) = (step.kind, step.time) {
            if !candidates.contains(&t) {
                candidates.push(t);
            }
        }
    }
    Ok(ForwardPass {
        t_init,
        candidates,
        trajectory: response.trajectory,
    })
}

/// Runs the backward stress test and scores agreement with the forward pass.
///
/// The score is the backend's self-reported value when it gives one, else the
/// fraction of dated forward steps the backward pass confirms. New superseding
/// evidence forces it to zero.
pub fn verify_backward<S: Scalar>(
    backend: &dyn ReasoningBackend,
    prompt: &PromptBundle,
    forward: &ForwardPass,
) -> Result<BackwardCheck<S>, InferenceError> {
    if prompt.candidate().is_none() {
        return Err(InferenceError::WrongMode("forward"));
    }
    let response = backend.respond(prompt)?;
    check_citations(prompt, &response.trajectory)?;
    let backward = response.trajectory;

    let dated: Vec<&ReasoningStep> = forward
        .trajectory
        .steps
        .iter()
        .filter(|s| s.time.is_some() && matches!(s.kind, StepKind::Event | StepKind::Expiry))
        .collect();
    let confirmed = dated
        .iter()
        .filter(|f| {
            backward.steps.iter().any(|b| {
                b.kind == StepKind::Confirm && b.chunk_id == f.chunk_id && b.time == f.time
            })
        })
        .count();
    let fraction = if dated.is_empty() {
        S::zero()
    } else {
        S::of(confirmed as f64) / S::of(dated.len() as f64)
    };
    let mut s_self = match response.self_score {
        Some(v) if v.is_finite() => S::of(v).clamp_unit(),
        Some(_) => return Err(BackendError::Schema("self_score is not finite".into()).into()),
        None => fraction,
    };

    let mut superseding = Vec::new();
    for step in &backward.steps {
        if let (StepKind::Contradict, Some(t)) = (step.kind, step.time) {
            if !forward.candidates.contains(&t) && !superseding.contains(&t) {
                superseding.push(t);
            }
        }
    }
    if !superseding.is_empty() {
        s_self = S::zero();
    }
    Ok(BackwardCheck {
        trajectory: backward,
        s_self,
        superseding,
    })
}
