use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::prompt::RESPONSE_SCHEMA;
use super::{
    BackendError, BackendResponse, Conclusion, PromptBundle, ReasoningBackend, ReasoningStep,
    ReasoningTrajectory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default = "RemoteConfig::default_deadline_ms")]
    pub deadline_ms: u64,
    #[serde(default = "RemoteConfig::default_max_in_flight")]
    pub max_in_flight: usize,
}

impl RemoteConfig {
    fn default_deadline_ms() -> u64 {
        800
    }

    fn default_max_in_flight() -> usize {
        8
    }

    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            deadline_ms: Self::default_deadline_ms(),
            max_in_flight: Self::default_max_in_flight(),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    prompt: String,
    response_schema: &'a str,
    mode: &'a str,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireResponse {
    steps: Vec<ReasoningStep>,
    conclusion: Conclusion,
    #[serde(deserialize_with = "Option::deserialize")]
    self_score: Option<f64>,
}

/// Validates a raw response body against the structured-output contract.
pub(crate) fn parse_response(body: &str) -> Result<BackendResponse, BackendError> {
    let wire: WireResponse =
        serde_json::from_str(body).map_err(|e| BackendError::Schema(e.to_string()))?;
    if let Some(s) = wire.self_score {
        if !s.is_finite() {
            return Err(BackendError::Schema("self_score is not finite".into()));
        }
    }
    Ok(BackendResponse {
        trajectory: ReasoningTrajectory {
            steps: wire.steps,
            conclusion: wire.conclusion,
        },
        self_score: wire.self_score.map(|s| s.clamp(0.0, 1.0)),
    })
}

/// Counting gate bounding outstanding calls.
#[derive(Debug)]
struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a Gate);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().expect("gate lock");
        *n -= 1;
        self.0.freed.notify_one();
    }
}

impl Gate {
    fn acquire(&self, until: Instant) -> Option<Permit<'_>> {
        let mut n = self.in_flight.lock().expect("gate lock");
        while *n >= self.limit {
            let now = Instant::now();
            if now >= until {
                return None;
            }
            n = self.freed.wait_timeout(n, until - now).expect("gate lock").0;
        }
        *n += 1;
        Some(Permit(self))
    }
}

/// HTTP completion endpoint returning structured JSON.
///
/// Request: `{"prompt", "response_schema", "mode"}`. Response body must be
/// exactly `{"steps", "conclusion", "self_score"}`; anything else is a schema
/// error. A timed-out call is retried once.
#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        if config.max_in_flight == 0 {
            return Err(BackendError::Unavailable("max_in_flight must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.deadline_ms))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let limit = config.max_in_flight;
        Ok(Self {
            config,
            client,
            gate: Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                limit,
            },
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn call_once(&self, prompt: &PromptBundle) -> Result<BackendResponse, BackendError> {
        let deadline = Duration::from_millis(self.config.deadline_ms);
        let _permit = self
            .gate
            .acquire(Instant::now() + deadline)
            .ok_or(BackendError::Timeout)?;
        let request = WireRequest {
            prompt: prompt.render(),
            response_schema: RESPONSE_SCHEMA,
            mode: if prompt.candidate().is_some() { "backward" } else { "forward" },
        };
        let response = self
            .client
            .post(&self.config.endpoint)
            .json(&request)
            .send()
            .map_err(classify)?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Unavailable(format!("status {status}")));
        }
        let body = response.text().map_err(classify)?;
        parse_response(&body)
    }
}

fn classify(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport(e.to_string())
    }
}

impl ReasoningBackend for RemoteBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn respond(&self, prompt: &PromptBundle) -> Result<BackendResponse, BackendError> {
        match self.call_once(prompt) {
            Err(BackendError::Timeout) => {
                tracing::debug!(endpoint = %self.config.endpoint, "retrying after timeout");
                self.call_once(prompt)
            }
            other => other,
        }
    }

    fn supports_sampling(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_parsing() {
        let ok = r#"{"steps":[{"claim":"c","chunk_id":1,"time":"2025-06","kind":"event"}],"conclusion":"2025-07","self_score":1.4}"#;
        let r = parse_response(ok).unwrap();
        assert_eq!(r.self_score, Some(1.0));
        assert!(parse_response(r#"{"steps":[],"conclusion":"2025-07"}"#).is_err());
        assert!(parse_response(r#"{"steps":[],"conclusion":"2025-13","self_score":0.5}"#).is_err());
        assert!(parse_response(r#"{"steps":[],"conclusion":"2025","self_score":0.5,"extra":1}"#).is_err());
        assert!(parse_response("not json").is_err());
        let r = parse_response(r#"{"steps":[],"conclusion":"indeterminate","self_score":null}"#).unwrap();
        assert_eq!(r.trajectory.conclusion, Conclusion::Indeterminate);
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint: "http://127.0.0.1:9/v1".into(),
            deadline_ms: 200,
            max_in_flight: 1,
        })
        .unwrap();
        let prompt = PromptBundle {
            query: "q".into(),
            query_times: vec![],
            domain: "general".into(),
            chunks: vec![],
            search_time: "2025-06-01".parse().unwrap(),
            few_shot: vec![],
            negative_constraints: vec![],
            mode: super::super::PromptMode::Forward,
        };
        assert!(backend.respond(&prompt).is_err());
    }
}
