//! Runtime configuration: one TOML file, every key defaulted, unknown keys
//! rejected.

use std::path::Path;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_word_list, CorpusError};
use crate::eval::{CorpusParams, EvalOptions, RerankWeights};
use crate::extraction::{Extractor, ExtractionError, ScoringParams, Stopwords, WindowSize};
use crate::inference::{
    BackendError, Exemplar, ObjectiveWeights, OracleBackend, PromptBuilder, ReasoningBackend,
    RemoteBackend, RemoteConfig, RuleTable, RuleTableError,
};
use crate::pipeline::Pipeline;
use crate::signal::SignalConfig;
use crate::temporal::{ParserConfig, ParserConfigError, TemporalParser};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid value for {key}: {message}")]
    Invalid { key: String, message: String },
    #[error(transparent)]
    Parser(#[from] ParserConfigError),
    #[error(transparent)]
    Rules(#[from] RuleTableError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Exemplars(#[from] CorpusError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractionSection {
    pub alpha: f64,
    pub window: usize,
    pub tau: f64,
    pub decay_rate: f64,
    /// Stopword list file; empty for the built-in list.
    pub stopwords_path: String,
    /// Parser pattern file; empty for the built-in patterns.
    pub parser_path: String,
}

impl Default for ExtractionSection {
    fn default() -> Self {
        let p = ScoringParams::<f64>::default();
        Self {
            alpha: p.alpha,
            window: p.window.get(),
            tau: p.tau,
            decay_rate: p.decay_rate,
            stopwords_path: String::new(),
            parser_path: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Oracle,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSection {
    pub backend: BackendKind,
    pub endpoint: String,
    pub max_in_flight: usize,
    /// Forward passes drawn when the backend samples.
    pub samples: usize,
    /// Rule table file; empty for the built-in table.
    pub rules_path: String,
    /// Few-shot exemplar file; empty for the built-in exemplars.
    pub exemplars_path: String,
    pub lambda_gran: f64,
    pub lambda_cons: f64,
    pub horizon_days: f64,
}

impl Default for InferenceSection {
    fn default() -> Self {
        let w = ObjectiveWeights::<f64>::default();
        Self {
            backend: BackendKind::Oracle,
            endpoint: "http://127.0.0.1:8700/v1/complete".into(),
            max_in_flight: 8,
            samples: 3,
            rules_path: String::new(),
            exemplars_path: String::new(),
            lambda_gran: w.lambda_gran,
            lambda_cons: w.lambda_cons,
            horizon_days: w.horizon_days,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheSection {
    /// Record file; empty keeps the cache in memory.
    pub path: String,
}

impl Default for CacheSection {
    fn default() -> Self {
        Self {
            path: "threshold_cache.jsonl".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub queries: usize,
    pub docs_per_query: usize,
    pub start: NaiveDate,
    pub span_days: i64,
    pub recency_window_days: f64,
    pub threads: usize,
    pub weights: RerankWeights,
}

impl Default for EvalSection {
    fn default() -> Self {
        let c = CorpusParams::default();
        let o = EvalOptions::default();
        Self {
            queries: c.queries,
            docs_per_query: c.docs_per_query,
            start: c.start,
            span_days: c.span_days,
            recency_window_days: o.recency_window_days,
            threads: o.threads,
            weights: o.weights,
        }
    }
}

impl EvalSection {
    pub fn corpus_params(&self) -> CorpusParams {
        CorpusParams {
            queries: self.queries,
            docs_per_query: self.docs_per_query,
            start: self.start,
            span_days: self.span_days,
        }
    }

    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            weights: self.weights,
            recency_window_days: self.recency_window_days,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceSection {
    pub bind: String,
    /// Enables the breaker-forcing test endpoint.
    pub test_hooks: bool,
}

impl Default for ServiceSection {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            test_hooks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub extraction: ExtractionSection,
    pub inference: InferenceSection,
    pub signal: SignalConfig,
    pub cache: CacheSection,
    pub eval: EvalSection,
    pub service: ServiceSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 42,
            extraction: ExtractionSection::default(),
            inference: InferenceSection::default(),
            signal: SignalConfig::default(),
            cache: CacheSection::default(),
            eval: EvalSection::default(),
            service: ServiceSection::default(),
        }
    }
}

pub const ENV_ENDPOINT: &str = "EXPIRY_ENDPOINT";
pub const ENV_ORACLE_DEADLINE_MS: &str = "EXPIRY_ORACLE_DEADLINE_MS";
pub const ENV_REMOTE_DEADLINE_MS: &str = "EXPIRY_REMOTE_DEADLINE_MS";

fn resolve(base: Option<&Path>, path: &str) -> std::path::PathBuf {
    let p = Path::new(path);
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// The effective configuration with every key spelled out.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    /// Applies endpoint and deadline overrides from the environment.
    pub fn apply_env<F: Fn(&str) -> Option<String>>(&mut self, lookup: F) -> Result<(), ConfigError> {
        if let Some(v) = lookup(ENV_ENDPOINT) {
            self.inference.endpoint = v;
        }
        let ms = |key: &str, raw: String| {
            raw.trim()
                .parse::<u64>()
                .map_err(|e| invalid(key, format!("{raw:?}: {e}")))
        };
        if let Some(v) = lookup(ENV_ORACLE_DEADLINE_MS) {
            self.signal.oracle_deadline_ms = ms(ENV_ORACLE_DEADLINE_MS, v)?;
        }
        if let Some(v) = lookup(ENV_REMOTE_DEADLINE_MS) {
            self.signal.remote_deadline_ms = ms(ENV_REMOTE_DEADLINE_MS, v)?;
        }
        self.validate()
    }

    pub fn scoring_params(&self) -> Result<ScoringParams<f64>, ConfigError> {
        let e = &self.extraction;
        let params = ScoringParams {
            alpha: e.alpha,
            decay_rate: e.decay_rate,
            tau: e.tau,
            window: WindowSize::new(e.window)?,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scoring_params()?;
        let i = &self.inference;
        if !(i.lambda_gran >= 0.0 && i.lambda_cons >= 0.0) {
            return Err(invalid("inference.lambda_*", "weights must be non-negative"));
        }
        if !(i.horizon_days > 0.0) {
            return Err(invalid("inference.horizon_days", "must be positive"));
        }
        if i.samples == 0 {
            return Err(invalid("inference.samples", "must be at least 1"));
        }
        if i.max_in_flight == 0 {
            return Err(invalid("inference.max_in_flight", "must be at least 1"));
        }
        let s = &self.signal;
        if s.breaker.failure_threshold == 0 || s.breaker.probes == 0 {
            return Err(invalid("signal.breaker", "threshold and probes must be at least 1"));
        }
        if s.sanity.past_days < 0 || s.sanity.future_days < 0 {
            return Err(invalid("signal.sanity", "bounds must be non-negative"));
        }
        self.eval
            .weights
            .validate()
            .map_err(|m| invalid("eval.weights", m))?;
        if self.eval.threads == 0 {
            return Err(invalid("eval.threads", "must be at least 1"));
        }
        Ok(())
    }

    pub fn objective(&self) -> ObjectiveWeights<f64> {
        ObjectiveWeights {
            lambda_gran: self.inference.lambda_gran,
            lambda_cons: self.inference.lambda_cons,
            horizon_days: self.inference.horizon_days,
        }
    }

    /// Relative paths resolve against `base` (normally the config file's directory).
    pub fn parser(&self, base: Option<&Path>) -> Result<TemporalParser, ConfigError> {
        let cfg = if self.extraction.parser_path.is_empty() {
            ParserConfig::default()
        } else {
            ParserConfig::load(&resolve(base, &self.extraction.parser_path))?
        };
        Ok(TemporalParser::new(&cfg)?)
    }

    pub fn stopwords(&self, base: Option<&Path>) -> Result<Stopwords, ConfigError> {
        if self.extraction.stopwords_path.is_empty() {
            return Ok(Stopwords::default());
        }
        let path = resolve(base, &self.extraction.stopwords_path);
        let words = read_word_list(&path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Stopwords::new(words))
    }

    pub fn rules(&self, base: Option<&Path>) -> Result<RuleTable, ConfigError> {
        if self.inference.rules_path.is_empty() {
            Ok(RuleTable::default())
        } else {
            Ok(RuleTable::load(&resolve(base, &self.inference.rules_path))?)
        }
    }

    pub fn exemplars(&self, base: Option<&Path>) -> Result<Vec<Exemplar>, ConfigError> {
        if self.inference.exemplars_path.is_empty() {
            Ok(Exemplar::builtin())
        } else {
            Ok(Exemplar::load_all(&resolve(base, &self.inference.exemplars_path))?)
        }
    }

    pub fn backend(
        &self,
        rules: Arc<RuleTable>,
        parser: Arc<TemporalParser>,
    ) -> Result<Arc<dyn ReasoningBackend>, ConfigError> {
        Ok(match self.inference.backend {
            BackendKind::Oracle => Arc::new(OracleBackend::new(rules, parser)),
            BackendKind::Http => Arc::new(RemoteBackend::new(RemoteConfig {
                endpoint: self.inference.endpoint.clone(),
                deadline_ms: self.signal.remote_deadline_ms,
                max_in_flight: self.inference.max_in_flight,
            })?),
        })
    }

    /// Builds the full pipeline with the configured backend.
    pub fn pipeline(&self, base: Option<&Path>) -> Result<Pipeline<f64>, ConfigError> {
        let parser = Arc::new(self.parser(base)?);
        let rules = Arc::new(self.rules(base)?);
        let backend = self.backend(rules.clone(), parser.clone())?;
        self.pipeline_with_backend(base, backend)
    }

    pub fn pipeline_with_backend(
        &self,
        base: Option<&Path>,
        backend: Arc<dyn ReasoningBackend>,
    ) -> Result<Pipeline<f64>, ConfigError> {
        let parser = Arc::new(self.parser(base)?);
        let rules = Arc::new(self.rules(base)?);
        let extractor = Extractor::new(parser, self.stopwords(base)?, self.scoring_params()?);
        Ok(Pipeline::new(extractor, PromptBuilder::new(self.exemplars(base)?), rules, backend)
            .with_objective(self.objective())
            .with_samples(self.inference.samples))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = Config::default();
        let text = c.to_toml_string();
        let back = Config::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        for key in ["alpha", "window", "tau", "decay_rate", "lambda_gran", "ttl_days", "failure_threshold", "past_days", "time_factor", "recency_window_days", "test_hooks"] {
            assert!(text.contains(key), "{key} missing from\n{text}");
        }
    }

    #[test]
    fn defaults_match_documented_values() {
        let c = Config::default();
        assert_eq!(c.extraction.alpha, 0.6);
        assert_eq!(c.extraction.window, 5);
        assert_eq!(c.extraction.tau, 0.35);
        assert!((c.extraction.decay_rate - std::f64::consts::LN_2 / 30.0).abs() < 1e-15);
        assert_eq!((c.inference.lambda_gran, c.inference.lambda_cons), (0.5, 0.5));
        assert_eq!(c.inference.horizon_days, 365.0);
        assert_eq!(c.signal.ttl_days, 7);
        assert_eq!(c.signal.breaker.failure_threshold, 5);
        assert_eq!(c.signal.breaker.open_secs, 30);
        assert_eq!(c.signal.breaker.probes, 1);
        assert_eq!((c.signal.oracle_deadline_ms, c.signal.remote_deadline_ms), (50, 800));
        assert_eq!((c.signal.sanity.past_days, c.signal.sanity.future_days), (3650, 1825));
        assert!(!c.service.test_hooks);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_toml_str("bogus = 1").is_err());
        assert!(Config::from_toml_str("[extraction]\nalpah = 0.5").is_err());
        assert!(Config::from_toml_str("[extraction]\nwindow = 4").is_err());
        let c = Config::from_toml_str("[extraction]\nalpha = 1.0").unwrap();
        assert_eq!(c.extraction.alpha, 1.0);
        assert_eq!(c.extraction.tau, 0.35);
    }

    #[test]
    fn env_overrides() {
        let mut c = Config::default();
        c.apply_env(|k| match k {
            ENV_ENDPOINT => Some("http://example.invalid/x".into()),
            ENV_REMOTE_DEADLINE_MS => Some("1200".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(c.inference.endpoint, "http://example.invalid/x");
        assert_eq!(c.signal.remote_deadline_ms, 1200);
        assert!(c.apply_env(|k| (k == ENV_ORACLE_DEADLINE_MS).then(|| "soon".into())).is_err());
    }
}
