//! Evidence rule table: event-class lexicons and their validity periods.
//!
//! The deterministic oracle backend and evidence fusion share these rules, so
//! a chunk implies the same expiry wherever it is evaluated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::extraction::tokenize;
use crate::temporal::{TemporalMention, TemporalParser, TimePoint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventClassRule {
    pub name: String,
    pub keywords: Vec<String>,
    /// Days the content stays current after the event; zero means the event
    /// date itself.
    pub validity_days: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicRule {
    pub keyword: String,
    pub period_days: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleTable {
    /// Checked in order; the first class with a keyword hit wins.
    pub classes: Vec<EventClassRule>,
    pub periodic: Vec<PeriodicRule>,
    /// Phrases introducing an explicit expiry date, e.g. "valid until".
    pub explicit_markers: Vec<String>,
    /// Words signalling that a report supersedes earlier coverage.
    pub supersede_markers: Vec<String>,
    /// Applied when no class keyword matches.
    pub default_class: EventClassRule,
}

fn class(name: &str, validity_days: i64, keywords: &[&str]) -> EventClassRule {
    EventClassRule {
        name: name.to_string(),
        keywords: keywords.iter().map(|k| k.to_string()).collect(),
        validity_days,
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for RuleTable {
    fn default() -> Self {
        Self {
            classes: vec![
                class(
                    "breaking_news",
                    3,
                    &[
                        "fire", "blaze", "wildfire", "earthquake", "flood", "floods", "explosion",
                        "accident", "crash", "storm", "typhoon", "hurricane", "outbreak",
                        "disaster", "landslide", "breaking", "protest", "strike", "evacuation",
                    ],
                ),
                class(
                    "sports_fixture",
                    1,
                    &["match", "fixture", "fixtures", "kickoff", "derby", "playoff", "semifinal"],
                ),
                class(
                    "scheduled_event",
                    0,
                    &["concert", "conference", "election", "festival", "ceremony", "launch", "summit", "premiere", "exhibition"],
                ),
                class(
                    "policy",
                    3650,
                    &[
                        "policy", "policies", "regulation", "regulations", "law", "laws", "act",
                        "statute", "rule", "rules", "tax", "code", "ordinance", "standard",
                    ],
                ),
            ],
            periodic: vec![
                PeriodicRule { keyword: "daily".into(), period_days: 1 },
                PeriodicRule { keyword: "weekly".into(), period_days: 7 },
                PeriodicRule { keyword: "monthly".into(), period_days: 30 },
                PeriodicRule { keyword: "quarterly".into(), period_days: 91 },
                PeriodicRule { keyword: "annual".into(), period_days: 365 },
                PeriodicRule { keyword: "yearly".into(), period_days: 365 },
            ],
            explicit_markers: strings(&[
                "valid until",
                "valid through",
                "expires on",
                "expires",
                "expiring on",
                "in effect until",
            ]),
            supersede_markers: strings(&[
                "extinguished", "reopened", "resumed", "revised", "amended", "replaced",
                "superseded", "updated", "repealed", "cancelled", "canceled", "postponed",
                "lifted", "contained", "ended",
            ]),
            default_class: class("general", 365, &[]),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuleTableError {
    #[error("reading rule table: {0}")]
    Io(#[from] std::io::Error),
    #[error("rule table syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("negative validity for class `{0}`")]
    NegativeValidity(String),
}

/// How the validity period of a piece of evidence was determined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub class: String,
    pub validity_days: i64,
    pub periodic: bool,
}

/// What a single chunk implies under the rule table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkEvidence {
    pub classification: Classification,
    /// The event the chunk reports: the latest date not after the reference,
    /// or the earliest upcoming date when every date lies ahead.
    pub event_time: Option<TimePoint>,
    pub explicit_expiry: Option<TimePoint>,
    pub supersedes: bool,
    pub implied_expiry: Option<TimePoint>,
}

impl RuleTable {
    pub fn from_toml_str(text: &str) -> Result<Self, RuleTableError> {
        let table: RuleTable = toml::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RuleTableError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("rule table is always serializable")
    }

    pub fn validate(&self) -> Result<(), RuleTableError> {
        for c in self.classes.iter().chain(std::iter::once(&self.default_class)) {
            if c.validity_days < 0 {
                return Err(RuleTableError::NegativeValidity(c.name.clone()));
            }
        }
        Ok(())
    }

    pub fn class_named(&self, name: &str) -> Option<&EventClassRule> {
        self.classes
            .iter()
            .chain(std::iter::once(&self.default_class))
            .find(|c| c.name == name)
    }

    fn periodic_in(&self, tokens: &[String]) -> Option<&PeriodicRule> {
        self.periodic.iter().find(|p| tokens.iter().any(|t| *t == p.keyword))
    }

    fn class_in(&self, tokens: &[String]) -> Option<&EventClassRule> {
        self.classes
            .iter()
            .find(|c| c.keywords.iter().any(|k| tokens.contains(k)))
    }

    /// Query signals win over chunk signals; periodic lexicon wins over
    /// event classes at each level.
    pub fn classify(&self, query_tokens: &[String], chunk_tokens: &[String]) -> Classification {
        let periodic = |p: &PeriodicRule| Classification {
            class: format!("periodic_{}", p.keyword),
            validity_days: p.period_days,
            periodic: true,
        };
        let event = |c: &EventClassRule| Classification {
            class: c.name.clone(),
            validity_days: c.validity_days,
            periodic: false,
        };
        if let Some(p) = self.periodic_in(query_tokens) {
            return periodic(p);
        }
        if let Some(c) = self.class_in(query_tokens) {
            return event(c);
        }
        if let Some(p) = self.periodic_in(chunk_tokens) {
            return periodic(p);
        }
        if let Some(c) = self.class_in(chunk_tokens) {
            return event(c);
        }
        event(&self.default_class)
    }

    /// Domain tag of a query, used to pick few-shot exemplars.
    pub fn query_domain(&self, query: &str) -> String {
        let tokens = tokenize(query);
        self.classify(&tokens, &[]).class
    }

    fn supersedes(&self, text: &str) -> bool {
        let tokens = tokenize(text);
        self.supersede_markers.iter().any(|m| tokens.contains(m))
    }

    /// Dates following an explicit-expiry marker in the same sentence.
    fn explicit_expiry(&self, sentence: &str, mentions: &[TemporalMention]) -> Option<TimePoint> {
        let lower = sentence.to_lowercase();
        let mut best: Option<(usize, TimePoint)> = None;
        for marker in &self.explicit_markers {
            let mut from = 0;
            while let Some(pos) = lower[from..].find(marker.as_str()) {
                let marker_end = from + pos + marker.len();
                if let Some(m) = mentions.iter().find(|m| m.start >= marker_end) {
                    let gap = &lower[marker_end..m.start];
                    if gap.split_whitespace().count() <= 1 && best.map_or(true, |(s, _)| m.start < s) {
                        best = Some((m.start, m.normalized));
                    }
                }
                from = marker_end;
            }
        }
        best.map(|(_, t)| t)
    }

    /// Applies the rule table to a chunk of sentences.
    pub fn evidence<S: AsRef<str>>(
        &self,
        parser: &TemporalParser,
        query_tokens: &[String],
        sentences: &[S],
        reference: &TimePoint,
    ) -> ChunkEvidence {
        let text: Vec<&str> = sentences.iter().map(AsRef::as_ref).collect();
        let chunk_tokens = tokenize(&text.join(" "));
        let classification = self.classify(query_tokens, &chunk_tokens);
        let mut explicit_expiry = None;
        let mut event_dates: Vec<TimePoint> = Vec::new();
        for (i, sentence) in text.iter().enumerate() {
            let mentions = parser.parse_sentence(sentence, i, reference);
            let explicit = self.explicit_expiry(sentence, &mentions);
            if explicit_expiry.is_none() {
                explicit_expiry = explicit;
            }
            event_dates.extend(
                mentions
                    .iter()
                    .map(|m| m.normalized)
                    .filter(|t| Some(*t) != explicit),
            );
        }
        let reference_day = reference.resolved_day();
        let by_day = |a: &&TimePoint, b: &&TimePoint| a.resolved_day().total_cmp(&b.resolved_day());
        let past = event_dates
            .iter()
            .filter(|t| t.resolved_day() <= reference_day)
            .max_by(by_day);
        let event_time = past
            .or_else(|| event_dates.iter().min_by(by_day))
            .copied();
        let implied_expiry = explicit_expiry.or_else(|| {
            event_time.and_then(|t| t.add_days(classification.validity_days).ok())
        });
        ChunkEvidence {
            classification,
            event_time,
            explicit_expiry,
            supersedes: self.supersedes(&text.join(" ")),
            implied_expiry,
        }
    }
}
