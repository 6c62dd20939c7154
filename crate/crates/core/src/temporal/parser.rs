//! Closed-vocabulary temporal expression parser.
//!
//! Patterns are declared in a [`ParserConfig`] and evaluated in order; a match
//! claims its byte range so later patterns cannot re-read the same text.

use std::path::Path;

use chrono::{Datelike, Duration, Months, NaiveDate};
use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::{TimeError, TimePoint};

/// Alternation substituted for `{month_name}` inside pattern regexes.
const MONTH_NAME_ALTERNATION: &str = "jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?";

#[derive(Debug, thiserror::Error)]
pub enum ParserConfigError {
    #[error("pattern `{name}` does not compile: {source}")]
    Regex {
        name: String,
        #[source]
        source: regex::Error,
    },
    #[error("pattern `{0}` has no usable capture groups")]
    NoGroups(String),
    #[error("reading parser config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parser config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
}

/// Field order for all-numeric dates such as `03/04/25`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DateOrder {
    #[default]
    Ymd,
    Dmy,
    Mdy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetUnit {
    Day,
    Week,
    Month,
    Year,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultGranularity {
    Day,
    Month,
    Year,
}

/// An absolute date pattern. Recognized capture groups: `year`, `yy`,
/// `month`, `month_name`, `day`, `quarter`, `quarter_word`, and `a`/`b`/`c`
/// for all-numeric triples resolved through [`ParserConfig::ambiguous_order`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatePattern {
    pub name: String,
    pub regex: String,
}

/// A relative expression resolved against the reference date. When the
/// regex has an `n` group the offset is multiplied by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeRule {
    pub name: String,
    pub regex: String,
    pub unit: OffsetUnit,
    pub offset: i32,
    pub granularity: ResultGranularity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParserConfig {
    pub case_insensitive: bool,
    pub ambiguous_order: DateOrder,
    /// Century added to two-digit years.
    pub two_digit_year_base: i32,
    pub date_patterns: Vec<DatePattern>,
    pub relative_rules: Vec<RelativeRule>,
}

fn pattern(name: &str, regex: &str) -> DatePattern {
    DatePattern {
        name: name.to_string(),
        regex: regex.to_string(),
    }
}

fn relative(
    name: &str,
    regex: &str,
    unit: OffsetUnit,
    offset: i32,
    granularity: ResultGranularity,
) -> RelativeRule {
    RelativeRule {
        name: name.to_string(),
        regex: regex.to_string(),
        unit,
        offset,
        granularity,
    }
}

impl Default for ParserConfig {
    fn default() -> Self {
        use OffsetUnit as U;
        use ResultGranularity as G;
        Self {
            case_insensitive: true,
            ambiguous_order: DateOrder::Ymd,
            two_digit_year_base: 2000,
            date_patterns: vec![
                pattern("iso_date", r"\b(?P<year>\d{4})-(?P<month>\d{1,2})-(?P<day>\d{1,2})\b"),
                pattern("slash_ymd", r"\b(?P<year>\d{4})/(?P<month>\d{1,2})/(?P<day>\d{1,2})\b"),
                pattern("numeric_triple", r"\b(?P<a>\d{1,2})[/.](?P<b>\d{1,2})[/.](?P<c>\d{2}|\d{4})\b"),
                pattern(
                    "month_day_year",
                    r"\b(?P<month_name>{month_name})\.?\s+(?P<day>\d{1,2})(?:st|nd|rd|th)?,?\s+(?P<year>\d{4})\b",
                ),
                pattern(
                    "day_month_year",
                    r"\b(?P<day>\d{1,2})(?:st|nd|rd|th)?\s+(?P<month_name>{month_name})\.?,?\s+(?P<year>\d{4})\b",
                ),
                pattern("year_quarter", r"\b(?P<year>\d{4})[\s-]?Q(?P<quarter>[1-4])\b"),
                pattern("quarter_year", r"\bQ(?P<quarter>[1-4])[\s-]?(?P<year>\d{4})\b"),
                pattern(
                    "ordinal_quarter",
                    r"\b(?P<quarter_word>first|second|third|fourth)\s+quarter(?:\s+of)?\s+(?P<year>\d{4})\b",
                ),
                pattern("month_name_year", r"\b(?P<month_name>{month_name})\.?,?\s+(?P<year>\d{4})\b"),
                pattern("iso_month", r"\b(?P<year>\d{4})-(?P<month>\d{2})\b"),
                pattern("year", r"\b(?P<year>(?:19|20)\d{2})\b"),
            ],
            relative_rules: vec![
                relative("today", r"\btoday\b", U::Day, 0, G::Day),
                relative("yesterday", r"\byesterday\b", U::Day, -1, G::Day),
                relative("tomorrow", r"\btomorrow\b", U::Day, 1, G::Day),
                relative("days_ago", r"\b(?P<n>\d{1,4})\s+days?\s+ago\b", U::Day, -1, G::Day),
                relative("weeks_ago", r"\b(?P<n>\d{1,3})\s+weeks?\s+ago\b", U::Week, -1, G::Day),
                relative("months_ago", r"\b(?P<n>\d{1,3})\s+months?\s+ago\b", U::Month, -1, G::Month),
                relative("years_ago", r"\b(?P<n>\d{1,3})\s+years?\s+ago\b", U::Year, -1, G::Year),
                relative("last_week", r"\blast\s+week\b", U::Week, -1, G::Day),
                relative("last_month", r"\blast\s+month\b", U::Month, -1, G::Month),
                relative("this_month", r"\bthis\s+month\b", U::Month, 0, G::Month),
                relative("next_month", r"\bnext\s+month\b", U::Month, 1, G::Month),
                relative("last_year", r"\blast\s+year\b", U::Year, -1, G::Year),
                relative("this_year", r"\bthis\s+year\b", U::Year, 0, G::Year),
                relative("next_year", r"\bnext\s+year\b", U::Year, 1, G::Year),
            ],
        }
    }
}

impl ParserConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ParserConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ParserConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("parser config is always serializable")
    }
}

/// A recognized temporal expression inside one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalMention {
    pub surface: String,
    pub normalized: TimePoint,
    pub sentence_index: usize,
    pub is_relative: bool,
    /// Byte range of `surface` inside its sentence.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug)]
enum Rule {
    Absolute(Regex),
    Relative(Regex, RelativeRule),
}

#[derive(Debug)]
pub struct TemporalParser {
    rules: Vec<(String, Rule)>,
    order: DateOrder,
    two_digit_base: i32,
}

impl Default for TemporalParser {
    fn default() -> Self {
        Self::new(&ParserConfig::default()).expect("built-in patterns compile")
    }
}

impl TemporalParser {
    pub fn new(config: &ParserConfig) -> Result<Self, ParserConfigError> {
        let compile = |name: &str, raw: &str| -> Result<Regex, ParserConfigError> {
            let expanded = raw.replace("{month_name}", MONTH_NAME_ALTERNATION);
            let source = if config.case_insensitive {
                format!("(?i){expanded}")
            } else {
                expanded
            };
            Regex::new(&source).map_err(|source| ParserConfigError::Regex {
                name: name.to_string(),
                source,
            })
        };
        let mut rules = Vec::new();
        for p in &config.date_patterns {
            let re = compile(&p.name, &p.regex)?;
            let has_fields = re.capture_names().flatten().any(|n| {
                matches!(n, "year" | "yy" | "a" | "c")
            });
            if !has_fields {
                return Err(ParserConfigError::NoGroups(p.name.clone()));
            }
            rules.push((p.name.clone(), Rule::Absolute(re)));
        }
        for r in &config.relative_rules {
            let re = compile(&r.name, &r.regex)?;
            rules.push((r.name.clone(), Rule::Relative(re, r.clone())));
        }
        Ok(Self {
            rules,
            order: config.ambiguous_order,
            two_digit_base: config.two_digit_year_base,
        })
    }

    /// All mentions across `sentences`, ordered by sentence then position.
    pub fn parse<S: AsRef<str>>(
        &self,
        sentences: &[S],
        reference: &TimePoint,
    ) -> Vec<TemporalMention> {
        sentences
            .iter()
            .enumerate()
            .flat_map(|(i, s)| self.parse_sentence(s.as_ref(), i, reference))
            .collect()
    }

    pub fn parse_sentence(
        &self,
        text: &str,
        sentence_index: usize,
        reference: &TimePoint,
    ) -> Vec<TemporalMention> {
        let reference_date = reference.midpoint_date();
        let mut claimed: Vec<(usize, usize)> = Vec::new();
        let mut mentions = Vec::new();
        for (name, rule) in &self.rules {
            let re = match rule {
                Rule::Absolute(re) | Rule::Relative(re, _) => re,
            };
            for caps in re.captures_iter(text) {
                let whole = caps.get(0).expect("group 0 always present");
                let (start, end) = (whole.start(), whole.end());
                if claimed.iter().any(|&(s, e)| start < e && s < end) {
                    continue;
                }
                let resolved = match rule {
                    Rule::Absolute(_) => self.absolute(&caps),
                    Rule::Relative(_, spec) => resolve_relative(&caps, spec, reference_date),
                };
                // Invalid dates still claim their text so no coarser pattern
                // re-reads a fragment of them.
                claimed.push((start, end));
                match resolved {
                    Ok(point) => {
                        mentions.push(TemporalMention {
                            surface: whole.as_str().to_string(),
                            normalized: point,
                            sentence_index,
                            is_relative: matches!(rule, Rule::Relative(..)),
                            start,
                            end,
                        });
                    }
                    Err(err) => {
                        debug!(pattern = %name, surface = whole.as_str(), %err, "skipping unrecognized expression");
                    }
                }
            }
        }
        mentions.sort_by_key(|m| m.start);
        mentions
    }

    fn expand_year(&self, raw: &str) -> Result<i32, TimeError> {
        let value: i32 = raw
            .parse()
            .map_err(|_| TimeError::Malformed(raw.to_string()))?;
        Ok(if raw.len() <= 2 {
            self.two_digit_base + value
        } else {
            value
        })
    }

    fn absolute(&self, caps: &Captures<'_>) -> Result<TimePoint, TimeError> {
        if let (Some(a), Some(b), Some(c)) = (caps.name("a"), caps.name("b"), caps.name("c")) {
            return self.numeric_triple(a.as_str(), b.as_str(), c.as_str());
        }
        let year = match (caps.name("year"), caps.name("yy")) {
            (Some(y), _) | (None, Some(y)) => self.expand_year(y.as_str())?,
            (None, None) => return Err(TimeError::Malformed(caps[0].to_string())),
        };
        let number = |name: &str| -> Option<u8> { caps.name(name).and_then(|m| m.as_str().parse().ok()) };
        if let Some(q) = number("quarter") {
            return TimePoint::quarter(year, q);
        }
        if let Some(word) = caps.name("quarter_word") {
            let q = match word.as_str().to_ascii_lowercase().as_str() {
                "first" => 1,
                "second" => 2,
                "third" => 3,
                _ => 4,
            };
            return TimePoint::quarter(year, q);
        }
        let month = match caps.name("month_name") {
            Some(m) => Some(month_from_name(m.as_str()).ok_or_else(|| TimeError::Malformed(m.as_str().to_string()))?),
            None => number("month"),
        };
        match (month, number("day")) {
            (Some(m), Some(d)) => TimePoint::day(year, m, d),
            (Some(m), None) => TimePoint::month(year, m),
            (None, _) => TimePoint::year(year),
        }
    }

    fn numeric_triple(&self, a: &str, b: &str, c: &str) -> Result<TimePoint, TimeError> {
        let parse = |s: &str| -> Result<u8, TimeError> {
            s.parse().map_err(|_| TimeError::Malformed(s.to_string()))
        };
        // A four-digit component is unambiguously the year; the remaining pair
        // follows the configured order (year-first configs read month first).
        let attempts: Vec<(i32, u8, u8)> = if c.len() == 4 {
            let year = self.expand_year(c)?;
            let (x, y) = (parse(a)?, parse(b)?);
            match self.order {
                DateOrder::Dmy => vec![(year, y, x), (year, x, y)],
                DateOrder::Ymd | DateOrder::Mdy => vec![(year, x, y), (year, y, x)],
            }
        } else {
            let (x, y, z) = (a, b, c);
            let ymd = (self.expand_year(x)?, parse(y)?, parse(z)?);
            let dmy = (self.expand_year(z)?, parse(y)?, parse(x)?);
            let mdy = (self.expand_year(z)?, parse(x)?, parse(y)?);
            match self.order {
                DateOrder::Ymd => vec![ymd, mdy, dmy],
                DateOrder::Dmy => vec![dmy, ymd, mdy],
                DateOrder::Mdy => vec![mdy, ymd, dmy],
            }
        };
        let valid: Vec<TimePoint> = attempts
            .iter()
            .filter_map(|&(y, m, d)| TimePoint::day(y, m, d).ok())
            .collect();
        match valid.first() {
            Some(first) => {
                if valid.iter().any(|t| t != first) {
                    debug!(raw = format!("{a}/{b}/{c}"), chosen = %first, "ambiguous numeric date");
                }
                Ok(*first)
            }
            None => Err(TimeError::Malformed(format!("{a}/{b}/{c}"))),
        }
    }
}

fn month_from_name(name: &str) -> Option<u8> {
    let lower = name.to_ascii_lowercase();
    let prefix = lower.get(..3)?;
    let m = match prefix {
        "jan" => 1,
        "feb" => 2,
        "mar" => 3,
        "apr" => 4,
        "may" => 5,
        "jun" => 6,
        "jul" => 7,
        "aug" => 8,
        "sep" => 9,
        "oct" => 10,
        "nov" => 11,
        "dec" => 12,
        _ => return None,
    };
    Some(m)
}

fn resolve_relative(
    caps: &Captures<'_>,
    spec: &RelativeRule,
    reference: NaiveDate,
) -> Result<TimePoint, TimeError> {
    let n: i64 = match caps.name("n") {
        Some(m) => m
            .as_str()
            .parse()
            .map_err(|_| TimeError::Malformed(m.as_str().to_string()))?,
        None => 1,
    };
    let amount = n * spec.offset as i64;
    let shift_months = |months: i64| -> Option<NaiveDate> {
        let magnitude = Months::new(months.unsigned_abs() as u32);
        if months >= 0 {
            reference.checked_add_months(magnitude)
        } else {
            reference.checked_sub_months(magnitude)
        }
    };
    let date = match spec.unit {
        OffsetUnit::Day => reference.checked_add_signed(Duration::days(amount)),
        OffsetUnit::Week => reference.checked_add_signed(Duration::days(7 * amount)),
        OffsetUnit::Month => shift_months(amount),
        OffsetUnit::Year => shift_months(12 * amount),
    }
    .ok_or(TimeError::Overflow)?;
    match spec.granularity {
        ResultGranularity::Day => TimePoint::from_date(date),
        ResultGranularity::Month => TimePoint::month(date.year(), date.month() as u8),
        ResultGranularity::Year => TimePoint::year(date.year()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: &str) -> TimePoint {
        s.parse().unwrap()
    }

    fn parse_one(text: &str, reference: &str) -> Vec<TimePoint> {
        TemporalParser::default()
            .parse(&[text], &tp(reference))
            .into_iter()
            .map(|m| m.normalized)
            .collect()
    }

    #[test]
    fn iso_date() {
        let found = parse_one("The policy took effect on 2025-03-15.", "2025-06-01");
        assert_eq!(found, vec![tp("2025-03-15")]);
        assert_eq!(found[0].depth(), 3);
    }

    #[test]
    fn quarter_expression() {
        assert_eq!(parse_one("Revenue grew in 2025 Q3.", "2025-06-01"), vec![tp("2025-Q3")]);
        assert_eq!(parse_one("Guidance for Q1 2026 was cut.", "2025-06-01"), vec![tp("2026-Q1")]);
        assert_eq!(
            parse_one("In the third quarter of 2024 sales fell.", "2025-06-01"),
            vec![tp("2024-Q3")]
        );
    }

    #[test]
    fn yesterday_subtracts_one_day() {
        let reference = NaiveDate::from_ymd_opt(2025, 6, 1).unwrap();
        let oracle = TimePoint::from_date(reference.pred_opt().unwrap()).unwrap();
        assert_eq!(
            parse_one("The fire was extinguished yesterday.", "2025-06-01"),
            vec![oracle]
        );
    }

    #[test]
    fn relative_offsets() {
        assert_eq!(parse_one("It closed 10 days ago.", "2025-06-01"), vec![tp("2025-05-22")]);
        assert_eq!(parse_one("Prices rose last month.", "2025-01-15"), vec![tp("2024-12")]);
        assert_eq!(parse_one("It peaked last year.", "2025-01-15"), vec![tp("2024")]);
        assert_eq!(parse_one("Talks began last week.", "2025-06-01"), vec![tp("2025-05-25")]);
    }

    #[test]
    fn month_names_and_month_years() {
        assert_eq!(parse_one("Signed on March 5, 2024 in Paris.", "2025-06-01"), vec![tp("2024-03-05")]);
        assert_eq!(parse_one("Signed on 5 March 2024.", "2025-06-01"), vec![tp("2024-03-05")]);
        assert_eq!(parse_one("Expected in September 2025.", "2025-06-01"), vec![tp("2025-09")]);
        assert_eq!(parse_one("Budget 2025-07 released", "2025-06-01"), vec![tp("2025-07")]);
    }

    #[test]
    fn ambiguous_numeric_dates_follow_config() {
        assert_eq!(parse_one("on 25/03/15", "2025-06-01"), vec![tp("2025-03-15")]);
        let dmy = TemporalParser::new(&ParserConfig {
            ambiguous_order: DateOrder::Dmy,
            ..ParserConfig::default()
        })
        .unwrap();
        let found: Vec<_> = dmy
            .parse(&["on 03/04/2025"], &tp("2025-06-01"))
            .into_iter()
            .map(|m| m.normalized)
            .collect();
        assert_eq!(found, vec![tp("2025-04-03")]);
        // Year-first default reads the pair month-first.
        assert_eq!(parse_one("on 03/04/2025", "2025-06-01"), vec![tp("2025-03-04")]);
        // Impossible preferred reading falls back to a valid one.
        assert_eq!(parse_one("on 25/12/2024", "2025-06-01"), vec![tp("2024-12-25")]);
    }

    #[test]
    fn invalid_dates_are_skipped() {
        assert!(parse_one("Filed 2025-02-30 and 2025-13-01.", "2025-06-01").is_empty());
    }

    #[test]
    fn longer_matches_claim_text_first() {
        let mentions = TemporalParser::default().parse(&["From 2025-03-15 to 2026."], &tp("2025-06-01"));
        assert_eq!(mentions.len(), 2);
        assert_eq!(mentions[0].surface, "2025-03-15");
        assert_eq!(mentions[1].normalized, tp("2026"));
        assert!(!mentions[0].is_relative);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = ParserConfig::default();
        let text = config.to_toml_string();
        assert_eq!(ParserConfig::from_toml_str(&text).unwrap(), config);
    }

    #[test]
    fn bad_regex_is_reported() {
        let mut config = ParserConfig::default();
        config.date_patterns.push(pattern("broken", "(?P<year>"));
        assert!(matches!(
            TemporalParser::new(&config),
            Err(ParserConfigError::Regex { .. })
        ));
    }
}
