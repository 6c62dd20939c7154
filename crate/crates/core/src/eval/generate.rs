use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::inference::RuleTable;
use crate::temporal::TimePoint;

use super::{EvalCandidate, EvalCorpus, EvalQuery, FreshnessTier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryFamily {
    BreakingNews,
    SupersededNews,
    SportsFixture,
    ScheduledEvent,
    WeeklyBulletin,
    Policy,
    LongTail,
}

impl QueryFamily {
    const MIX: [(QueryFamily, u32); 7] = [
        (QueryFamily::BreakingNews, 25),
        (QueryFamily::SupersededNews, 15),
        (QueryFamily::SportsFixture, 10),
        (QueryFamily::ScheduledEvent, 10),
        (QueryFamily::WeeklyBulletin, 15),
        (QueryFamily::Policy, 15),
        (QueryFamily::LongTail, 10),
    ];

    fn pick(rng: &mut ChaCha8Rng) -> Self {
        let total: u32 = Self::MIX.iter().map(|(_, w)| w).sum();
        let mut roll = rng.gen_range(0..total);
        for (family, w) in Self::MIX {
            if roll < w {
                return family;
            }
            roll -= w;
        }
        unreachable!("roll below total weight")
    }

    fn tier(self) -> FreshnessTier {
        match self {
            QueryFamily::Policy => FreshnessTier::None,
            QueryFamily::LongTail => FreshnessTier::Month,
            _ => FreshnessTier::Week,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusParams {
    pub queries: usize,
    pub docs_per_query: usize,
    pub start: NaiveDate,
    /// Search times fall in `[start, start + span_days)`.
    pub span_days: i64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            queries: 500,
            docs_per_query: 12,
            start: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            span_days: 540,
        }
    }
}

const PLACES: &[&str] = &[
    "Harbor", "Riverside", "Northgate", "Eastfield", "Westbrook", "Lakeview", "Hillcrest",
    "Millbrook", "Stonebridge", "Fairhaven", "Oakridge", "Pinewood", "Redcliff", "Silverton",
    "Ashford", "Brookside", "Cedarvale", "Elmstead", "Glenmore", "Kingsport",
];
const HAZARDS: &[&str] = &["fire", "flood", "explosion", "storm", "landslide"];
const FESTIVALS: &[&str] = &["music festival", "film festival", "food festival", "lantern festival"];
const BULLETINS: &[&str] = &["fuel price bulletin", "market report", "traffic bulletin"];
const POLICIES: &[&str] = &["parking regulations", "zoning regulations", "recycling policy", "noise ordinance"];
const LONG_TAIL: &[&str] = &["community garden", "public library branch", "river walk", "town museum"];
const FILLER: &[&str] = &[
    "Residents discussed the {t} at a public meeting.",
    "Officials shared new details about the {t}.",
    "Local groups continue to follow the {t} closely.",
    "Coverage of the {t} drew wide attention.",
    "Neighbours compared notes on the {t}.",
    "Several visitors asked about the {t}.",
];

struct Plan {
    topic: String,
    gt: NaiveDate,
    /// `(sentence, publication date)` for each dated evidence document.
    evidence: Vec<(String, NaiveDate)>,
    max_age: i64,
}

fn validity(rules: &RuleTable, class: &str) -> i64 {
    rules.class_named(class).map_or(0, |c| c.validity_days)
}

fn period(rules: &RuleTable, keyword: &str) -> i64 {
    rules
        .periodic
        .iter()
        .find(|p| p.keyword == keyword)
        .map_or(7, |p| p.period_days)
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn plan(family: QueryFamily, search: NaiveDate, rng: &mut ChaCha8Rng, rules: &RuleTable) -> Plan {
    let place = pick(rng, PLACES);
    let days = Duration::days;
    let d = |date: NaiveDate| date.format("%Y-%m-%d").to_string();
    match family {
        QueryFamily::BreakingNews => {
            let topic = format!("{place} {}", pick(rng, HAZARDS));
            let v = validity(rules, "breaking_news");
            let gt = search - days(rng.gen_range(1..=10));
            let event = gt - days(v);
            let sentence = format!("{topic}: the {topic} was reported on {}.", d(event));
            let evidence = (0..2).map(|i| (sentence.clone(), event + days(i.min(v)))).collect();
            Plan { topic, gt, evidence, max_age: 45 }
        }
        QueryFamily::SupersededNews => {
            let topic = format!("{place} fire");
            let v = validity(rules, "breaking_news");
            let gt = search - days(rng.gen_range(1..=8));
            let later = gt - days(v);
            let earlier = later - days(rng.gen_range(2..=6));
            let mut evidence = vec![(
                format!("{topic}: the {topic} broke out on {}.", d(earlier)),
                earlier,
            )];
            for i in 0..2 {
                evidence.push((
                    format!("{topic}: the {topic} was extinguished on {}.", d(later)),
                    later + days(i.min(v)),
                ));
            }
            Plan { topic, gt, evidence, max_age: 45 }
        }
        QueryFamily::SportsFixture => {
            let topic = format!("{place} derby match");
            let v = validity(rules, "sports_fixture");
            let gt = search - days(rng.gen_range(1..=10));
            let event = gt - days(v);
            let sentence = format!("{topic}: the {topic} was played on {}.", d(event));
            Plan { topic, gt, evidence: vec![(sentence.clone(), event), (sentence, event)], max_age: 45 }
        }
        QueryFamily::ScheduledEvent => {
            let topic = format!("{place} {}", pick(rng, FESTIVALS));
            let v = validity(rules, "scheduled_event");
            let gt = search - days(rng.gen_range(1..=10));
            let event = gt - days(v);
            let announced = event - days(rng.gen_range(5..=20));
            let sentence = format!("{topic}: the {topic} is set for {}.", d(event));
            Plan { topic, gt, evidence: vec![(sentence.clone(), announced), (sentence, announced)], max_age: 45 }
        }
        QueryFamily::WeeklyBulletin => {
            let topic = format!("{place} weekly {}", pick(rng, BULLETINS));
            let p = period(rules, "weekly");
            let gt = search - days(rng.gen_range(1..=5));
            let issued = gt - days(p);
            let sentence = format!("{topic}: the {topic} was issued on {}.", d(issued));
            Plan { topic, gt, evidence: vec![(sentence.clone(), issued), (sentence, issued)], max_age: 45 }
        }
        QueryFamily::Policy => {
            let topic = format!("{place} {}", pick(rng, POLICIES));
            let v = validity(rules, "policy");
            let gt = search - days(rng.gen_range(60..=900));
            let effective = gt - days(v);
            let sentence = format!("{topic}: the {topic} took effect on {}.", d(effective));
            Plan {
                topic,
                gt,
                evidence: vec![(sentence.clone(), effective), (sentence, effective + days(30))],
                max_age: 1500,
            }
        }
        QueryFamily::LongTail => {
            let topic = format!("{place} {}", pick(rng, LONG_TAIL));
            let v = validity(rules, "general");
            let gt = search - days(rng.gen_range(20..=200));
            let opened = gt - days(v);
            let sentence = format!("{topic}: the {topic} opened on {}.", d(opened));
            Plan { topic, gt, evidence: vec![(sentence.clone(), opened), (sentence, opened)], max_age: 400 }
        }
    }
}

fn to_point(date: NaiveDate) -> TimePoint {
    TimePoint::from_date(date).expect("generated dates are in range")
}

fn title_case(s: &str) -> String {
    s.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next().map_or(String::new(), |f| f.to_uppercase().chain(c).collect())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Deterministic synthetic corpus. Each query's documents are dated evidence
/// reports plus undated coverage published before and after the planted
/// expiration; coverage published after it carries the top freshness label.
pub fn generate_corpus(seed: u64, params: &CorpusParams, rules: &RuleTable) -> EvalCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus = EvalCorpus::default();
    for q in 0..params.queries {
        let family = QueryFamily::pick(&mut rng);
        let search = params.start + Duration::days(rng.gen_range(0..params.span_days.max(1)));
        let plan = plan(family, search, &mut rng, rules);
        let qid = format!("q{q:04}");
        let mut docs: Vec<Document> = Vec::new();
        let push = |docs: &mut Vec<Document>, rng: &mut ChaCha8Rng, sentences: Vec<String>, pub_date: NaiveDate| {
            docs.push(Document {
                docid: format!("{qid}-d{:02}", docs.len()),
                title: title_case(&plan.topic),
                sentences,
                pub_time: to_point(pub_date),
                authority: f64::from(rng.gen_range(40..=100u32)) / 100.0,
                source: "synthetic".into(),
            });
        };
        for (sentence, pub_date) in &plan.evidence {
            push(&mut docs, &mut rng, vec![sentence.clone()], *pub_date);
        }
        let undated = params.docs_per_query.saturating_sub(plan.evidence.len()).max(2);
        let fresh_span = (search - plan.gt).num_days();
        for i in 0..undated {
            let pub_date = match i {
                0 => plan.gt + Duration::days(rng.gen_range(1..=fresh_span)),
                1 => plan.gt - Duration::days(rng.gen_range(0..=20)),
                _ => search - Duration::days(rng.gen_range(0..=plan.max_age)),
            };
            let mut picks: Vec<&str> = FILLER.to_vec();
            picks.shuffle(&mut rng);
            let sentences = picks[..2].iter().map(|t| t.replace("{t}", &plan.topic)).collect();
            push(&mut docs, &mut rng, sentences, pub_date);
        }
        let gt = to_point(plan.gt);
        let mut candidates: Vec<EvalCandidate> = docs
            .iter()
            .map(|d| EvalCandidate {
                docid: d.docid.clone(),
                grade: rng.gen_range(0..=4),
                label: if d.pub_time.resolved_day() > gt.resolved_day() { 2 } else { 0 },
            })
            .collect();
        candidates.shuffle(&mut rng);
        corpus.queries.push(EvalQuery {
            qid,
            text: plan.topic.clone(),
            search_time: to_point(search),
            tier: family.tier(),
            gt_expiry: Some(gt),
            candidates,
        });
        corpus.documents.extend(docs);
    }
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let params = CorpusParams { queries: 20, ..Default::default() };
        let rules = RuleTable::default();
        let a = generate_corpus(7, &params, &rules);
        let b = generate_corpus(7, &params, &rules);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = generate_corpus(8, &params, &rules);
        assert_ne!(a, c);
    }

    #[test]
    fn every_query_has_docs_on_both_sides_of_expiry() {
        let params = CorpusParams { queries: 60, ..Default::default() };
        let corpus = generate_corpus(1, &params, &RuleTable::default());
        let docs = corpus.document_map();
        for q in &corpus.queries {
            let gt = q.gt_expiry.unwrap().resolved_day();
            let days: Vec<f64> = q.candidates.iter().map(|c| docs[c.docid.as_str()].pub_time.resolved_day()).collect();
            assert!(days.iter().any(|d| *d > gt), "{}", q.qid);
            assert!(days.iter().any(|d| *d <= gt), "{}", q.qid);
            assert!(days.iter().all(|d| *d <= q.search_time.resolved_day()), "{}", q.qid);
        }
    }
}
