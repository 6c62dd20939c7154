//! Offline evaluation: synthetic corpora with planted expirations, a linear
//! stand-in reranker, and freshness metrics.

mod generate;
mod metrics;
mod rerank;
mod run;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use generate::{generate_corpus, CorpusParams, QueryFamily};
pub use metrics::{day_away_at_k, pairwise_ordering_ratio, summarize, PairCounts, PairRatio, Summary};
pub use rerank::{rerank, RerankWeights};
pub use run::{
    run_offline_eval, EvalOptions, EvalReport, PipelineThresholds, QueryDiagnostics, SystemMetrics,
    ThresholdSource,
};

use crate::corpus::{load_documents, load_records, write_records, CorpusError, Document};
use crate::temporal::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreshnessTier {
    None,
    Month,
    Week,
}

impl FreshnessTier {
    pub const ALL: [FreshnessTier; 3] = [FreshnessTier::None, FreshnessTier::Month, FreshnessTier::Week];

    pub fn as_str(self) -> &'static str {
        match self {
            FreshnessTier::None => "none",
            FreshnessTier::Month => "month",
            FreshnessTier::Week => "week",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalCandidate {
    pub docid: String,
    /// Base relevance grade, 0 to 4.
    pub grade: u8,
    /// Freshness satisfaction label, 0 to 2.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalQuery {
    pub qid: String,
    pub text: String,
    pub search_time: TimePoint,
    pub tier: FreshnessTier,
    #[serde(default)]
    pub gt_expiry: Option<TimePoint>,
    pub candidates: Vec<EvalCandidate>,
}

impl EvalQuery {
    pub fn validate(&self) -> Result<(), String> {
        if self.qid.trim().is_empty() {
            return Err("qid is empty".into());
        }
        if self.text.trim().is_empty() {
            return Err("text is empty".into());
        }
        if self.search_time.depth() != 3 {
            return Err(format!("search_time {} is not a full date", self.search_time));
        }
        for c in &self.candidates {
            if c.grade > 4 {
                return Err(format!("{}: grade {} outside 0-4", c.docid, c.grade));
            }
            if c.label > 2 {
                return Err(format!("{}: label {} outside 0-2", c.docid, c.label));
            }
        }
        Ok(())
    }
}

/// Queries plus the documents their candidate lists refer to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCorpus {
    pub queries: Vec<EvalQuery>,
    pub documents: Vec<Document>,
}

pub const QUERIES_FILE: &str = "queries.jsonl";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";

impl EvalCorpus {
    /// Reads `queries.jsonl` and `documents.jsonl` from a directory and checks
    /// that every candidate refers to a known document.
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let documents = load_documents(&dir.join(DOCUMENTS_FILE))?;
        let queries_path = dir.join(QUERIES_FILE);
        let queries: Vec<EvalQuery> = load_records(&queries_path, EvalQuery::validate)?;
        let known: std::collections::HashSet<&str> = documents.iter().map(|d| d.docid.as_str()).collect();
        let issues: Vec<crate::corpus::LoadIssue> = queries
            .iter()
            .enumerate()
            .flat_map(|(i, q)| {
                q.candidates
                    .iter()
                    .filter(|c| !known.contains(c.docid.as_str()))
                    .map(move |c| crate::corpus::LoadIssue {
                        line: i + 1,
                        message: format!("query {} cites unknown document {}", q.qid, c.docid),
                    })
            })
            .collect();
        if !issues.is_empty() {
            return Err(CorpusError::Invalid {
                path: queries_path.display().to_string(),
                issues,
            });
        }
        Ok(Self { queries, documents })
    }

    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_records(BufWriter::new(File::create(dir.join(QUERIES_FILE))?), &self.queries)?;
        write_records(BufWriter::new(File::create(dir.join(DOCUMENTS_FILE))?), &self.documents)?;
        Ok(())
    }

    pub fn document_map(&self) -> std::collections::HashMap<&str, &Document> {
        self.documents.iter().map(|d| (d.docid.as_str(), d)).collect()
    }
}
