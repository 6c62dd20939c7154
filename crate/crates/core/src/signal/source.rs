use std::collections::{BTreeSet, HashMap};

use crate::corpus::Document;
use crate::extraction::{tokenize, Stopwords};

/// Candidate documents for a query.
pub trait DocumentSource: Send + Sync {
    fn documents_for(&self, query: &str) -> Vec<Document>;
}

/// In-memory corpus with a token inverted index; returns documents sharing at
/// least one non-stopword token with the query, in corpus order.
#[derive(Debug, Default)]
pub struct KeywordIndex {
    docs: Vec<Document>,
    postings: HashMap<String, Vec<usize>>,
    stopwords: Stopwords,
}

impl KeywordIndex {
    pub fn new(docs: Vec<Document>, stopwords: Stopwords) -> Self {
        let mut postings: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, d) in docs.iter().enumerate() {
            let mut seen = BTreeSet::new();
            let text = std::iter::once(d.title.as_str()).chain(d.sentences.iter().map(String::as_str));
            for part in text {
                for t in tokenize(part) {
                    if !stopwords.contains(&t) && seen.insert(t.clone()) {
                        postings.entry(t).or_default().push(i);
                    }
                }
            }
        }
        Self { docs, postings, stopwords }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }
}

impl DocumentSource for KeywordIndex {
    fn documents_for(&self, query: &str) -> Vec<Document> {
        let mut hits = BTreeSet::new();
        for t in tokenize(query) {
            if self.stopwords.contains(&t) {
                continue;
            }
            if let Some(ids) = self.postings.get(&t) {
                hits.extend(ids.iter().copied());
            }
        }
        hits.into_iter().map(|i| self.docs[i].clone()).collect()
    }
}
