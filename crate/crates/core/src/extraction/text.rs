use std::collections::{BTreeMap, HashSet};

use crate::scalar::Scalar;

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "him", "his",
    "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most",
    "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our",
    "ours", "out", "over", "own", "same", "she", "should", "so", "some", "such", "than", "that",
    "the", "their", "theirs", "them", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what", "when",
    "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you", "your",
];

/// Lowercased alphanumeric runs. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Default for Stopwords {
    fn default() -> Self {
        Self::new(DEFAULT_STOPWORDS.iter().copied())
    }
}

impl Stopwords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

/// Similarity between a chunk's tokens and the query keywords, in `[0, 1]`.
pub trait TextSimilarity<S: Scalar>: Send + Sync {
    fn similarity(&self, chunk_tokens: &[String], keywords: &[String]) -> S;
}

/// Cosine between the chunk's term-frequency vector and the unit-weight
/// keyword vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct TermFrequencyCosine;

impl<S: Scalar> TextSimilarity<S> for TermFrequencyCosine {
    fn similarity(&self, chunk_tokens: &[String], keywords: &[String]) -> S {
        if chunk_tokens.is_empty() || keywords.is_empty() {
            return S::zero();
        }
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for t in chunk_tokens {
            *tf.entry(t.as_str()).or_default() += 1;
        }
        let distinct: HashSet<&str> = keywords.iter().map(String::as_str).collect();
        let dot: usize = distinct.iter().map(|k| tf.get(k).copied().unwrap_or(0)).sum();
        if dot == 0 {
            return S::zero();
        }
        let chunk_norm = tf
            .values()
            .map(|&c| S::of(c as f64) * S::of(c as f64))
            .sum::<S>()
            .sqrt();
        let keyword_norm = S::of(distinct.len() as f64).sqrt();
        (S::of(dot as f64) / (chunk_norm * keyword_norm)).clamp_unit()
    }
}
