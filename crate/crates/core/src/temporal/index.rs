use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{TemporalMention, TemporalParser, TimePoint};

/// Mapping from each normalized time point to the sentences mentioning it.
///
/// A sentence index repeats when the same point is mentioned more than once in
/// that sentence, so the index holds exactly the flat mention multiset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentTemporalIndex {
    pub entries: BTreeMap<TimePoint, Vec<usize>>,
}

impl DocumentTemporalIndex {
    pub fn from_mentions(mentions: &[TemporalMention]) -> Self {
        let mut entries: BTreeMap<TimePoint, Vec<usize>> = BTreeMap::new();
        for m in mentions {
            entries.entry(m.normalized).or_default().push(m.sentence_index);
        }
        for positions in entries.values_mut() {
            positions.sort_unstable();
        }
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Distinct sentence indices holding at least one mention, ascending.
    pub fn anchor_sentences(&self) -> Vec<usize> {
        let mut anchors: Vec<usize> = self.entries.values().flatten().copied().collect();
        anchors.sort_unstable();
        anchors.dedup();
        anchors
    }

    /// Distinct time points mentioned within the inclusive sentence range.
    pub fn times_in_span(&self, start: usize, end: usize) -> Vec<TimePoint> {
        self.entries
            .iter()
            .filter(|(_, positions)| positions.iter().any(|&p| p >= start && p <= end))
            .map(|(t, _)| *t)
            .collect()
    }

    /// Flattened `(time, sentence)` pairs in index order.
    pub fn pairs(&self) -> impl Iterator<Item = (TimePoint, usize)> + '_ {
        self.entries
            .iter()
            .flat_map(|(t, positions)| positions.iter().map(move |&p| (*t, p)))
    }
}

pub fn build_temporal_index<S: AsRef<str>>(
    parser: &TemporalParser,
    sentences: &[S],
    reference: &TimePoint,
) -> DocumentTemporalIndex {
    DocumentTemporalIndex::from_mentions(&parser.parse(sentences, reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: &str) -> TimePoint {
        s.parse().unwrap()
    }

    #[test]
    fn dateless_document_has_empty_index() {
        let doc = ["No dates here.", "Nor here."];
        let index = build_temporal_index(&TemporalParser::default(), &doc, &tp("2025-06-01"));
        assert!(index.is_empty());
    }

    #[test]
    fn repeated_date_groups_positions() {
        let doc = [
            "Announced 2025-03-15.",
            "a",
            "b",
            "c",
            "Confirmed again on 2025-03-15.",
        ];
        let index = build_temporal_index(&TemporalParser::default(), &doc, &tp("2025-06-01"));
        assert_eq!(index.len(), 1);
        assert_eq!(index.entries[&tp("2025-03-15")], vec![0, 4]);
    }

    #[test]
    fn entries_partition_the_flat_mentions() {
        let doc = [
            "Opened 2024-01-10 and closed 2024-02-01.",
            "Reopened in March 2024.",
            "Audit on 2024-01-10.",
        ];
        let parser = TemporalParser::default();
        let reference = tp("2025-06-01");
        let mentions = parser.parse(&doc, &reference);
        let index = DocumentTemporalIndex::from_mentions(&mentions);
        assert_eq!(index.len(), 3);
        let mut flat: Vec<(TimePoint, usize)> =
            mentions.iter().map(|m| (m.normalized, m.sentence_index)).collect();
        let mut grouped: Vec<(TimePoint, usize)> = index.pairs().collect();
        flat.sort();
        grouped.sort();
        assert_eq!(flat, grouped);
        assert_eq!(index.anchor_sentences(), vec![0, 1, 2]);
        assert_eq!(index.times_in_span(1, 1), vec![tp("2024-03")]);
    }
}
