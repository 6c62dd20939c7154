use std::cmp::Ordering;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Median and mean of a non-empty sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let mean = sorted.iter().sum::<f64>() / n as f64;
    Some(Summary { median, mean })
}

/// Median and mean age of the top `min(k, n)` results; `None` for an empty
/// ranking. `ages` are in ranked order.
pub fn day_away_at_k(ages: &[f64], k: usize) -> Option<Summary> {
    assert!(k >= 1, "k must be at least 1");
    summarize(&ages[..k.min(ages.len())])
}

/// Concordant over discordant pair counts; `Infinite` when nothing is discordant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairRatio {
    Finite(f64),
    Infinite,
}

impl PairRatio {
    pub fn from_counts(concordant: usize, discordant: usize) -> Option<Self> {
        match (concordant, discordant) {
            (0, 0) => None,
            (_, 0) => Some(PairRatio::Infinite),
            (c, d) => Some(PairRatio::Finite(c as f64 / d as f64)),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            PairRatio::Finite(v) => v,
            PairRatio::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for PairRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

impl std::fmt::Display for PairRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairRatio::Finite(v) => write!(f, "{v:.4}"),
            PairRatio::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for PairRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PairRatio::Finite(v) => serializer.serialize_f64(*v),
            PairRatio::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PairRatio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(PairRatio::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(PairRatio::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad ratio {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub concordant: usize,
    pub discordant: usize,
}

impl PairCounts {
    /// Counts pairs of unequal labels in a ranking given as labels in ranked order.
    pub fn of_ranking(labels: &[u8]) -> Self {
        let mut counts = Self::default();
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                match labels[i].cmp(&labels[j]) {
                    Ordering::Greater => counts.concordant += 1,
                    Ordering::Less => counts.discordant += 1,
                    Ordering::Equal => {}
                }
            }
        }
        counts
    }

    pub fn add(self, other: Self) -> Self {
        Self {
            concordant: self.concordant + other.concordant,
            discordant: self.discordant + other.discordant,
        }
    }

    pub fn ratio(self) -> Option<PairRatio> {
        PairRatio::from_counts(self.concordant, self.discordant)
    }
}

/// Pooled pair ratio over several rankings, each given as labels in ranked order.
pub fn pairwise_ordering_ratio<'a, I>(rankings: I) -> Option<PairRatio>
where
    I: IntoIterator<Item = &'a [u8]>,
{
    rankings
        .into_iter()
        .map(PairCounts::of_ranking)
        .fold(PairCounts::default(), PairCounts::add)
        .ratio()
}
