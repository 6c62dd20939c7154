//! Query-keyed threshold cache backed by a JSON-lines file.
//!
//! One record per line, fields in order: `query_key`, `t_exp`, `computed_at`
//! (RFC 3339), `ttl_days`, `source`, `s_self`. The file is replayed at start,
//! appended on each write and rewritten by [`ThresholdCache::compact`]. A later
//! line for the same key replaces an earlier one.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::temporal::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Cache,
    Backend,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdCacheEntry {
    pub query_key: String,
    pub t_exp: TimePoint,
    pub computed_at: DateTime<Utc>,
    pub ttl_days: u32,
    pub source: Provenance,
    pub s_self: f64,
}

impl ThresholdCacheEntry {
    pub fn expires_at(&self) -> DateTime<Utc> {
        self.computed_at + Duration::days(self.ttl_days as i64)
    }

    pub fn is_fresh(&self, now: DateTime<Utc>) -> bool {
        now <= self.expires_at()
    }
}

/// NFC, lowercase, whitespace runs collapsed to one space, trimmed.
pub fn normalize_query_key(query: &str) -> String {
    let nfc: String = query.nfc().collect();
    nfc.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    Entry(ThresholdCacheEntry),
    Corrupt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lookup {
    Hit(ThresholdCacheEntry),
    Expired,
    Corrupt,
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub entries: usize,
    pub corrupt: usize,
}

#[derive(Debug, Default)]
pub struct ThresholdCache {
    path: Option<PathBuf>,
    slots: RwLock<HashMap<String, Slot>>,
    writer: Mutex<Option<File>>,
}

impl ThresholdCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Replays the record file, creating it if absent. Unparseable lines whose
    /// key can still be read poison that key; others are skipped.
    pub fn open(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        let mut slots = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<ThresholdCacheEntry>(&line) {
                    Ok(e) if e.query_key == normalize_query_key(&e.query_key) => {
                        slots.insert(e.query_key.clone(), Slot::Entry(e));
                    }
                    _ => {
                        let key = serde_json::from_str::<serde_json::Value>(&line)
                            .ok()
                            .and_then(|v| v.get("query_key")?.as_str().map(normalize_query_key));
                        tracing::warn!(path = %path.display(), line = n + 1, "corrupt cache record");
                        if let Some(key) = key {
                            slots.insert(key, Slot::Corrupt);
                        }
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path: Some(path),
            slots: RwLock::new(slots),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn lookup(&self, query: &str, now: DateTime<Utc>) -> Lookup {
        let key = normalize_query_key(query);
        let slots = self.slots.read().unwrap_or_else(|p| p.into_inner());
        match slots.get(&key) {
            None => Lookup::Miss,
            Some(Slot::Corrupt) => Lookup::Corrupt,
            Some(Slot::Entry(e)) if e.is_fresh(now) => Lookup::Hit(e.clone()),
            Some(Slot::Entry(_)) => Lookup::Expired,
        }
    }

    /// Stores an entry under the normalised key of `query`; last write wins.
    pub fn insert(
        &self,
        query: &str,
        t_exp: TimePoint,
        s_self: f64,
        computed_at: DateTime<Utc>,
        ttl_days: u32,
    ) -> io::Result<ThresholdCacheEntry> {
        let entry = ThresholdCacheEntry {
            query_key: normalize_query_key(query),
            t_exp,
            computed_at,
            ttl_days,
            source: Provenance::Backend,
            s_self,
        };
        let mut writer = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(file) = writer.as_mut() {
            let line = serde_json::to_string(&entry).map_err(io::Error::other)?;
            writeln!(file, "{line}")?;
            file.flush()?;
        }
        self.slots
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(entry.query_key.clone(), Slot::Entry(entry.clone()));
        Ok(entry)
    }

    /// Poisons a key as if its record were unreadable.
    pub fn mark_corrupt(&self, query: &str) {
        self.slots
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(normalize_query_key(query), Slot::Corrupt);
    }

    pub fn stats(&self) -> CacheStats {
        let slots = self.slots.read().unwrap_or_else(|p| p.into_inner());
        let corrupt = slots.values().filter(|s| matches!(s, Slot::Corrupt)).count();
        CacheStats {
            entries: slots.len() - corrupt,
            corrupt,
        }
    }

    /// Rewrites the file with the fresh entries only, sorted by key.
    pub fn compact(&self, now: DateTime<Utc>) -> io::Result<usize> {
        let Some(path) = &self.path else { return Ok(0) };
        let mut writer = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let slots = self.slots.read().unwrap_or_else(|p| p.into_inner());
        let keep: BTreeMap<&String, &ThresholdCacheEntry> = slots
            .iter()
            .filter_map(|(k, s)| match s {
                Slot::Entry(e) if e.is_fresh(now) => Some((k, e)),
                _ => None,
            })
            .collect();
        let tmp = path.with_extension("compact.tmp");
        {
            let mut out = io::BufWriter::new(File::create(&tmp)?);
            for e in keep.values() {
                let line = serde_json::to_string(e).map_err(io::Error::other)?;
                writeln!(out, "{line}")?;
            }
            out.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        *writer = Some(OpenOptions::new().append(true).open(path)?);
        Ok(keep.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tp(s: &str) -> TimePoint {
        s.parse().unwrap()
    }

    #[test]
    fn key_normalisation() {
        assert_eq!(normalize_query_key("  Hong\u{3000}Kong \t FIRE "), "hong kong fire");
        assert_eq!(normalize_query_key("cafe\u{301}"), normalize_query_key("caf\u{e9}"));
    }

    #[test]
    fn ttl_is_honoured() {
        let cache = ThresholdCache::in_memory();
        let t0 = Utc::now();
        cache.insert("Q", tp("2025-06-02"), 1.0, t0, 7).unwrap();
        assert!(matches!(cache.lookup("q", t0 + Duration::days(7)), Lookup::Hit(_)));
        assert_eq!(cache.lookup("q", t0 + Duration::days(7) + Duration::seconds(1)), Lookup::Expired);
        assert_eq!(cache.lookup("other", t0), Lookup::Miss);
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let t0 = Utc::now();
        {
            let cache = ThresholdCache::open(&path).unwrap();
            cache.insert("alpha", tp("2025-06-02"), 1.0, t0, 7).unwrap();
            cache.insert("beta", tp("2025-07"), 0.5, t0, 7).unwrap();
        }
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("{\"query_key\":\"beta\",\"t_exp\":\"2025-13\"}\nnot json at all\n");
        std::fs::write(&path, text).unwrap();

        let cache = ThresholdCache::open(&path).unwrap();
        assert!(matches!(cache.lookup("alpha", t0), Lookup::Hit(_)));
        assert_eq!(cache.lookup("beta", t0), Lookup::Corrupt);
        assert_eq!(cache.stats(), CacheStats { entries: 1, corrupt: 1 });

        assert_eq!(cache.compact(t0).unwrap(), 1);
        let lines: Vec<String> = std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].starts_with("{\"query_key\":\"alpha\",\"t_exp\":\"2025-06-02\",\"computed_at\""));
    }
}
