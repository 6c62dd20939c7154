use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TimeError;

pub const MIN_YEAR: i32 = 1;
pub const MAX_YEAR: i32 = 9999;

/// Granularity level of a [`TimePoint`]: year = 1, month or quarter = 2, day = 3.
pub type Depth = u8;

/// Second level of the calendar hierarchy. Quarters and months share depth 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubYear {
    Quarter(u8),
    Month(u8),
}

impl SubYear {
    fn first_month(self) -> u32 {
        match self {
            SubYear::Quarter(q) => (q as u32 - 1) * 3 + 1,
            SubYear::Month(m) => m as u32,
        }
    }

    fn last_month(self) -> u32 {
        match self {
            SubYear::Quarter(q) => q as u32 * 3,
            SubYear::Month(m) => m as u32,
        }
    }
}

/// A hierarchical calendar point: a year, optionally refined by a quarter or
/// month, optionally refined by a day (month only).
///
/// Every point denotes a contiguous span of calendar days. The derived total
/// order sorts by span start, then span end; use [`TimePoint::chrono_cmp`] for
/// the coarse comparison where containment counts as equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimePoint {
    year: i32,
    sub: Option<SubYear>,
    day: Option<u8>,
}

impl TimePoint {
    pub fn year(year: i32) -> Result<Self, TimeError> {
        if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
            return Err(TimeError::YearOutOfRange(year));
        }
        Ok(Self {
            year,
            sub: None,
            day: None,
        })
    }

    pub fn quarter(year: i32, quarter: u8) -> Result<Self, TimeError> {
        if !(1..=4).contains(&quarter) {
            return Err(TimeError::InvalidQuarter(quarter));
        }
        let mut t = Self::year(year)?;
        t.sub = Some(SubYear::Quarter(quarter));
        Ok(t)
    }

    pub fn month(year: i32, month: u8) -> Result<Self, TimeError> {
        if !(1..=12).contains(&month) {
            return Err(TimeError::InvalidMonth(month));
        }
        let mut t = Self::year(year)?;
        t.sub = Some(SubYear::Month(month));
        Ok(t)
    }

    pub fn day(year: i32, month: u8, day: u8) -> Result<Self, TimeError> {
        let mut t = Self::month(year, month)?;
        if NaiveDate::from_ymd_opt(year, month as u32, day as u32).is_none() {
            return Err(TimeError::InvalidDate { year, month, day });
        }
        t.day = Some(day);
        Ok(t)
    }

    pub fn from_date(date: NaiveDate) -> Result<Self, TimeError> {
        Self::day(date.year(), date.month() as u8, date.day() as u8)
    }

    pub fn year_value(&self) -> i32 {
        self.year
    }

    pub fn sub(&self) -> Option<SubYear> {
        self.sub
    }

    pub fn day_value(&self) -> Option<u8> {
        self.day
    }

    /// Granularity depth: 1 for a year, 2 for a quarter or month, 3 for a day.
    pub fn depth(&self) -> Depth {
        match (self.sub, self.day) {
            (None, _) => 1,
            (Some(_), None) => 2,
            (Some(_), Some(_)) => 3,
        }
    }

    /// The calendar date for a day-level point.
    pub fn date(&self) -> Option<NaiveDate> {
        match (self.sub, self.day) {
            (Some(SubYear::Month(m)), Some(d)) => {
                NaiveDate::from_ymd_opt(self.year, m as u32, d as u32)
            }
            _ => None,
        }
    }

    pub fn first_day(&self) -> NaiveDate {
        if let Some(date) = self.date() {
            return date;
        }
        let month = self.sub.map_or(1, SubYear::first_month);
        NaiveDate::from_ymd_opt(self.year, month, 1).expect("validated at construction")
    }

    pub fn last_day(&self) -> NaiveDate {
        if let Some(date) = self.date() {
            return date;
        }
        let month = self.sub.map_or(12, SubYear::last_month);
        last_day_of_month(self.year, month)
    }

    /// Number of calendar days covered by this point.
    pub fn span_days(&self) -> i64 {
        (self.last_day() - self.first_day()).num_days() + 1
    }

    /// Day number (days from CE) used for arithmetic. Coarse points resolve
    /// to the midpoint of their span, which is fractional for even spans.
    pub fn resolved_day(&self) -> f64 {
        let first = self.first_day().num_days_from_ce() as f64;
        first + (self.span_days() - 1) as f64 / 2.0
    }

    /// The calendar day a coarse point resolves to, rounding a fractional
    /// midpoint down.
    pub fn midpoint_date(&self) -> NaiveDate {
        self.first_day() + Duration::days((self.span_days() - 1) / 2)
    }

    /// True when the span of `other` lies inside the span of `self`.
    pub fn contains(&self, other: &TimePoint) -> bool {
        self.first_day() <= other.first_day() && other.last_day() <= self.last_day()
    }

    /// Chronological comparison at the coarsest common granularity:
    /// points whose spans contain one another compare equal.
    pub fn chrono_cmp(&self, other: &TimePoint) -> Ordering {
        if self.contains(other) || other.contains(self) {
            Ordering::Equal
        } else {
            self.first_day().cmp(&other.first_day())
        }
    }

    /// Coarsens this point to at most `depth` levels.
    pub fn truncate(&self, depth: Depth) -> TimePoint {
        match depth {
            0 | 1 => TimePoint {
                year: self.year,
                sub: None,
                day: None,
            },
            2 => TimePoint {
                year: self.year,
                sub: self.sub,
                day: None,
            },
            _ => *self,
        }
    }

    /// Rebuilds a point of the same kind as `self` around `date`.
    fn same_kind_at(&self, date: NaiveDate) -> Result<TimePoint, TimeError> {
        let year = date.year();
        match (self.sub, self.day) {
            (None, _) => TimePoint::year(year),
            (Some(SubYear::Quarter(_)), _) => TimePoint::quarter(year, quarter_of(date.month())),
            (Some(SubYear::Month(_)), None) => TimePoint::month(year, date.month() as u8),
            (Some(_), Some(_)) => TimePoint::from_date(date),
        }
    }

    /// Shifts by a number of days, keeping the granularity. Coarse points
    /// shift their midpoint day and re-coarsen.
    pub fn add_days(&self, days: i64) -> Result<TimePoint, TimeError> {
        let shifted = self
            .midpoint_date()
            .checked_add_signed(Duration::days(days))
            .ok_or(TimeError::Overflow)?;
        self.same_kind_at(shifted)
    }

    /// Canonical rendering at the point's own granularity.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

fn quarter_of(month: u32) -> u8 {
    ((month - 1) / 3 + 1) as u8
}

fn last_day_of_month(year: i32, month: u32) -> NaiveDate {
    let (ny, nm) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .map(|d| d - Duration::days(1))
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(year, 12, 31).expect("valid year"))
}

impl Ord for TimePoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.first_day()
            .cmp(&other.first_day())
            .then_with(|| self.last_day().cmp(&other.last_day()))
    }
}

impl PartialOrd for TimePoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Number of leading granularity levels on which `a` and `b` agree.
///
/// A month and a quarter agree at level 2 when the month falls inside the quarter.
pub fn hierarchical_match_depth(a: &TimePoint, b: &TimePoint) -> Depth {
    if a.year != b.year {
        return 0;
    }
    let (sa, sb) = match (a.sub, b.sub) {
        (Some(sa), Some(sb)) => (sa, sb),
        _ => return 1,
    };
    let level2 = match (sa, sb) {
        (SubYear::Month(x), SubYear::Month(y)) => x == y,
        (SubYear::Quarter(x), SubYear::Quarter(y)) => x == y,
        (SubYear::Month(m), SubYear::Quarter(q)) | (SubYear::Quarter(q), SubYear::Month(m)) => {
            quarter_of(m as u32) == q
        }
    };
    if !level2 {
        return 1;
    }
    match (a.day, b.day) {
        (Some(x), Some(y)) if x == y => 3,
        _ => 2,
    }
}

/// Days elapsed from `t` to `reference`, resolving coarse points to their
/// midpoint. Points at or after the reference yield zero.
pub fn elapsed_days(t: &TimePoint, reference: &TimePoint) -> f64 {
    (reference.resolved_day() - t.resolved_day()).max(0.0)
}

/// Signed day difference `b - a` under midpoint resolution.
pub fn day_difference(a: &TimePoint, b: &TimePoint) -> f64 {
    b.resolved_day() - a.resolved_day()
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}", self.year)?;
        match (self.sub, self.day) {
            (None, _) => Ok(()),
            (Some(SubYear::Quarter(q)), _) => write!(f, "-Q{q}"),
            (Some(SubYear::Month(m)), None) => write!(f, "-{m:02}"),
            (Some(SubYear::Month(m)), Some(d)) => write!(f, "-{m:02}-{d:02}"),
        }
    }
}

impl FromStr for TimePoint {
    type Err = TimeError;

    /// Parses the canonical forms `YYYY`, `YYYY-Qn`, `YYYY-MM` and `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TimeError::Malformed(s.to_string());
        let s = s.trim();
        let mut parts = s.split('-');
        let year_part = parts.next().ok_or_else(bad)?;
        if year_part.len() != 4 || !year_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let year: i32 = year_part.parse().map_err(|_| bad())?;
        let second = parts.next();
        let third = parts.next();
        if parts.next().is_some() {
            return Err(bad());
        }
        let two_digits = |p: &str| -> Result<u8, TimeError> {
            if p.len() != 2 || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            p.parse().map_err(|_| bad())
        };
        match (second, third) {
            (None, None) => TimePoint::year(year),
            (Some(q), None) if q.starts_with('Q') => {
                let n: u8 = q[1..].parse().map_err(|_| bad())?;
                if q.len() != 2 {
                    return Err(bad());
                }
                TimePoint::quarter(year, n)
            }
            (Some(m), None) => TimePoint::month(year, two_digits(m)?),
            (Some(m), Some(d)) => TimePoint::day(year, two_digits(m)?, two_digits(d)?),
            (None, Some(_)) => Err(bad()),
        }
    }
}

impl Serialize for TimePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimePoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}
