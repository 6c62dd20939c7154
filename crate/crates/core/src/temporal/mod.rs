//! Hierarchical time points, temporal expression parsing, and the per-document
//! temporal index.

mod index;
mod parser;
mod point;

pub use index::{build_temporal_index, DocumentTemporalIndex};
pub use parser::{
    DatePattern, DateOrder, OffsetUnit, ParserConfig, ParserConfigError, RelativeRule,
    ResultGranularity, TemporalMention, TemporalParser,
};
pub use point::{
    day_difference, elapsed_days, hierarchical_match_depth, Depth, SubYear, TimePoint, MAX_YEAR,
    MIN_YEAR,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimeError {
    #[error("year {0} outside 1..=9999")]
    YearOutOfRange(i32),
    #[error("quarter {0} outside 1..=4")]
    InvalidQuarter(u8),
    #[error("month {0} outside 1..=12")]
    InvalidMonth(u8),
    #[error("{year:04}-{month:02}-{day:02} is not a calendar date")]
    InvalidDate { year: i32, month: u8, day: u8 },
    #[error("malformed time point `{0}`")]
    Malformed(String),
    #[error("date arithmetic overflow")]
    Overflow,
}

/// Granularity depth `D(t)`: year = 1, month or quarter = 2, day = 3.
pub fn granularity_depth(t: &TimePoint) -> Depth {
    t.depth()
}
