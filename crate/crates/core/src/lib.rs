//! Segment-level inter-rater reliability for eating-gesture annotations.
//!
//! Two raters label a meal as sorted, non-overlapping segments of four kinds
//! (bite, drink, utensiling, rest); gaps become derived `Other` segments.
//! [`match_pair`] pairs the two timelines, assigns every segment to one of
//! six cases and builds a consensus (union) timeline. [`compare_to_index`]
//! checks intake segments against single-timestamp index labels, and
//! [`stats`] turns the results into summary tables. [`sim`] generates
//! synthetic meals whose expected cases are known.

pub mod indexcmp;
pub mod ingest;
pub mod matcher;
pub mod model;
pub mod sim;
pub mod stats;

pub use indexcmp::{compare_to_index, IndexCompareOptions, IndexCounts, IndexMatchOutcome, IndexVerdict};
pub use ingest::{load_corpus, Corpus, CorpusLoad, IngestError, Rule, TimeUnit, ValidationIssue};
pub use matcher::{match_pair, merge_boundary, MatchCase, MatchError, MatchGroup, MatchReport, Side, UnionRule};
pub use model::{
    derive_other_segments, dominant_only, ConfigError, GestureKind, Hand, IndexEvent, Segment, TimePoint, Timeline,
    TimingConfig,
};
