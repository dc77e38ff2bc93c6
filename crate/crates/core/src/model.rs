//! Domain types for segment-based eating gesture labels.
//!
//! A rater labels one meal as an ordered, non-overlapping list of
//! [`Segment`]s. Only the four eating gestures are ever stored; `Other` is
//! derived from long unlabeled gaps and short gaps are transitions.

use std::fmt;
use std::ops::Sub;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ingest::{Rule, ValidationIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureKind {
    Bite,
    Drink,
    Utensiling,
    Rest,
    Other,
}

impl GestureKind {
    pub const ALL: [GestureKind; 5] = [
        GestureKind::Bite,
        GestureKind::Drink,
        GestureKind::Utensiling,
        GestureKind::Rest,
        GestureKind::Other,
    ];

    /// The four kinds a rater may label explicitly.
    pub const LABELED: [GestureKind; 4] = [
        GestureKind::Bite,
        GestureKind::Drink,
        GestureKind::Utensiling,
        GestureKind::Rest,
    ];

    pub fn intake() -> [GestureKind; 2] {
        [GestureKind::Bite, GestureKind::Drink]
    }

    pub fn non_intake() -> [GestureKind; 2] {
        [GestureKind::Utensiling, GestureKind::Rest]
    }

    pub fn is_intake(self) -> bool {
        matches!(self, GestureKind::Bite | GestureKind::Drink)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GestureKind::Bite => "bite",
            GestureKind::Drink => "drink",
            GestureKind::Utensiling => "utensiling",
            GestureKind::Rest => "rest",
            GestureKind::Other => "other",
        }
    }

    pub(crate) fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for GestureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownKind(pub String);

impl fmt::Display for UnknownKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown gesture kind `{}`", self.0)
    }
}

impl std::error::Error for UnknownKind {}

impl FromStr for GestureKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bite" => Ok(GestureKind::Bite),
            "drink" => Ok(GestureKind::Drink),
            "utensiling" => Ok(GestureKind::Utensiling),
            "rest" => Ok(GestureKind::Rest),
            "other" => Ok(GestureKind::Other),
            _ => Err(UnknownKind(s.to_string())),
        }
    }
}

/// Milliseconds from the start of the meal recording.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimePoint(u64);

impl TimePoint {
    pub const ZERO: TimePoint = TimePoint(0);

    pub const fn from_ms(ms: u64) -> Self {
        TimePoint(ms)
    }

    pub const fn ms(self) -> u64 {
        self.0
    }

    /// Average of two time points, rounding half up.
    pub fn midpoint(self, other: TimePoint) -> TimePoint {
        TimePoint((self.0 + other.0).div_ceil(2))
    }

    /// Converts a 15 Hz sample index to milliseconds, rounding half up.
    pub fn from_sample_15hz(index: u64) -> TimePoint {
        TimePoint((index * 2000 + 15) / 30)
    }
}

impl Sub for TimePoint {
    type Output = i64;

    fn sub(self, rhs: TimePoint) -> i64 {
        self.0 as i64 - rhs.0 as i64
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered by start, then end, then kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub kind: GestureKind,
    pub start: TimePoint,
    pub end: TimePoint,
}

impl Segment {
    /// Builds a segment; `None` unless `start < end`.
    pub fn new(kind: GestureKind, start: TimePoint, end: TimePoint) -> Option<Segment> {
        (start < end).then_some(Segment { kind, start, end })
    }

    /// Shorthand for tests and fixtures. Panics when `start >= end`.
    pub fn ms(kind: GestureKind, start: u64, end: u64) -> Segment {
        Segment::new(kind, TimePoint(start), TimePoint(end))
            .unwrap_or_else(|| panic!("empty segment {kind} [{start}, {end}]"))
    }

    pub fn duration_ms(&self) -> u64 {
        self.end.0 - self.start.0
    }

    /// Length of the temporal intersection, zero when disjoint or touching.
    pub fn intersection_ms(&self, other: &Segment) -> u64 {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.0.saturating_sub(lo.0)
    }

    pub fn overlaps(&self, other: &Segment) -> bool {
        self.intersection_ms(other) > 0
    }

    /// Closed-interval containment, `start <= t <= end`.
    pub fn contains(&self, t: TimePoint) -> bool {
        self.start <= t && t <= self.end
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.start, self.end, self.kind).cmp(&(other.start, other.end, other.kind))
    }
}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}, {}]", self.kind, self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Dominant,
    NonDominant,
}

impl Hand {
    pub fn as_str(self) -> &'static str {
        match self {
            Hand::Dominant => "dominant",
            Hand::NonDominant => "nondominant",
        }
    }
}

impl FromStr for Hand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dominant" => Ok(Hand::Dominant),
            "nondominant" | "non-dominant" => Ok(Hand::NonDominant),
            other => Err(format!("unknown hand `{other}`")),
        }
    }
}

/// A single-timestamp intake label marking first mouth contact.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexEvent {
    pub meal_id: String,
    pub t: TimePoint,
    pub kind: GestureKind,
    pub hand: Hand,
}

impl IndexEvent {
    /// `None` unless `kind` is an intake kind.
    pub fn new(meal_id: impl Into<String>, t: TimePoint, kind: GestureKind, hand: Hand) -> Option<Self> {
        kind.is_intake().then(|| IndexEvent {
            meal_id: meal_id.into(),
            t,
            kind,
            hand,
        })
    }

    pub fn is_dominant(&self) -> bool {
        self.hand == Hand::Dominant
    }
}

/// Keeps only dominant-hand events, the only ones that take part in matching.
pub fn dominant_only(events: &[IndexEvent]) -> Vec<IndexEvent> {
    events.iter().filter(|e| e.is_dominant()).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingConfig {
    /// Largest boundary disagreement still averaged.
    pub tolerance_ms: u64,
    /// Unlabeled gaps at least this long become `Other`.
    pub gap_other_ms: u64,
    pub min_gesture_ms: u64,
    pub min_other_ms: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            tolerance_ms: 1000,
            gap_other_ms: 4000,
            min_gesture_ms: 1000,
            min_other_ms: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be strictly positive")]
    NotPositive(&'static str),
    #[error("min_other_ms ({other}) must be at least min_gesture_ms ({gesture})")]
    OtherShorterThanGesture { other: u64, gesture: u64 },
}

impl TimingConfig {
    pub fn new(
        tolerance_ms: u64,
        gap_other_ms: u64,
        min_gesture_ms: u64,
        min_other_ms: u64,
    ) -> Result<Self, ConfigError> {
        let cfg = TimingConfig {
            tolerance_ms,
            gap_other_ms,
            min_gesture_ms,
            min_other_ms,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("tolerance_ms", self.tolerance_ms),
            ("gap_other_ms", self.gap_other_ms),
            ("min_gesture_ms", self.min_gesture_ms),
            ("min_other_ms", self.min_other_ms),
        ] {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.min_other_ms < self.min_gesture_ms {
            return Err(ConfigError::OtherShorterThanGesture {
                other: self.min_other_ms,
                gesture: self.min_gesture_ms,
            });
        }
        Ok(())
    }

    pub fn min_duration_ms(&self, kind: GestureKind) -> u64 {
        match kind {
            GestureKind::Other => self.min_other_ms,
            _ => self.min_gesture_ms,
        }
    }
}

/// One rater's labels for one meal. Always valid once constructed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timeline {
    meal_id: String,
    rater_id: String,
    segments: Vec<Segment>,
}

impl Timeline {
    /// Validates `segments` as given (no sorting) and reports every violation.
    pub fn new(
        meal_id: impl Into<String>,
        rater_id: impl Into<String>,
        segments: Vec<Segment>,
        cfg: &TimingConfig,
    ) -> Result<Timeline, Vec<ValidationIssue>> {
        let meal_id = meal_id.into();
        let rater_id = rater_id.into();
        let issues = check_segments(&meal_id, &rater_id, &segments, cfg);
        if issues.is_empty() {
            Ok(Timeline {
                meal_id,
                rater_id,
                segments,
            })
        } else {
            Err(issues)
        }
    }

    /// Caller guarantees validity; checked in debug builds.
    pub(crate) fn from_valid(
        meal_id: String,
        rater_id: String,
        segments: Vec<Segment>,
        cfg: &TimingConfig,
    ) -> Timeline {
        debug_assert!(
            check_segments(&meal_id, &rater_id, &segments, cfg).is_empty(),
            "invalid timeline {meal_id}/{rater_id}: {segments:?}"
        );
        Timeline {
            meal_id,
            rater_id,
            segments,
        }
    }

    pub fn meal_id(&self) -> &str {
        &self.meal_id
    }

    pub fn rater_id(&self) -> &str {
        &self.rater_id
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn end(&self) -> TimePoint {
        self.segments.last().map_or(TimePoint::ZERO, |s| s.end)
    }

    pub fn with_rater(&self, rater_id: impl Into<String>) -> Timeline {
        Timeline {
            meal_id: self.meal_id.clone(),
            rater_id: rater_id.into(),
            segments: self.segments.clone(),
        }
    }
}

pub(crate) fn check_segments(
    meal_id: &str,
    rater_id: &str,
    segments: &[Segment],
    cfg: &TimingConfig,
) -> Vec<ValidationIssue> {
    let issue = |ordinal: usize, rule: Rule, message: String| ValidationIssue {
        meal_id: meal_id.to_string(),
        rater_id: rater_id.to_string(),
        ordinal: Some(ordinal),
        line: None,
        rule,
        message,
    };
    let mut issues = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        if seg.kind == GestureKind::Other {
            issues.push(issue(
                i,
                Rule::BadKind,
                format!("{seg}: `other` is derived and cannot be labeled"),
            ));
        }
        if seg.start >= seg.end {
            issues.push(issue(i, Rule::Unordered, format!("{seg}: start must precede end")));
        } else if seg.duration_ms() < cfg.min_duration_ms(seg.kind) {
            issues.push(issue(
                i,
                Rule::MinDuration,
                format!(
                    "{seg}: {} ms is shorter than the {} ms minimum",
                    seg.duration_ms(),
                    cfg.min_duration_ms(seg.kind)
                ),
            ));
        }
        if i > 0 {
            let prev = &segments[i - 1];
            if seg.start < prev.start {
                issues.push(issue(
                    i,
                    Rule::Unordered,
                    format!("{seg} starts before preceding {prev}"),
                ));
            } else if seg.start < prev.end {
                issues.push(issue(i, Rule::Overlap, format!("{seg} overlaps preceding {prev}")));
            }
        }
    }
    issues
}

/// One `Other` segment per unlabeled gap of at least `gap_other_ms`, within
/// `[0, end of last segment]`. Shorter gaps are transitions and yield nothing.
pub fn derive_other_segments(timeline: &Timeline, cfg: &TimingConfig) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut cursor = TimePoint::ZERO;
    for seg in timeline.segments() {
        if seg.start.ms() >= cursor.ms() + cfg.gap_other_ms {
            out.push(Segment {
                kind: GestureKind::Other,
                start: cursor,
                end: seg.start,
            });
        }
        cursor = cursor.max(seg.end);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use GestureKind::*;

    fn tl(segs: Vec<Segment>) -> Timeline {
        Timeline::new("m", "r", segs, &TimingConfig::default()).unwrap()
    }

    #[test]
    fn kind_classes() {
        assert_eq!(GestureKind::intake(), [Bite, Drink]);
        assert_eq!(GestureKind::non_intake(), [Utensiling, Rest]);
        assert!(Bite.is_intake() && !Rest.is_intake() && !Other.is_intake());
        assert_eq!("Utensiling".parse::<GestureKind>().unwrap(), Utensiling);
        assert!("chew".parse::<GestureKind>().is_err());
    }

    #[test]
    fn timepoint_arithmetic() {
        assert_eq!(TimePoint::from_ms(1000) - TimePoint::from_ms(2500), -1500);
        assert_eq!(TimePoint::from_ms(1000).midpoint(TimePoint::from_ms(1001)).ms(), 1001);
        assert_eq!(TimePoint::from_ms(1000).midpoint(TimePoint::from_ms(1800)).ms(), 1400);
        assert_eq!(TimePoint::from_sample_15hz(1).ms(), 67);
        assert_eq!(TimePoint::from_sample_15hz(15).ms(), 1000);
        assert_eq!(TimePoint::from_sample_15hz(2).ms(), 133);
    }

    #[test]
    fn index_event_must_be_intake() {
        assert!(IndexEvent::new("m", TimePoint::from_ms(1), Rest, Hand::Dominant).is_none());
        assert!(IndexEvent::new("m", TimePoint::from_ms(1), Drink, Hand::Dominant).is_some());
    }

    #[test]
    fn config_checks() {
        assert!(TimingConfig::new(0, 4000, 1000, 4000).is_err());
        assert!(TimingConfig::new(1000, 4000, 1000, 500).is_err());
        assert!(TimingConfig::new(500, 2000, 500, 2000).is_ok());
    }

    #[test]
    fn timeline_reports_every_violation() {
        let cfg = TimingConfig::default();
        let segs = vec![
            Segment::ms(Bite, 1000, 1500),
            Segment::ms(Rest, 1200, 4000),
            Segment::ms(Drink, 500, 3000),
        ];
        let issues = Timeline::new("m", "r", segs, &cfg).unwrap_err();
        let rules: Vec<Rule> = issues.iter().map(|i| i.rule).collect();
        assert_eq!(rules, vec![Rule::MinDuration, Rule::Overlap, Rule::Unordered]);
    }

    #[test]
    fn gap_of_five_seconds_is_other() {
        let t = tl(vec![Segment::ms(Bite, 8000, 10000), Segment::ms(Rest, 15000, 17000)]);
        assert_eq!(
            derive_other_segments(&t, &TimingConfig::default()),
            vec![Segment::ms(Other, 0, 8000), Segment::ms(Other, 10000, 15000)]
        );
    }

    #[test]
    fn short_gap_is_transition() {
        let t = tl(vec![Segment::ms(Bite, 1000, 3000), Segment::ms(Rest, 6000, 9000)]);
        assert!(derive_other_segments(&t, &TimingConfig::default()).is_empty());
    }

    #[test]
    fn gap_exactly_threshold_is_other() {
        let t = tl(vec![Segment::ms(Bite, 4000, 6000)]);
        assert_eq!(
            derive_other_segments(&t, &TimingConfig::default()),
            vec![Segment::ms(Other, 0, 4000)]
        );
    }

    #[test]
    fn empty_timeline_has_no_other() {
        assert!(derive_other_segments(&tl(vec![]), &TimingConfig::default()).is_empty());
    }
}
