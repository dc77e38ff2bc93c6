//! Intake segments checked against single-timestamp index labels.

use serde::{Deserialize, Serialize};

use crate::model::{IndexEvent, Segment, Timeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexVerdict {
    Agreement,
    Ambiguity,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMatchOutcome {
    pub verdict: IndexVerdict,
    /// `None` for an event that no segment contains.
    pub gesture: Option<Segment>,
    pub events: Vec<IndexEvent>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexCounts {
    pub agreement: u64,
    pub ambiguity: u64,
    /// Segments without events.
    pub missed_gestures: u64,
    /// Events outside every segment.
    pub missed_events: u64,
}

impl IndexCounts {
    pub fn missed(&self) -> u64 {
        self.missed_gestures + self.missed_events
    }

    pub fn total(&self) -> u64 {
        self.agreement + self.ambiguity + self.missed()
    }

    pub fn merge(&mut self, other: &IndexCounts) {
        self.agreement += other.agreement;
        self.ambiguity += other.ambiguity;
        self.missed_gestures += other.missed_gestures;
        self.missed_events += other.missed_events;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexCompareOptions {
    /// Bite events only satisfy bite segments, drink events drink segments.
    pub kind_strict: bool,
}

impl Default for IndexCompareOptions {
    fn default() -> Self {
        IndexCompareOptions { kind_strict: true }
    }
}

/// Assigns every intake segment and every event to exactly one outcome.
///
/// `events` should already be restricted to the dominant hand. Containment
/// is closed, `start <= t <= end`; an event on a shared boundary goes to the
/// earlier segment.
pub fn compare_to_index(
    timeline: &Timeline,
    events: &[IndexEvent],
    opts: IndexCompareOptions,
) -> (Vec<IndexMatchOutcome>, IndexCounts) {
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by_key(|&i| events[i].t);
    let mut taken = vec![false; events.len()];
    let mut outcomes = Vec::new();
    let mut counts = IndexCounts::default();

    for seg in timeline.segments().iter().filter(|s| s.kind.is_intake()) {
        let lo = order.partition_point(|&i| events[i].t < seg.start);
        let hi = order.partition_point(|&i| events[i].t <= seg.end);
        let mut inside = Vec::new();
        for &i in &order[lo..hi] {
            if !taken[i] && (!opts.kind_strict || events[i].kind == seg.kind) {
                taken[i] = true;
                inside.push(events[i].clone());
            }
        }
        let verdict = match inside.len() {
            0 => {
                counts.missed_gestures += 1;
                IndexVerdict::Missed
            }
            1 => {
                counts.agreement += 1;
                IndexVerdict::Agreement
            }
            _ => {
                counts.ambiguity += 1;
                IndexVerdict::Ambiguity
            }
        };
        outcomes.push(IndexMatchOutcome {
            verdict,
            gesture: Some(*seg),
            events: inside,
        });
    }

    for &i in &order {
        if !taken[i] {
            counts.missed_events += 1;
            outcomes.push(IndexMatchOutcome {
                verdict: IndexVerdict::Missed,
                gesture: None,
                events: vec![events[i].clone()],
            });
        }
    }
    (outcomes, counts)
}
