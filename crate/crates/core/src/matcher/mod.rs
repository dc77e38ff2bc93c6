//! Two-rater gesture matching.
//!
//! Segments of rater A and rater B are related when they share more than
//! 0 ms. Connected components of that relation restricted to equal kinds are
//! classified into six cases:
//!
//! | component                                   | case                    |
//! |---------------------------------------------|-------------------------|
//! | 1:1, both boundary deltas within tolerance  | Agreement               |
//! | 1:1, a delta beyond tolerance, nothing else overlaps | BA I           |
//! | N:1 or N:N                                  | BA II                   |
//! | 1:1, a delta beyond tolerance, a third segment overlaps | BA III      |
//! | single segment overlapping nothing          | mistake-missed          |
//! | single segment overlapping only other kinds | mistake-identity        |
//!
//! Working on components instead of iterating over one rater's labels makes
//! the result independent of argument order. Each group contributes one
//! segment to the union timeline, and residual overlaps in the union are
//! trimmed at the end.

pub mod overlap;

use std::cmp::Reverse;
use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::SEGMENT_HEADER;
use crate::model::{derive_other_segments, GestureKind, IndexEvent, Segment, TimePoint, Timeline, TimingConfig};

use self::overlap::{overlap_pairs, same_kind_components, Component};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchCase {
    Agreement,
    #[serde(rename = "ba_i")]
    BoundaryAmbiguityI,
    #[serde(rename = "ba_ii")]
    BoundaryAmbiguityII,
    #[serde(rename = "ba_iii")]
    BoundaryAmbiguityIII,
    MistakeMissed,
    MistakeIdentity,
}

impl MatchCase {
    pub const ALL: [MatchCase; 6] = [
        MatchCase::Agreement,
        MatchCase::BoundaryAmbiguityI,
        MatchCase::BoundaryAmbiguityII,
        MatchCase::BoundaryAmbiguityIII,
        MatchCase::MistakeMissed,
        MatchCase::MistakeIdentity,
    ];

    pub fn is_boundary_ambiguity(self) -> bool {
        matches!(
            self,
            MatchCase::BoundaryAmbiguityI | MatchCase::BoundaryAmbiguityII | MatchCase::BoundaryAmbiguityIII
        )
    }

    pub fn is_mistake(self) -> bool {
        matches!(self, MatchCase::MistakeMissed | MatchCase::MistakeIdentity)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatchCase::Agreement => "agreement",
            MatchCase::BoundaryAmbiguityI => "ba_i",
            MatchCase::BoundaryAmbiguityII => "ba_ii",
            MatchCase::BoundaryAmbiguityIII => "ba_iii",
            MatchCase::MistakeMissed => "mistake_missed",
            MatchCase::MistakeIdentity => "mistake_identity",
        }
    }

    pub(crate) fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MatchCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Start,
    End,
}

/// Combines two raters' versions of one boundary.
///
/// Within tolerance (inclusive) the boundaries are averaged, rounding half
/// up. Otherwise the one giving the larger gesture extent wins: the earlier
/// start or the later end.
pub fn merge_boundary(t1: TimePoint, t2: TimePoint, side: Side, cfg: &TimingConfig) -> TimePoint {
    if t1.ms().abs_diff(t2.ms()) <= cfg.tolerance_ms {
        t1.midpoint(t2)
    } else {
        match side {
            Side::Start => t1.min(t2),
            Side::End => t1.max(t2),
        }
    }
}

/// Why a mistake-identity conflict resolved to one segment's kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityBasis {
    IndexEvent,
    LongerDuration,
    RaterOrder,
    StartOrder,
}

/// How a group's union segment was formed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum UnionRule {
    /// Both boundaries averaged.
    Averaged,
    /// Each boundary through [`merge_boundary`].
    BoundaryMerge,
    /// Earliest start to latest end of all members.
    MaxExtent,
    /// Intake split/merge settled by index labels: `correct` lists the raters
    /// whose segment count equals the contained event count, and the union is
    /// the longer of the two raters' spans.
    IndexArbitrated { correct: Vec<String> },
    /// The lone segment is copied.
    Copied,
    /// The group's winning segment is copied.
    IdentityWinner { by: IdentityBasis },
    /// The region belongs to another group's union segment.
    Superseded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchGroup {
    pub case: MatchCase,
    pub kind: GestureKind,
    pub members_a: Vec<Segment>,
    pub members_b: Vec<Segment>,
    /// Overlapping segments outside the group, for mistake-identity.
    pub context: Vec<Segment>,
    /// Before union overlap trimming.
    pub union_segment: Option<Segment>,
    pub attributed_rater: Option<String>,
    #[serde(flatten)]
    pub rule: UnionRule,
}

impl MatchGroup {
    pub fn member_count(&self) -> usize {
        self.members_a.len() + self.members_b.len()
    }

    fn first_start(&self) -> TimePoint {
        self.members_a
            .iter()
            .chain(&self.members_b)
            .map(|s| s.start)
            .min()
            .unwrap_or_default()
    }
}

/// Group counts per (kind, case); one count per group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    cells: [[u64; 6]; 5],
}

impl CaseCounts {
    pub fn get(&self, kind: GestureKind, case: MatchCase) -> u64 {
        self.cells[kind.ordinal()][case.ordinal()]
    }

    pub fn add(&mut self, kind: GestureKind, case: MatchCase, n: u64) {
        self.cells[kind.ordinal()][case.ordinal()] += n;
    }

    pub fn merge(&mut self, other: &CaseCounts) {
        for kind in GestureKind::ALL {
            for case in MatchCase::ALL {
                self.add(kind, case, other.get(kind, case));
            }
        }
    }

    pub fn case_total(&self, case: MatchCase) -> u64 {
        GestureKind::ALL.iter().map(|&k| self.get(k, case)).sum()
    }

    pub fn kind_total(&self, kind: GestureKind) -> u64 {
        MatchCase::ALL.iter().map(|&c| self.get(kind, c)).sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchReport {
    pub meal_id: String,
    pub rater_a: String,
    pub rater_b: String,
    pub groups: Vec<MatchGroup>,
    pub union: Timeline,
    /// Case of the group each union segment came from, parallel to `union`.
    pub union_cases: Vec<MatchCase>,
    pub counts: CaseCounts,
}

pub const UNION_RATER: &str = "union";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("cannot match timelines of different meals: `{a}` vs `{b}`")]
    MealMismatch { a: String, b: String },
}

/// Sorted event times per intake kind.
struct EventIndex {
    bite: Vec<TimePoint>,
    drink: Vec<TimePoint>,
}

impl EventIndex {
    fn new(events: &[IndexEvent]) -> Self {
        let mut idx = EventIndex {
            bite: Vec::new(),
            drink: Vec::new(),
        };
        for e in events.iter().filter(|e| e.is_dominant()) {
            match e.kind {
                GestureKind::Bite => idx.bite.push(e.t),
                GestureKind::Drink => idx.drink.push(e.t),
                _ => {}
            }
        }
        idx.bite.sort_unstable();
        idx.drink.sort_unstable();
        idx
    }

    /// Events of `kind` inside the closed span.
    fn count(&self, kind: GestureKind, start: TimePoint, end: TimePoint) -> usize {
        let times = match kind {
            GestureKind::Bite => &self.bite,
            GestureKind::Drink => &self.drink,
            _ => return 0,
        };
        let lo = times.partition_point(|&t| t < start);
        let hi = times.partition_point(|&t| t <= end);
        hi - lo
    }

    fn corroborates(&self, seg: &Segment) -> bool {
        self.count(seg.kind, seg.start, seg.end) > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Who {
    A,
    B,
}

type Node = (Who, usize);

struct Matcher<'a> {
    a: &'a Timeline,
    b: &'a Timeline,
    events: EventIndex,
    cfg: &'a TimingConfig,
    nbr_a: Vec<Vec<usize>>,
    nbr_b: Vec<Vec<usize>>,
}

impl<'a> Matcher<'a> {
    fn seg(&self, (who, i): Node) -> Segment {
        match who {
            Who::A => self.a.segments()[i],
            Who::B => self.b.segments()[i],
        }
    }

    fn rater(&self, who: Who) -> &'a str {
        match who {
            Who::A => self.a.rater_id(),
            Who::B => self.b.rater_id(),
        }
    }

    fn other(who: Who) -> Who {
        match who {
            Who::A => Who::B,
            Who::B => Who::A,
        }
    }

    fn neighbors(&self, (who, i): Node) -> impl Iterator<Item = Node> + '_ {
        let (list, other) = match who {
            Who::A => (&self.nbr_a[i], Who::B),
            Who::B => (&self.nbr_b[i], Who::A),
        };
        list.iter().map(move |&j| (other, j))
    }

    fn degree(&self, (who, i): Node) -> usize {
        match who {
            Who::A => self.nbr_a[i].len(),
            Who::B => self.nbr_b[i].len(),
        }
    }

    fn group(&self, case: MatchCase, kind: GestureKind, members: &[Node]) -> MatchGroup {
        let pick = |w: Who| -> Vec<Segment> {
            let mut v: Vec<Segment> = members.iter().filter(|n| n.0 == w).map(|&n| self.seg(n)).collect();
            v.sort();
            v
        };
        MatchGroup {
            case,
            kind,
            members_a: pick(Who::A),
            members_b: pick(Who::B),
            context: Vec::new(),
            union_segment: None,
            attributed_rater: None,
            rule: UnionRule::Superseded,
        }
    }

    fn classify_matched(&self, comp: &Component) -> MatchGroup {
        let sa: Vec<Segment> = comp.a.iter().map(|&i| self.a.segments()[i]).collect();
        let sb: Vec<Segment> = comp.b.iter().map(|&j| self.b.segments()[j]).collect();
        let kind = sa[0].kind;
        let members: Vec<Node> = comp
            .a
            .iter()
            .map(|&i| (Who::A, i))
            .chain(comp.b.iter().map(|&j| (Who::B, j)))
            .collect();

        if sa.len() == 1 && sb.len() == 1 {
            let (x, y) = (sa[0], sb[0]);
            let tol = self.cfg.tolerance_ms;
            if x.start.ms().abs_diff(y.start.ms()) <= tol && x.end.ms().abs_diff(y.end.ms()) <= tol {
                let mut g = self.group(MatchCase::Agreement, kind, &members);
                g.union_segment = Segment::new(kind, x.start.midpoint(y.start), x.end.midpoint(y.end));
                g.rule = UnionRule::Averaged;
                return g;
            }
            // The merged extent is x ∪ y, so any third segment inside it
            // overlaps x or y.
            let crowded = self.degree((Who::A, comp.a[0])) > 1 || self.degree((Who::B, comp.b[0])) > 1;
            let case = if crowded {
                MatchCase::BoundaryAmbiguityIII
            } else {
                MatchCase::BoundaryAmbiguityI
            };
            let mut g = self.group(case, kind, &members);
            g.union_segment = Segment::new(
                kind,
                merge_boundary(x.start, y.start, Side::Start, self.cfg),
                merge_boundary(x.end, y.end, Side::End, self.cfg),
            );
            g.rule = UnionRule::BoundaryMerge;
            return g;
        }

        let mut g = self.group(MatchCase::BoundaryAmbiguityII, kind, &members);
        let span = |v: &[Segment]| Segment {
            kind,
            start: v.iter().map(|s| s.start).min().unwrap(),
            end: v.iter().map(|s| s.end).max().unwrap(),
        };
        let (span_a, span_b) = (span(&sa), span(&sb));
        let extent = Segment {
            kind,
            start: span_a.start.min(span_b.start),
            end: span_a.end.max(span_b.end),
        };
        g.union_segment = Some(extent);
        g.rule = UnionRule::MaxExtent;
        if kind.is_intake() {
            let mut correct = Vec::new();
            for (who, members, sp) in [(Who::A, &sa, &span_a), (Who::B, &sb, &span_b)] {
                if self.events.count(kind, sp.start, sp.end) == members.len() {
                    correct.push(self.rater(who).to_string());
                }
            }
            if !correct.is_empty() {
                correct.sort();
                correct.dedup();
                let longer = [span_a, span_b]
                    .into_iter()
                    .min_by_key(|s| (Reverse(s.duration_ms()), s.start))
                    .unwrap();
                g.union_segment = Some(longer);
                g.rule = UnionRule::IndexArbitrated { correct };
            }
        }
        g
    }

    /// Orders conflict candidates; smaller is stronger.
    fn rank(&self, n: Node) -> (Reverse<bool>, Reverse<u64>, &'a str, TimePoint, GestureKind) {
        let s = self.seg(n);
        (
            Reverse(self.events.corroborates(&s)),
            Reverse(s.duration_ms()),
            self.rater(n.0),
            s.start,
            s.kind,
        )
    }

    fn basis(&self, winner: Node, loser: Node) -> IdentityBasis {
        let (w, l) = (self.rank(winner), self.rank(loser));
        if w.0 != l.0 {
            IdentityBasis::IndexEvent
        } else if w.1 != l.1 {
            IdentityBasis::LongerDuration
        } else if w.2 != l.2 {
            IdentityBasis::RaterOrder
        } else {
            IdentityBasis::StartOrder
        }
    }

    fn context_of(&self, members: &[Node]) -> Vec<Segment> {
        let mut ctx: Vec<Segment> = members
            .iter()
            .flat_map(|&m| self.neighbors(m))
            .filter(|n| !members.contains(n))
            .map(|n| self.seg(n))
            .collect();
        ctx.sort();
        ctx.dedup();
        ctx
    }

    /// Groups for segments without a same-kind counterpart.
    fn classify_unmatched(&self, unmatched: &[Node], is_unmatched: impl Fn(Node) -> bool) -> Vec<MatchGroup> {
        let mut groups = Vec::new();
        let mut seen: Vec<Node> = Vec::new();
        for &start in unmatched {
            if seen.contains(&start) {
                continue;
            }
            let s = self.seg(start);
            if self.degree(start) == 0 {
                let mut g = self.group(MatchCase::MistakeMissed, s.kind, &[start]);
                g.union_segment = Some(s);
                g.rule = UnionRule::Copied;
                g.attributed_rater = Some(self.rater(Self::other(start.0)).to_string());
                groups.push(g);
                seen.push(start);
                continue;
            }

            // conflict component among unmatched segments
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            seen.push(start);
            while let Some(n) = queue.pop_front() {
                for m in self.neighbors(n) {
                    if is_unmatched(m) && !seen.contains(&m) {
                        seen.push(m);
                        comp.push(m);
                        queue.push_back(m);
                    }
                }
            }

            if comp.len() == 1 {
                // only overlaps matched segments of other kinds
                let mut g = self.group(MatchCase::MistakeIdentity, s.kind, &comp);
                g.context = self.context_of(&comp);
                if s.kind.is_intake() && self.events.corroborates(&s) {
                    g.union_segment = Some(s);
                    g.rule = UnionRule::IdentityWinner {
                        by: IdentityBasis::IndexEvent,
                    };
                    g.attributed_rater = Some(self.rater(Self::other(start.0)).to_string());
                } else {
                    g.attributed_rater = Some(self.rater(start.0).to_string());
                }
                groups.push(g);
                continue;
            }

            groups.extend(self.resolve_conflict(comp));
        }
        groups
    }

    /// Greedy: the strongest remaining segment wins and knocks out everything
    /// it overlaps. Each loser joins the overlapping winner it shares the
    /// most time with.
    fn resolve_conflict(&self, mut comp: Vec<Node>) -> Vec<MatchGroup> {
        comp.sort_by_key(|&n| self.rank(n));
        let mut winners: Vec<Node> = Vec::new();
        let mut losers: Vec<Node> = Vec::new();
        for &n in &comp {
            if losers.contains(&n) {
                continue;
            }
            winners.push(n);
            for m in self.neighbors(n) {
                if comp.contains(&m) && !losers.contains(&m) {
                    losers.push(m);
                }
            }
        }
        let mut assigned: Vec<Vec<Node>> = vec![Vec::new(); winners.len()];
        for &l in &losers {
            let ls = self.seg(l);
            let best = winners
                .iter()
                .enumerate()
                .filter(|(_, &w)| self.seg(w).overlaps(&ls))
                .max_by_key(|(_, &w)| (self.seg(w).intersection_ms(&ls), Reverse(self.seg(w).start)))
                .map(|(k, _)| k)
                .expect("every loser overlaps the winner that knocked it out");
            assigned[best].push(l);
        }

        winners
            .iter()
            .zip(assigned)
            .map(|(&w, ls)| {
                let ws = self.seg(w);
                let mut members = vec![w];
                members.extend(&ls);
                let strongest = ls
                    .iter()
                    .copied()
                    .chain(self.neighbors(w).filter(|n| comp.contains(n)))
                    .min_by_key(|&n| self.rank(n))
                    .expect("conflict members have neighbors");
                let mut g = self.group(MatchCase::MistakeIdentity, ws.kind, &members);
                g.context = self.context_of(&members);
                g.union_segment = Some(ws);
                g.rule = UnionRule::IdentityWinner {
                    by: self.basis(w, strongest),
                };
                g.attributed_rater = Some(self.rater(Self::other(w.0)).to_string());
                g
            })
            .collect()
    }
}

/// Matches two raters' timelines of one meal.
///
/// `index_events` may contain non-dominant events; they are ignored.
pub fn match_pair(
    a: &Timeline,
    b: &Timeline,
    index_events: &[IndexEvent],
    cfg: &TimingConfig,
) -> Result<MatchReport, MatchError> {
    if a.meal_id() != b.meal_id() {
        return Err(MatchError::MealMismatch {
            a: a.meal_id().to_string(),
            b: b.meal_id().to_string(),
        });
    }
    let pairs = overlap_pairs(a.segments(), b.segments());
    let mut nbr_a = vec![Vec::new(); a.len()];
    let mut nbr_b = vec![Vec::new(); b.len()];
    for &(i, j) in &pairs {
        nbr_a[i].push(j);
        nbr_b[j].push(i);
    }
    let m = Matcher {
        a,
        b,
        events: EventIndex::new(index_events),
        cfg,
        nbr_a,
        nbr_b,
    };

    let comps = same_kind_components(a.segments(), b.segments(), &pairs);
    let mut groups = Vec::new();
    let mut unmatched: Vec<Node> = Vec::new();
    let mut unmatched_a = vec![false; a.len()];
    let mut unmatched_b = vec![false; b.len()];
    for comp in &comps {
        if comp.a.is_empty() || comp.b.is_empty() {
            for &i in &comp.a {
                unmatched.push((Who::A, i));
                unmatched_a[i] = true;
            }
            for &j in &comp.b {
                unmatched.push((Who::B, j));
                unmatched_b[j] = true;
            }
        } else {
            groups.push(m.classify_matched(comp));
        }
    }
    groups.extend(m.classify_unmatched(&unmatched, |(who, i)| match who {
        Who::A => unmatched_a[i],
        Who::B => unmatched_b[i],
    }));
    groups.sort_by(|x, y| {
        (x.first_start(), x.case, x.kind, &x.members_a, &x.members_b).cmp(&(
            y.first_start(),
            y.case,
            y.kind,
            &y.members_a,
            &y.members_b,
        ))
    });

    let mut counts = CaseCounts::default();
    for g in &groups {
        counts.add(g.kind, g.case, 1);
    }

    let items = groups
        .iter()
        .filter_map(|g| {
            g.union_segment.map(|seg| UnionItem {
                seg,
                case: g.case,
                corroborated: seg.kind.is_intake() && m.events.corroborates(&seg),
            })
        })
        .collect();
    let resolved = resolve_union(items, cfg);
    let union = Timeline::from_valid(
        a.meal_id().to_string(),
        UNION_RATER.to_string(),
        resolved.iter().map(|it| it.seg).collect(),
        cfg,
    );

    Ok(MatchReport {
        meal_id: a.meal_id().to_string(),
        rater_a: a.rater_id().to_string(),
        rater_b: b.rater_id().to_string(),
        groups,
        union,
        union_cases: resolved.iter().map(|it| it.case).collect(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct UnionItem {
    seg: Segment,
    case: MatchCase,
    corroborated: bool,
}

fn insert_sorted_desc(pending: &mut Vec<UnionItem>, item: UnionItem) {
    let pos = pending.partition_point(|p| p > &item);
    pending.insert(pos, item);
}

/// Makes union segments disjoint. A later-starting segment is trimmed to
/// begin where the earlier one ends and dropped if that leaves it too short,
/// unless it is an intake gesture backed by an index event and the earlier
/// one is not intake; then the earlier segment is cut around it instead.
fn resolve_union(mut pending: Vec<UnionItem>, cfg: &TimingConfig) -> Vec<UnionItem> {
    let min = |k: GestureKind| cfg.min_duration_ms(k);
    pending.sort_by(|x, y| y.cmp(x));
    let mut out: Vec<UnionItem> = Vec::new();
    while let Some(mut cur) = pending.pop() {
        let Some(prev) = out.last_mut() else {
            out.push(cur);
            continue;
        };
        if cur.seg.start >= prev.seg.end {
            out.push(cur);
            continue;
        }
        if cur.seg.end > prev.seg.end && cur.seg.end.ms() - prev.seg.end.ms() >= min(cur.seg.kind) {
            cur.seg.start = prev.seg.end;
            insert_sorted_desc(&mut pending, cur);
            continue;
        }
        if cur.corroborated && cur.seg.kind.is_intake() && !prev.seg.kind.is_intake() {
            let old_end = prev.seg.end;
            prev.seg.end = cur.seg.start;
            if old_end > cur.seg.end && old_end.ms() - cur.seg.end.ms() >= min(prev.seg.kind) {
                let mut rest = *prev;
                rest.seg.start = cur.seg.end;
                rest.seg.end = old_end;
                rest.corroborated = false;
                insert_sorted_desc(&mut pending, rest);
            }
            if prev.seg.end <= prev.seg.start || prev.seg.duration_ms() < min(prev.seg.kind) {
                out.pop();
            }
            out.push(cur);
        }
        // otherwise cur is swallowed by prev
    }
    out
}

/// Union timeline in segment-file form with `case` and `derived` columns;
/// derived `other` rows are included with `derived=1`.
pub fn write_union_csv(report: &MatchReport, cfg: &TimingConfig) -> String {
    let cases: Vec<&str> = report.union_cases.iter().map(|c| c.as_str()).collect();
    union_csv(&report.union, &cases, cfg)
}

/// The same layout for a meal with a single rater, whose timeline passes
/// through unmatched; the `case` column is left empty.
pub fn write_passthrough_union_csv(timeline: &Timeline, cfg: &TimingConfig) -> String {
    union_csv(timeline, &vec![""; timeline.len()], cfg)
}

fn union_csv(union: &Timeline, cases: &[&str], cfg: &TimingConfig) -> String {
    let mut rows: Vec<(Segment, &str, u8)> = union.segments().iter().zip(cases).map(|(s, c)| (*s, *c, 0)).collect();
    rows.extend(derive_other_segments(union, cfg).into_iter().map(|s| (s, "", 1)));
    rows.sort_by_key(|r| (r.0.start, r.0.end));
    let mut out = format!("{},case,derived\n", SEGMENT_HEADER.join(","));
    for (s, case, derived) in rows {
        out.push_str(&format!("{},{},{},{},{}\n", s.kind, s.start, s.end, case, derived));
    }
    out
}

/// One line of the group report.
#[derive(Debug, Clone, Serialize)]
pub struct GroupRecord<'a> {
    pub meal_id: &'a str,
    pub rater_a: &'a str,
    pub rater_b: &'a str,
    #[serde(flatten)]
    pub group: &'a MatchGroup,
}

impl MatchReport {
    pub fn records(&self) -> impl Iterator<Item = GroupRecord<'_>> {
        self.groups.iter().map(move |group| GroupRecord {
            meal_id: &self.meal_id,
            rater_a: &self.rater_a,
            rater_b: &self.rater_b,
            group,
        })
    }

    /// Group report as JSON lines, one record per group.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            out.push_str(&serde_json::to_string(&r).expect("group records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn case_multiset(&self) -> Vec<(GestureKind, MatchCase)> {
        let mut v: Vec<_> = self.groups.iter().map(|g| (g.kind, g.case)).collect();
        v.sort();
        v
    }
}
