//! Aggregate tables: gesture durations, case breakdown per kind, index
//! comparison by rater coverage, and per-rater reliability.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::indexcmp::IndexCounts;
use crate::ingest::Corpus;
use crate::matcher::{CaseCounts, MatchCase, MatchReport};
use crate::model::{derive_other_segments, GestureKind, Timeline, TimingConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
    JsonLines,
}

/// One machine-readable table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub table: &'static str,
    pub row: String,
    pub column: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percent: Option<f64>,
}

fn percent(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

fn render_grid(title: &str, header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let line = |out: &mut String, cells: &[String]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "  {cell:>w$}");
            }
        }
        out.push('\n');
    };
    line(&mut out, header);
    let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1)));
    for row in rows {
        line(&mut out, row);
    }
    out
}

pub fn render_cells(cells: &[Cell], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from("table,row,column,value,percent\n");
            for c in cells {
                let pct = c.percent.map(|p| p.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{},{},{},{},{}", c.table, c.row, c.column, c.value, pct);
            }
            out
        }
        ReportFormat::JsonLines => cells
            .iter()
            .map(|c| serde_json::to_string(c).expect("cells serialize") + "\n")
            .collect(),
        ReportFormat::Text => unreachable!("text rendering is table specific"),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KindDurations {
    pub count: u64,
    pub mean_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub min_ms: u64,
    pub max_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DurationStats {
    pub per_kind: BTreeMap<GestureKind, KindDurations>,
}

impl DurationStats {
    pub fn get(&self, kind: GestureKind) -> KindDurations {
        self.per_kind.get(&kind).copied().unwrap_or_default()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for kind in GestureKind::ALL {
            let d = self.get(kind);
            for (column, value) in [
                ("count", d.count as f64),
                ("mean_s", d.mean_ms / 1000.0),
                ("std_s", d.std_ms / 1000.0),
                ("min_s", d.min_ms as f64 / 1000.0),
                ("max_s", d.max_ms as f64 / 1000.0),
            ] {
                cells.push(Cell {
                    table: "durations",
                    row: kind.to_string(),
                    column: column.to_string(),
                    value,
                    percent: None,
                });
            }
        }
        cells
    }

    pub fn render(&self, format: ReportFormat) -> String {
        if format != ReportFormat::Text {
            return render_cells(&self.cells(), format);
        }
        let header: Vec<String> = ["Type", "#Gestures", "Average ± Stddev (s)", "Min (s)", "Max (s)"]
            .map(String::from)
            .to_vec();
        let rows: Vec<Vec<String>> = GestureKind::ALL
            .iter()
            .map(|&k| {
                let d = self.get(k);
                vec![
                    k.to_string(),
                    d.count.to_string(),
                    format!("{:.1} ± {:.1}", d.mean_ms / 1000.0, d.std_ms / 1000.0),
                    format!("{:.1}", d.min_ms as f64 / 1000.0),
                    format!("{:.1}", d.max_ms as f64 / 1000.0),
                ]
            })
            .collect();
        render_grid("Gesture durations", &header, &rows)
    }
}

/// Durations of every labeled gesture plus derived `Other`, pooled over all
/// raters of all meals.
pub fn duration_stats_of<'a>(timelines: impl IntoIterator<Item = &'a Timeline>, cfg: &TimingConfig) -> DurationStats {
    struct Acc {
        n: u64,
        sum: u128,
        sum_sq: u128,
        min: u64,
        max: u64,
    }
    let mut acc: BTreeMap<GestureKind, Acc> = BTreeMap::new();
    let mut add = |kind: GestureKind, d: u64| {
        let a = acc.entry(kind).or_insert(Acc {
            n: 0,
            sum: 0,
            sum_sq: 0,
            min: u64::MAX,
            max: 0,
        });
        a.n += 1;
        a.sum += d as u128;
        a.sum_sq += (d as u128) * (d as u128);
        a.min = a.min.min(d);
        a.max = a.max.max(d);
    };
    for t in timelines {
        for s in t.segments() {
            add(s.kind, s.duration_ms());
        }
        for s in derive_other_segments(t, cfg) {
            add(s.kind, s.duration_ms());
        }
    }
    let per_kind = acc
        .into_iter()
        .map(|(k, a)| {
            let n = a.n as f64;
            let mean = a.sum as f64 / n;
            // exact integer variance numerator: n·Σx² − (Σx)²
            let num = a.n as u128 * a.sum_sq - a.sum * a.sum;
            let std = (num as f64).sqrt() / n;
            (
                k,
                KindDurations {
                    count: a.n,
                    mean_ms: mean,
                    std_ms: std,
                    min_ms: a.min,
                    max_ms: a.max,
                },
            )
        })
        .collect();
    DurationStats { per_kind }
}

pub fn duration_stats(corpus: &Corpus, cfg: &TimingConfig) -> DurationStats {
    duration_stats_of(corpus.timelines(), cfg)
}

/// Row of the reliability table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReliabilityRow {
    Case(MatchCase),
    OverallMistake,
    OverallBoundaryAmbiguity,
    OverallAgreement,
    Gestures,
}

impl ReliabilityRow {
    pub const ALL: [ReliabilityRow; 10] = [
        ReliabilityRow::Case(MatchCase::Agreement),
        ReliabilityRow::Case(MatchCase::BoundaryAmbiguityI),
        ReliabilityRow::Case(MatchCase::BoundaryAmbiguityII),
        ReliabilityRow::Case(MatchCase::BoundaryAmbiguityIII),
        ReliabilityRow::Case(MatchCase::MistakeMissed),
        ReliabilityRow::Case(MatchCase::MistakeIdentity),
        ReliabilityRow::OverallMistake,
        ReliabilityRow::OverallBoundaryAmbiguity,
        ReliabilityRow::OverallAgreement,
        ReliabilityRow::Gestures,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReliabilityRow::Case(MatchCase::Agreement) => "Agreement",
            ReliabilityRow::Case(MatchCase::BoundaryAmbiguityI) => "BA I",
            ReliabilityRow::Case(MatchCase::BoundaryAmbiguityII) => "BA II",
            ReliabilityRow::Case(MatchCase::BoundaryAmbiguityIII) => "BA III",
            ReliabilityRow::Case(MatchCase::MistakeMissed) => "Mistake-missed",
            ReliabilityRow::Case(MatchCase::MistakeIdentity) => "Mistake-identity",
            ReliabilityRow::OverallMistake => "Overall mistake",
            ReliabilityRow::OverallBoundaryAmbiguity => "Overall BA",
            ReliabilityRow::OverallAgreement => "Overall agreement",
            ReliabilityRow::Gestures => "#Gestures",
        }
    }
}

/// Case counts of one column (one kind, or all kinds).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CaseColumn {
    pub cases: [u64; 6],
}

impl CaseColumn {
    pub fn from_cases(agreement: u64, ba1: u64, ba2: u64, ba3: u64, missed: u64, identity: u64) -> Self {
        CaseColumn {
            cases: [agreement, ba1, ba2, ba3, missed, identity],
        }
    }

    pub fn case(&self, case: MatchCase) -> u64 {
        self.cases[case.ordinal()]
    }

    pub fn count(&self, row: ReliabilityRow) -> u64 {
        use MatchCase::*;
        match row {
            ReliabilityRow::Case(c) => self.case(c),
            ReliabilityRow::OverallMistake => self.case(MistakeMissed) + self.case(MistakeIdentity),
            ReliabilityRow::OverallBoundaryAmbiguity => {
                self.case(BoundaryAmbiguityI) + self.case(BoundaryAmbiguityII) + self.case(BoundaryAmbiguityIII)
            }
            ReliabilityRow::OverallAgreement => {
                self.case(Agreement) + self.count(ReliabilityRow::OverallBoundaryAmbiguity)
            }
            ReliabilityRow::Gestures => self.cases.iter().sum(),
        }
    }

    /// `count / #Gestures` in percent, unrounded.
    pub fn percent(&self, row: ReliabilityRow) -> f64 {
        percent(self.count(row), self.count(ReliabilityRow::Gestures))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReliabilityTable {
    pub overall: CaseColumn,
    pub bite: CaseColumn,
    pub drink: CaseColumn,
    pub rest: CaseColumn,
    pub utensiling: CaseColumn,
}

impl ReliabilityTable {
    pub fn from_counts(counts: &CaseCounts) -> Self {
        let column = |kind: GestureKind| CaseColumn {
            cases: MatchCase::ALL.map(|c| counts.get(kind, c)),
        };
        ReliabilityTable {
            overall: CaseColumn {
                cases: MatchCase::ALL.map(|c| counts.case_total(c)),
            },
            bite: column(GestureKind::Bite),
            drink: column(GestureKind::Drink),
            rest: column(GestureKind::Rest),
            utensiling: column(GestureKind::Utensiling),
        }
    }

    pub fn columns(&self) -> [(&'static str, &CaseColumn); 5] {
        [
            ("all", &self.overall),
            ("bite", &self.bite),
            ("drink", &self.drink),
            ("rest", &self.rest),
            ("utensiling", &self.utensiling),
        ]
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for row in ReliabilityRow::ALL {
            for (name, col) in self.columns() {
                cells.push(Cell {
                    table: "reliability",
                    row: row.label().to_string(),
                    column: name.to_string(),
                    value: col.count(row) as f64,
                    percent: (row != ReliabilityRow::Gestures).then(|| col.percent(row)),
                });
            }
        }
        cells
    }

    pub fn render(&self, format: ReportFormat) -> String {
        if format != ReportFormat::Text {
            return render_cells(&self.cells(), format);
        }
        let mut header = vec!["Cases".to_string()];
        header.extend(self.columns().iter().map(|(n, _)| n.to_string()));
        let rows: Vec<Vec<String>> = ReliabilityRow::ALL
            .iter()
            .map(|&row| {
                let mut r = vec![row.label().to_string()];
                for (_, col) in self.columns() {
                    r.push(if row == ReliabilityRow::Gestures {
                        col.count(row).to_string()
                    } else {
                        format!("{} ({:.1}%)", col.count(row), col.percent(row))
                    });
                }
                r
            })
            .collect();
        render_grid("Inter-rater reliability (two raters)", &header, &rows)
    }
}

/// Sums case counts over reports; order of `reports` does not matter.
pub fn reliability_table(reports: &[MatchReport]) -> ReliabilityTable {
    let mut counts = CaseCounts::default();
    for r in reports {
        counts.merge(&r.counts);
    }
    ReliabilityTable::from_counts(&counts)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IndexTable {
    pub one_rater: IndexCounts,
    pub two_raters: IndexCounts,
}

impl IndexTable {
    pub fn agreement_percent(c: &IndexCounts) -> f64 {
        percent(c.agreement, c.total())
    }

    pub fn ambiguity_percent(c: &IndexCounts) -> f64 {
        percent(c.ambiguity, c.total())
    }

    pub fn missed_percent(c: &IndexCounts) -> f64 {
        percent(c.missed(), c.total())
    }

    fn rows(c: &IndexCounts) -> [(&'static str, u64, Option<f64>); 4] {
        [
            ("Agreement", c.agreement, Some(Self::agreement_percent(c))),
            ("Ambiguity", c.ambiguity, Some(Self::ambiguity_percent(c))),
            ("Missed", c.missed(), Some(Self::missed_percent(c))),
            ("#Gestures", c.total(), None),
        ]
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for (column, c) in [("one_rater", &self.one_rater), ("two_raters", &self.two_raters)] {
            for (row, count, pct) in Self::rows(c) {
                cells.push(Cell {
                    table: "index",
                    row: row.to_string(),
                    column: column.to_string(),
                    value: count as f64,
                    percent: pct,
                });
            }
        }
        cells
    }

    pub fn render(&self, format: ReportFormat) -> String {
        if format != ReportFormat::Text {
            return render_cells(&self.cells(), format);
        }
        let header = ["", "One rater", "Two raters"].map(String::from).to_vec();
        let one = Self::rows(&self.one_rater);
        let two = Self::rows(&self.two_raters);
        let fmt = |(_, n, p): (&str, u64, Option<f64>)| match p {
            Some(p) => format!("{n} ({p:.1}%)"),
            None => n.to_string(),
        };
        let rows: Vec<Vec<String>> = one
            .iter()
            .zip(two.iter())
            .map(|(o, t)| vec![o.0.to_string(), fmt(*o), fmt(*t)])
            .collect();
        render_grid("Intake gestures vs index labels", &header, &rows)
    }
}

/// Combines per-meal index comparisons into the two coverage columns.
pub fn index_table<'a>(outcomes: impl IntoIterator<Item = (usize, &'a IndexCounts)>) -> IndexTable {
    let mut t = IndexTable::default();
    for (raters, counts) in outcomes {
        if raters >= 2 {
            t.two_raters.merge(counts);
        } else {
            t.one_rater.merge(counts);
        }
    }
    t
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RaterRow {
    pub rater: String,
    pub meals: u64,
    pub exact: u64,
    pub boundary_ambiguity: u64,
    pub mistake: u64,
}

impl RaterRow {
    pub fn total_agreement(&self) -> u64 {
        self.exact + self.boundary_ambiguity
    }

    pub fn gestures(&self) -> u64 {
        self.total_agreement() + self.mistake
    }

    pub fn percent_total_agreement(&self) -> f64 {
        percent(self.total_agreement(), self.gestures())
    }

    pub fn percent_exact(&self) -> f64 {
        percent(self.exact, self.gestures())
    }

    pub fn percent_boundary_ambiguity(&self) -> f64 {
        percent(self.boundary_ambiguity, self.gestures())
    }

    pub fn percent_mistake(&self) -> f64 {
        percent(self.mistake, self.gestures())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RaterTable {
    pub rows: Vec<RaterRow>,
}

impl RaterTable {
    pub fn row(&self, rater: &str) -> Option<&RaterRow> {
        self.rows.iter().find(|r| r.rater == rater)
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for r in &self.rows {
            for (column, value, pct) in [
                ("gestures", r.gestures(), None),
                (
                    "total_agreement",
                    r.total_agreement(),
                    Some(r.percent_total_agreement()),
                ),
                ("agreement", r.exact, Some(r.percent_exact())),
                ("ba", r.boundary_ambiguity, Some(r.percent_boundary_ambiguity())),
                ("mistake", r.mistake, Some(r.percent_mistake())),
            ] {
                cells.push(Cell {
                    table: "raters",
                    row: r.rater.clone(),
                    column: column.to_string(),
                    value: value as f64,
                    percent: pct,
                });
            }
        }
        cells
    }

    pub fn render(&self, format: ReportFormat) -> String {
        if format != ReportFormat::Text {
            return render_cells(&self.cells(), format);
        }
        let header = ["Rater", "#Gestures", "Total agreement", "Agreement", "BA", "Mistake"]
            .map(String::from)
            .to_vec();
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.rater.clone(),
                    r.gestures().to_string(),
                    format!("{} ({:.0}%)", r.total_agreement(), r.percent_total_agreement()),
                    format!("{} ({:.0}%)", r.exact, r.percent_exact()),
                    format!("{} ({:.0}%)", r.boundary_ambiguity, r.percent_boundary_ambiguity()),
                    format!("{} ({:.0}%)", r.mistake, r.percent_mistake()),
                ]
            })
            .collect();
        render_grid("Per-rater reliability", &header, &rows)
    }
}

/// Agreement and boundary-ambiguity groups count for both raters; a mistake
/// counts only against the rater it is attributed to. Raters seen in fewer
/// than `min_meals` reports are left out.
pub fn rater_table(reports: &[MatchReport], min_meals: u64) -> RaterTable {
    let mut rows: BTreeMap<String, RaterRow> = BTreeMap::new();
    for r in reports {
        let mut raters = vec![r.rater_a.as_str(), r.rater_b.as_str()];
        raters.dedup();
        for rater in &raters {
            let row = rows.entry(rater.to_string()).or_insert_with(|| RaterRow {
                rater: rater.to_string(),
                ..Default::default()
            });
            row.meals += 1;
            for g in &r.groups {
                if g.case == MatchCase::Agreement {
                    row.exact += 1;
                } else if g.case.is_boundary_ambiguity() {
                    row.boundary_ambiguity += 1;
                } else if g.attributed_rater.as_deref() == Some(*rater) {
                    row.mistake += 1;
                }
            }
        }
    }
    RaterTable {
        rows: rows.into_values().filter(|r| r.meals >= min_meals).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GestureKind::*, Segment};

    #[test]
    fn single_bite_durations() {
        let cfg = TimingConfig::default();
        let t = Timeline::new("m", "r", vec![Segment::ms(Bite, 0, 2000)], &cfg).unwrap();
        let s = duration_stats_of([&t], &cfg);
        let b = s.get(Bite);
        assert_eq!(
            (b.count, b.mean_ms, b.std_ms, b.min_ms, b.max_ms),
            (1, 2000.0, 0.0, 2000, 2000)
        );
        assert_eq!(s.get(Drink).count, 0);
    }

    #[test]
    fn derived_other_is_counted() {
        let cfg = TimingConfig::default();
        let t = Timeline::new(
            "m",
            "r",
            vec![Segment::ms(Rest, 5000, 7000), Segment::ms(Rest, 13000, 16000)],
            &cfg,
        )
        .unwrap();
        let o = duration_stats_of([&t], &cfg).get(Other);
        assert_eq!((o.count, o.min_ms, o.max_ms), (2, 5000, 6000));
        assert_eq!(o.std_ms, 500.0);
    }

    #[test]
    fn empty_reports_render_zeros() {
        let t = reliability_table(&[]);
        for row in ReliabilityRow::ALL {
            assert_eq!(t.overall.count(row), 0);
            assert_eq!(t.overall.percent(row), 0.0);
        }
        assert!(t.render(ReportFormat::Text).contains("0 (0.0%)"));
    }

    #[test]
    fn rater_below_min_meals_is_excluded() {
        let cfg = TimingConfig::default();
        let a = Timeline::new("m", "a", vec![Segment::ms(Bite, 0, 2000)], &cfg).unwrap();
        let b = a.with_rater("b");
        let r = crate::matcher::match_pair(&a, &b, &[], &cfg).unwrap();
        let table = rater_table(std::slice::from_ref(&r), 2);
        assert!(table.rows.is_empty());
        let table = rater_table(&[r], 1);
        assert_eq!(table.row("a").unwrap().exact, 1);
    }

    #[test]
    fn csv_and_json_lines() {
        let t = IndexTable::default();
        let csv = t.render(ReportFormat::Csv);
        assert!(csv.starts_with("table,row,column,value,percent\nindex,Agreement,one_rater,0,0\n"));
        let jl = t.render(ReportFormat::JsonLines);
        assert_eq!(jl.lines().count(), 8);
        let v: serde_json::Value = serde_json::from_str(jl.lines().last().unwrap()).unwrap();
        assert_eq!(v["row"], "#Gestures");
        assert!(v.get("percent").is_none());
    }
}
