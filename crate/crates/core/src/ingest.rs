//! Label files on disk.
//!
//! Segment files are CSV with a `kind,start_ms,end_ms` header, one file per
//! (meal, rater). Index files carry `kind,time_ms,hand`. Lines starting with
//! `#` are comments. A corpus is laid out as
//!
//! ```text
//! corpus/<meal_id>/rater_<rater_id>.csv
//! corpus/<meal_id>/index.csv
//! ```
//!
//! Parsing never stops at the first problem: every violation in a file is
//! returned so a rater can fix them in one pass.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{check_segments, GestureKind, Hand, IndexEvent, Segment, TimePoint, Timeline, TimingConfig};

pub const SEGMENT_HEADER: [&str; 3] = ["kind", "start_ms", "end_ms"];
pub const INDEX_HEADER: [&str; 3] = ["kind", "time_ms", "hand"];
pub const INDEX_FILE: &str = "index.csv";
pub const PROVENANCE_FILE: &str = "provenance.csv";
const RATER_PREFIX: &str = "rater_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    MinDuration,
    Overlap,
    Unordered,
    BadKind,
    NegativeTime,
    /// Malformed CSV: wrong header, missing column, non-integer time.
    Syntax,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub meal_id: String,
    pub rater_id: String,
    /// Position of the offending row among data rows.
    pub ordinal: Option<usize>,
    /// 1-based line in the source file, when known.
    pub line: Option<u64>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.meal_id, self.rater_id)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        write!(f, ": {}: {}", self.rule, self.message)
    }
}

/// Unit of the time columns in input files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TimeUnit {
    #[default]
    Millis,
    /// Sample indices of the 15 Hz wrist tracker.
    Samples15Hz,
}

impl TimeUnit {
    fn to_time(self, raw: u64) -> TimePoint {
        match self {
            TimeUnit::Millis => TimePoint::from_ms(raw),
            TimeUnit::Samples15Hz => TimePoint::from_sample_15hz(raw),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Issues<'a> {
    meal_id: &'a str,
    rater_id: &'a str,
    list: Vec<ValidationIssue>,
}

impl Issues<'_> {
    fn push(&mut self, line: Option<u64>, ordinal: Option<usize>, rule: Rule, message: impl Into<String>) {
        self.list.push(ValidationIssue {
            meal_id: self.meal_id.to_string(),
            rater_id: self.rater_id.to_string(),
            ordinal,
            line,
            rule,
            message: message.into(),
        });
    }
}

/// Physical line of a record. The reader counts neither comment lines nor
/// skips them when recording where a record begins.
fn line_of(bytes: &[u8], pos: &csv::Position) -> u64 {
    let mut at = (pos.byte() as usize).min(bytes.len());
    let mut line = bytes[..at].iter().filter(|&&b| b == b'\n').count() as u64 + 1;
    while bytes.get(at) == Some(&b'#') {
        match bytes[at..].iter().position(|&b| b == b'\n') {
            Some(n) => {
                at += n + 1;
                line += 1;
            }
            None => break,
        }
    }
    line
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes)
}

/// Checks that the header starts with `expected`; returns the positions of
/// the optional `derived` column.
fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str], issues: &mut Issues) -> Option<Option<usize>> {
    let header = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            issues.push(Some(1), None, Rule::Syntax, format!("unreadable header: {e}"));
            return None;
        }
    };
    let got: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        issues.push(
            Some(1),
            None,
            Rule::Syntax,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        );
        return None;
    }
    Some(got.iter().position(|h| h == "derived"))
}

fn parse_time(field: &str, column: &str, unit: TimeUnit) -> Result<TimePoint, (Rule, String)> {
    match field.parse::<i64>() {
        Ok(v) if v < 0 => Err((Rule::NegativeTime, format!("{column} {v} is negative"))),
        Ok(v) => Ok(unit.to_time(v as u64)),
        Err(_) => Err((Rule::Syntax, format!("{column} `{field}` is not an integer"))),
    }
}

/// Parses one rater's segment file.
pub fn parse_segment_file(
    bytes: &[u8],
    meal_id: &str,
    rater_id: &str,
    cfg: &TimingConfig,
    unit: TimeUnit,
) -> Result<Timeline, Vec<ValidationIssue>> {
    let mut issues = Issues {
        meal_id,
        rater_id,
        list: Vec::new(),
    };
    let mut rdr = reader(bytes);
    let Some(derived_col) = check_header(&mut rdr, &SEGMENT_HEADER, &mut issues) else {
        return Err(issues.list);
    };

    let mut rows: Vec<(u64, usize, Segment)> = Vec::new();
    for (ordinal, record) in rdr.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| line_of(bytes, p));
                issues.push(line, Some(ordinal), Rule::Syntax, e.to_string());
                continue;
            }
        };
        let line = record.position().map_or(0, |p| line_of(bytes, p));
        if record.len() < SEGMENT_HEADER.len() {
            issues.push(
                Some(line),
                Some(ordinal),
                Rule::Syntax,
                format!("expected 3 columns, found {}", record.len()),
            );
            continue;
        }
        let derived = derived_col.and_then(|c| record.get(c)).is_some_and(|v| v == "1");
        let kind = match record[0].parse::<GestureKind>() {
            Ok(GestureKind::Other) if derived => continue,
            Ok(GestureKind::Other) => {
                issues.push(
                    Some(line),
                    Some(ordinal),
                    Rule::BadKind,
                    "`other` is derived from gaps and cannot be labeled",
                );
                None
            }
            Ok(k) => Some(k),
            Err(e) => {
                issues.push(Some(line), Some(ordinal), Rule::BadKind, e.to_string());
                None
            }
        };
        let start = parse_time(&record[1], "start", unit);
        let end = parse_time(&record[2], "end", unit);
        let mut times_ok = true;
        for r in [&start, &end] {
            if let Err((rule, msg)) = r {
                issues.push(Some(line), Some(ordinal), *rule, msg.clone());
                times_ok = false;
            }
        }
        let (Some(kind), true) = (kind, times_ok) else { continue };
        let (start, end) = (start.unwrap(), end.unwrap());
        match Segment::new(kind, start, end) {
            Some(seg) => rows.push((line, ordinal, seg)),
            None => issues.push(
                Some(line),
                Some(ordinal),
                Rule::Unordered,
                format!("start {start} is not before end {end}"),
            ),
        }
    }

    let segments: Vec<Segment> = rows.iter().map(|r| r.2).collect();
    for mut issue in check_segments(meal_id, rater_id, &segments, cfg) {
        if let Some(i) = issue.ordinal {
            issue.line = Some(rows[i].0);
            issue.ordinal = Some(rows[i].1);
        }
        issues.list.push(issue);
    }

    if issues.list.is_empty() {
        Ok(Timeline::from_valid(
            meal_id.to_string(),
            rater_id.to_string(),
            segments,
            cfg,
        ))
    } else {
        issues.list.sort_by_key(|i| (i.line, i.ordinal));
        Err(issues.list)
    }
}

/// Parses an index-label file. Non-dominant events are kept; callers drop
/// them with [`crate::model::dominant_only`] before matching.
pub fn parse_index_file(bytes: &[u8], meal_id: &str, unit: TimeUnit) -> Result<Vec<IndexEvent>, Vec<ValidationIssue>> {
    let mut issues = Issues {
        meal_id,
        rater_id: "index",
        list: Vec::new(),
    };
    let mut rdr = reader(bytes);
    if check_header(&mut rdr, &INDEX_HEADER, &mut issues).is_none() {
        return Err(issues.list);
    }
    let mut events = Vec::new();
    for (ordinal, record) in rdr.records().enumerate() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                issues.push(
                    e.position().map(|p| line_of(bytes, p)),
                    Some(ordinal),
                    Rule::Syntax,
                    e.to_string(),
                );
                continue;
            }
        };
        let line = Some(record.position().map_or(0, |p| line_of(bytes, p)));
        if record.len() < INDEX_HEADER.len() {
            issues.push(
                line,
                Some(ordinal),
                Rule::Syntax,
                format!("expected 3 columns, found {}", record.len()),
            );
            continue;
        }
        let kind = match record[0].parse::<GestureKind>() {
            Ok(k) if k.is_intake() => Some(k),
            Ok(k) => {
                issues.push(
                    line,
                    Some(ordinal),
                    Rule::BadKind,
                    format!("index labels are bite or drink, found `{k}`"),
                );
                None
            }
            Err(e) => {
                issues.push(line, Some(ordinal), Rule::BadKind, e.to_string());
                None
            }
        };
        let t = parse_time(&record[1], "time", unit)
            .map_err(|(rule, msg)| issues.push(line, Some(ordinal), rule, msg))
            .ok();
        let hand = record[2]
            .parse::<Hand>()
            .map_err(|msg| issues.push(line, Some(ordinal), Rule::Syntax, msg))
            .ok();
        if let (Some(kind), Some(t), Some(hand)) = (kind, t, hand) {
            events.push(IndexEvent {
                meal_id: meal_id.to_string(),
                t,
                kind,
                hand,
            });
        }
    }
    if issues.list.is_empty() {
        events.sort_by_key(|e| (e.t, e.kind));
        Ok(events)
    } else {
        Err(issues.list)
    }
}

/// Serializes a timeline in the segment-file format, times in milliseconds.
pub fn write_segment_csv(timeline: &Timeline) -> String {
    let mut out = SEGMENT_HEADER.join(",");
    out.push('\n');
    for s in timeline.segments() {
        out.push_str(&format!("{},{},{}\n", s.kind, s.start, s.end));
    }
    out
}

pub fn write_index_csv(events: &[IndexEvent]) -> String {
    let mut out = INDEX_HEADER.join(",");
    out.push('\n');
    for e in events {
        out.push_str(&format!("{},{},{}\n", e.kind, e.t, e.hand.as_str()));
    }
    out
}

/// All labels of a corpus, keyed by meal id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    /// Timelines per meal, sorted by rater id.
    pub meals: BTreeMap<String, Vec<Timeline>>,
    pub index_events: BTreeMap<String, Vec<IndexEvent>>,
}

impl Corpus {
    /// Adds a timeline; refuses a second timeline from the same rater for a meal.
    pub fn insert(&mut self, timeline: Timeline) -> Result<(), Timeline> {
        let raters = self.meals.entry(timeline.meal_id().to_string()).or_default();
        match raters.binary_search_by(|t| t.rater_id().cmp(timeline.rater_id())) {
            Ok(_) => Err(timeline),
            Err(pos) => {
                raters.insert(pos, timeline);
                Ok(())
            }
        }
    }

    pub fn timelines(&self) -> impl Iterator<Item = &Timeline> {
        self.meals.values().flatten()
    }

    pub fn events(&self, meal_id: &str) -> &[IndexEvent] {
        self.index_events.get(meal_id).map_or(&[], Vec::as_slice)
    }

    /// Writes the corpus in the on-disk layout, replacing existing files.
    pub fn write_to(&self, root: &Path) -> Result<(), IngestError> {
        let meal_ids: std::collections::BTreeSet<&String> = self.meals.keys().chain(self.index_events.keys()).collect();
        for meal_id in meal_ids {
            let dir = root.join(meal_id);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            for t in self.meals.get(meal_id).into_iter().flatten() {
                let path = dir.join(format!("{RATER_PREFIX}{}.csv", t.rater_id()));
                fs::write(&path, write_segment_csv(t)).map_err(io_err(&path))?;
            }
            if let Some(events) = self.index_events.get(meal_id) {
                let path = dir.join(INDEX_FILE);
                fs::write(&path, write_index_csv(events)).map_err(io_err(&path))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub corpus: Corpus,
    pub issues: Vec<ValidationIssue>,
    /// Known auxiliary files (simulator provenance) that are not labels.
    pub sidecars: Vec<PathBuf>,
    /// Files and directories that do not fit the layout.
    pub unrecognized: Vec<PathBuf>,
}

enum FileRole {
    Rater(String),
    Index,
    Sidecar,
    Unknown,
}

fn classify(path: &Path) -> FileRole {
    if !path.is_file() {
        return FileRole::Unknown;
    }
    let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
        return FileRole::Unknown;
    };
    if name == INDEX_FILE {
        return FileRole::Index;
    }
    if name == PROVENANCE_FILE {
        return FileRole::Sidecar;
    }
    match name.strip_prefix(RATER_PREFIX).and_then(|n| n.strip_suffix(".csv")) {
        Some(id) if !id.is_empty() => FileRole::Rater(id.to_string()),
        _ => FileRole::Unknown,
    }
}

enum Parsed {
    Timeline(Result<Timeline, Vec<ValidationIssue>>),
    Index(Result<Vec<IndexEvent>, Vec<ValidationIssue>>),
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut entries = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?;
    entries.sort();
    Ok(entries)
}

/// Walks `root/<meal_id>/` directories. Files are parsed in parallel and
/// merged in sorted path order, so the result does not depend on scheduling.
pub fn load_corpus(root: &Path, cfg: &TimingConfig, unit: TimeUnit) -> Result<CorpusLoad, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::NotADirectory(root.to_path_buf()));
    }
    let mut load = CorpusLoad::default();
    let mut jobs: Vec<(String, PathBuf, FileRole)> = Vec::new();
    for meal_dir in sorted_entries(root)? {
        if !meal_dir.is_dir() {
            load.unrecognized.push(meal_dir);
            continue;
        }
        let Some(meal_id) = meal_dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            load.unrecognized.push(meal_dir);
            continue;
        };
        for path in sorted_entries(&meal_dir)? {
            match classify(&path) {
                FileRole::Sidecar => load.sidecars.push(path),
                FileRole::Unknown => load.unrecognized.push(path),
                role => jobs.push((meal_id.clone(), path, role)),
            }
        }
    }

    let parsed: Vec<Result<Parsed, IngestError>> = jobs
        .par_iter()
        .map(|(meal_id, path, role)| {
            let bytes = fs::read(path).map_err(io_err(path))?;
            Ok(match role {
                FileRole::Rater(rater) => Parsed::Timeline(parse_segment_file(&bytes, meal_id, rater, cfg, unit)),
                _ => Parsed::Index(parse_index_file(&bytes, meal_id, unit)),
            })
        })
        .collect();

    for ((meal_id, _, _), result) in jobs.iter().zip(parsed) {
        match result? {
            Parsed::Timeline(Ok(t)) => {
                // file names are unique, so rater ids are too
                let _ = load.corpus.insert(t);
            }
            Parsed::Index(Ok(events)) => {
                load.corpus.index_events.insert(meal_id.clone(), events);
            }
            Parsed::Timeline(Err(issues)) | Parsed::Index(Err(issues)) => load.issues.extend(issues),
        }
    }
    Ok(load)
}
