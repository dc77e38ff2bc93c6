use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use gesture_irr::indexcmp::{compare_to_index, IndexCompareOptions, IndexCounts, IndexMatchOutcome};
use gesture_irr::ingest::{IngestError, PROVENANCE_FILE};
use gesture_irr::matcher::{write_passthrough_union_csv, write_union_csv};
use gesture_irr::sim::{self, SimConfig};
use gesture_irr::stats::{
    duration_stats, index_table, rater_table, reliability_table, render_cells, Cell, ReportFormat,
};
use gesture_irr::{
    dominant_only, load_corpus, match_pair, Corpus, MatchReport, Timeline, TimingConfig, ValidationIssue,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Cli, Command, UsageError, ValidationFailed};

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.timing()?;
    match &cli.command {
        Command::Validate => validate(cli, &cfg),
        Command::Stats => {
            let corpus = load(cli, &cfg)?;
            let stats = duration_stats(&corpus, &cfg);
            emit(cli, "durations", &stats.render(cli.format.into()))
        }
        Command::Match { min_meals } => run_match(cli, &cfg, *min_meals),
        Command::IndexCompare { any_kind } => index_compare(cli, &cfg, *any_kind),
        Command::Simulate { config, meals } => simulate(cli, &cfg, config.as_deref(), *meals),
    }
}

fn corpus_root(cli: &Cli) -> Result<&Path, UsageError> {
    cli.corpus
        .as_deref()
        .ok_or_else(|| UsageError("--corpus is required for this command".into()))
}

fn out_dir(cli: &Cli) -> Result<&Path, UsageError> {
    cli.out
        .as_deref()
        .ok_or_else(|| UsageError("--out is required for this command".into()))
}

/// Loads the corpus; any validation issue aborts with exit status 1.
fn load(cli: &Cli, cfg: &TimingConfig) -> Result<Corpus> {
    let (corpus, issues) = load_with_issues(cli, cfg)?;
    if !issues.is_empty() {
        for i in &issues {
            eprintln!("{i}");
        }
        return Err(ValidationFailed(format!(
            "{} validation issue(s); run `validate` for details",
            issues.len()
        ))
        .into());
    }
    Ok(corpus)
}

fn load_with_issues(cli: &Cli, cfg: &TimingConfig) -> Result<(Corpus, Vec<ValidationIssue>)> {
    let root = corpus_root(cli)?;
    let load = load_corpus(root, cfg, cli.unit.into()).map_err(|e| match e {
        IngestError::NotADirectory(p) => anyhow::Error::new(UsageError(format!("{} is not a directory", p.display()))),
        other => anyhow::Error::new(other),
    })?;
    for p in &load.unrecognized {
        eprintln!("warning: ignoring {}", p.display());
    }
    if load.corpus.meals.is_empty() && load.issues.is_empty() {
        return Err(ValidationFailed(format!("no meals found in {}", root.display())).into());
    }
    Ok((load.corpus, load.issues))
}

fn extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Text => "txt",
        ReportFormat::Csv => "csv",
        ReportFormat::JsonLines => "jsonl",
    }
}

/// Prints a report and, with `--out`, also writes it to `<out>/<name>.<ext>`.
fn emit(cli: &Cli, name: &str, text: &str) -> Result<()> {
    print!("{text}");
    if let Some(out) = &cli.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join(format!("{name}.{}", extension(cli.format.into())));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn json_lines<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|i| serde_json::to_string(&i).expect("report records serialize") + "\n")
        .collect()
}

#[derive(Serialize)]
struct IssueRow<'a> {
    meal_id: &'a str,
    rater_id: &'a str,
    line: Option<u64>,
    rule: String,
    message: &'a str,
}

fn render_issues(issues: &[ValidationIssue], format: ReportFormat) -> Result<String> {
    let rows = issues.iter().map(|i| IssueRow {
        meal_id: &i.meal_id,
        rater_id: &i.rater_id,
        line: i.line,
        rule: i.rule.to_string(),
        message: &i.message,
    });
    Ok(match format {
        ReportFormat::Text => issues.iter().map(|i| format!("{i}\n")).collect(),
        ReportFormat::JsonLines => json_lines(rows),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if issues.is_empty() {
                w.write_record(["meal_id", "rater_id", "line", "rule", "message"])?;
            }
            for r in rows {
                w.serialize(r)?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    })
}

fn validate(cli: &Cli, cfg: &TimingConfig) -> Result<()> {
    let (corpus, issues) = load_with_issues(cli, cfg)?;
    emit(cli, "issues", &render_issues(&issues, cli.format.into())?)?;
    if !issues.is_empty() {
        return Err(ValidationFailed(format!("{} validation issue(s)", issues.len())).into());
    }
    let timelines = corpus.timelines().count();
    eprintln!(
        "ok: {} meal(s), {timelines} rater file(s), {} index file(s)",
        corpus.meals.len(),
        corpus.index_events.len()
    );
    Ok(())
}

struct MealMatch<'a> {
    meal_id: &'a str,
    primary: Option<MatchReport>,
    /// Timeline of a meal with a single rater, standing in for its union.
    passthrough: Option<&'a Timeline>,
    /// Raters beyond the first two, each matched against the union.
    probes: Vec<MatchReport>,
}

fn match_meal<'a>(
    meal_id: &'a str,
    raters: &'a [Timeline],
    corpus: &Corpus,
    cfg: &TimingConfig,
) -> Result<MealMatch<'a>> {
    let events = dominant_only(corpus.events(meal_id));
    let mut m = MealMatch {
        meal_id,
        primary: None,
        passthrough: None,
        probes: Vec::new(),
    };
    match raters {
        [] => {}
        [only] => m.passthrough = Some(only),
        [a, b, rest @ ..] => {
            let report = match_pair(a, b, &events, cfg)?;
            for r in rest {
                m.probes.push(match_pair(r, &report.union, &events, cfg)?);
            }
            m.primary = Some(report);
        }
    }
    Ok(m)
}

/// Cells of one table renamed so several tables can share one CSV stream.
fn retitled(cells: Vec<Cell>, table: &'static str) -> Vec<Cell> {
    cells.into_iter().map(|c| Cell { table, ..c }).collect()
}

fn run_match(cli: &Cli, cfg: &TimingConfig, min_meals: u64) -> Result<()> {
    let corpus = load(cli, cfg)?;
    let results: Vec<MealMatch> = corpus
        .meals
        .par_iter()
        .map(|(meal_id, raters)| match_meal(meal_id, raters, &corpus, cfg))
        .collect::<Result<_>>()?;

    let mut single = 0;
    for m in &results {
        let Some(out) = &cli.out else { break };
        let dir = out.join(m.meal_id);
        if let Some(r) = &m.primary {
            write_file(&dir.join("union.csv"), &write_union_csv(r, cfg))?;
            write_file(&dir.join("groups.jsonl"), &r.to_json_lines())?;
        }
        if let Some(t) = m.passthrough {
            write_file(&dir.join("union.csv"), &write_passthrough_union_csv(t, cfg))?;
        }
        for p in &m.probes {
            write_file(&dir.join(format!("probe_{}.jsonl", p.rater_a)), &p.to_json_lines())?;
        }
    }
    for m in &results {
        if let Some(t) = m.passthrough {
            single += 1;
            eprintln!(
                "note: {} has a single rater ({}); passed through unmatched",
                m.meal_id,
                t.rater_id()
            );
        }
    }

    let reports: Vec<MatchReport> = results.iter().filter_map(|m| m.primary.clone()).collect();
    let probes: Vec<MatchReport> = results.iter().flat_map(|m| m.probes.iter().cloned()).collect();
    let table = reliability_table(&reports);
    let raters = rater_table(&reports, min_meals);
    let probe_table = (!probes.is_empty()).then(|| reliability_table(&probes));

    let format: ReportFormat = cli.format.into();
    let text = if format == ReportFormat::Text {
        let mut text = table.render(format);
        text.push('\n');
        text.push_str(&raters.render(format));
        if let Some(p) = &probe_table {
            text.push_str("\nAdditional raters matched against the union\n");
            text.push_str(&p.render(format));
        }
        text
    } else {
        let mut cells = table.cells();
        cells.extend(raters.cells());
        if let Some(p) = &probe_table {
            cells.extend(retitled(p.cells(), "probe_reliability"));
        }
        render_cells(&cells, format)
    };
    emit(cli, "reliability", &text)?;
    eprintln!(
        "matched {} meal(s); {single} single-rater meal(s); {} additional-rater probe(s)",
        reports.len(),
        probes.len()
    );
    Ok(())
}

struct MealIndex<'a> {
    meal_id: &'a str,
    raters: usize,
    outcomes: Vec<IndexMatchOutcome>,
    counts: IndexCounts,
}

fn index_compare(cli: &Cli, cfg: &TimingConfig, any_kind: bool) -> Result<()> {
    let corpus = load(cli, cfg)?;
    let opts = IndexCompareOptions { kind_strict: !any_kind };
    let results: Vec<Option<MealIndex>> = corpus
        .meals
        .par_iter()
        .map(|(meal_id, raters)| -> Result<Option<MealIndex>> {
            if !corpus.index_events.contains_key(meal_id) {
                return Ok(None);
            }
            let events = dominant_only(corpus.events(meal_id));
            // two or more raters are compared through their union
            let union;
            let timeline = match raters.as_slice() {
                [a, b, ..] => {
                    union = match_pair(a, b, &events, cfg)?.union;
                    &union
                }
                [only] => only,
                [] => return Ok(None),
            };
            let (outcomes, counts) = compare_to_index(timeline, &events, opts);
            Ok(Some(MealIndex {
                meal_id,
                raters: raters.len(),
                outcomes,
                counts,
            }))
        })
        .collect::<Result<_>>()?;

    let skipped = results.iter().filter(|r| r.is_none()).count();
    let results: Vec<MealIndex> = results.into_iter().flatten().collect();
    if let Some(out) = &cli.out {
        for m in &results {
            write_file(
                &out.join(m.meal_id).join("index_outcomes.jsonl"),
                &json_lines(&m.outcomes),
            )?;
        }
    }
    let table = index_table(results.iter().map(|m| (m.raters.min(2), &m.counts)));
    emit(cli, "index", &table.render(cli.format.into()))?;
    if skipped > 0 {
        eprintln!("note: {skipped} meal(s) without an index file were skipped");
    }
    Ok(())
}

fn simulate(cli: &Cli, cfg: &TimingConfig, config: Option<&Path>, meals: Option<usize>) -> Result<()> {
    let out = out_dir(cli)?;
    let mut sim_config = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            SimConfig::from_toml(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    if let Some(n) = meals {
        sim_config.meals = n;
    }
    let generated = sim::simulate(&sim_config, cfg, cli.seed).map_err(|e| UsageError(e.to_string()))?;
    sim::to_corpus(&generated)
        .write_to(out)
        .with_context(|| format!("writing corpus to {}", out.display()))?;
    for m in &generated {
        let path = out.join(m.truth.meal_id()).join(PROVENANCE_FILE);
        write_file(&path, &sim::write_provenance_csv(&m.tags))?;
    }
    eprintln!("wrote {} simulated meal(s) to {}", generated.len(), out.display());
    Ok(())
}
