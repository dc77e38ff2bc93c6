//! `gesture-irr`: validate label corpora, match raters, and print
//! reliability tables.
//!
//! Exit status is 0 on success, 1 when the corpus fails validation and 2 on
//! usage errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gesture_irr::stats::ReportFormat;
use gesture_irr::{TimeUnit, TimingConfig};

#[derive(Debug, Parser)]
#[command(
    name = "gesture-irr",
    version,
    about = "Inter-rater reliability for segment-based eating gesture labels"
)]
pub struct Cli {
    /// Corpus root: one directory per meal holding rater_<id>.csv and index.csv.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Directory for output files; reports are also printed to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Unit of the time columns in input files.
    #[arg(long, global = true, value_enum, default_value_t = Unit::Ms)]
    pub unit: Unit,
    /// Worker threads for per-meal work (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Largest boundary disagreement, in ms, still counted as agreement.
    #[arg(long, global = true, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub tolerance_ms: u64,
    /// Shortest unlabeled gap, in ms, that becomes an `other` segment.
    #[arg(long, global = true, default_value_t = 4000, value_parser = clap::value_parser!(u64).range(1..))]
    pub gap_other_ms: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every label file against the schema and list all violations.
    Validate,
    /// Gesture duration statistics per kind.
    Stats,
    /// Match the raters of each meal, write union timelines and group reports.
    Match {
        /// Raters labeling fewer meals are left out of the per-rater table.
        #[arg(long, default_value_t = 8)]
        min_meals: u64,
    },
    /// Compare intake segments against index labels.
    IndexCompare {
        /// Let an index event of either intake kind satisfy a segment.
        #[arg(long)]
        any_kind: bool,
    },
    /// Generate a synthetic corpus with a perturbed second rater.
    Simulate {
        /// TOML file with `meals`, `[model]` and `[noise]` tables.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `meals` from the config file.
        #[arg(long)]
        meals: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    JsonLines,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Csv => ReportFormat::Csv,
            Format::JsonLines => ReportFormat::JsonLines,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Ms,
    #[value(name = "samples15hz")]
    Samples15Hz,
}

impl From<Unit> for TimeUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Ms => TimeUnit::Millis,
            Unit::Samples15Hz => TimeUnit::Samples15Hz,
        }
    }
}

/// A bad invocation that clap cannot catch, such as a missing `--corpus`.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// The corpus (or simulator config) is invalid; details were already printed.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ValidationFailed(pub String);

impl Cli {
    pub fn timing(&self) -> Result<TimingConfig, UsageError> {
        let d = TimingConfig::default();
        TimingConfig::new(self.tolerance_ms, self.gap_other_ms, d.min_gesture_ms, d.min_other_ms)
            .map_err(|e| UsageError(e.to_string()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global()
            .expect("thread pool is configured once");
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn timing_follows_flags() {
        let cli = Cli::parse_from([
            "gesture-irr",
            "--tolerance-ms",
            "500",
            "--gap-other-ms",
            "6000",
            "stats",
        ]);
        let t = cli.timing().unwrap();
        assert_eq!((t.tolerance_ms, t.gap_other_ms), (500, 6000));
        assert_eq!(TimeUnit::from(cli.unit), TimeUnit::Millis);
    }
}
