//! CSV outputs.
//!
//! Every aggregate file is long format with the header
//! `round,policy,metric,mean,ci_low,ci_high`, LF line endings and floats in
//! shortest round-trip notation. `per_round.csv` lists rows by policy, then
//! metric, then round; `summary.csv` uses `round` for the final round index.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::stats::RunningStats;

use super::runner::{Aggregate, Metric};
use super::RunError;

pub const HEADER: [&str; 6] = ["round", "policy", "metric", "mean", "ci_low", "ci_high"];

pub const PER_ROUND_FILE: &str = "per_round.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ONOFF_FILE: &str = "onoff.csv";

pub(crate) fn io_error(path: &Path, source: impl std::fmt::Display) -> RunError {
    RunError::Io { path: path.to_path_buf(), message: source.to_string() }
}

fn write_long<W: Write>(out: W, rows: impl Iterator<Item = (usize, String, String, RunningStats)>) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for (round, policy, metric, stats) in rows {
        let (lo, hi) = stats.ci95();
        w.write_record([round.to_string(), policy, metric, stats.mean().to_string(), lo.to_string(), hi.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_file(
    path: &Path,
    rows: impl Iterator<Item = (usize, String, String, RunningStats)>,
) -> Result<(), RunError> {
    let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    write_long(std::io::BufWriter::new(file), rows).map_err(|e| io_error(path, e))
}

/// Writes the aggregate files into `dir` and returns their paths.
pub fn write_aggregate(aggregate: &Aggregate, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join(PER_ROUND_FILE);
    let rows = aggregate.labels.iter().enumerate().flat_map(|(p, label)| {
        Metric::ALL.iter().enumerate().flat_map(move |(m, metric)| {
            aggregate.per_round[p][m]
                .iter()
                .enumerate()
                .map(move |(t, s)| (t, label.clone(), metric.name().to_string(), *s))
        })
    });
    write_file(&path, rows)?;
    written.push(path);

    let path = dir.join(SUMMARY_FILE);
    let last = aggregate.rounds.saturating_sub(1);
    let rows = aggregate.summary.iter().map(|(label, metric, s)| (last, label.clone(), metric.to_string(), *s));
    write_file(&path, rows)?;
    written.push(path);

    if !aggregate.onoff.is_empty() {
        let path = dir.join(ONOFF_FILE);
        let rows = aggregate.onoff.iter().map(|(n, label, s)| (*n, label.clone(), "policy_value".to_string(), *s));
        write_file(&path, rows)?;
        written.push(path);
    }
    Ok(written)
}
