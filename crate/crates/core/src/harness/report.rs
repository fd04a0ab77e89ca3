//! Per-run result shards and their aggregation into report tables.
//!
//! A shard is a CSV file with header `variant,regime,seed,step,metric,value`;
//! values are metric x 100. The report gives, per (variant, regime, metric),
//! the mean and population standard deviation across seeds at steps 1, 5 and
//! 10, plus an average column: the mean and deviation across seeds of each
//! seed's mean over all steps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::pipeline::Variant;

pub const REPORT_STEPS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: String,
    pub regime: String,
    pub seed: u64,
    pub step: usize,
    pub metric: String,
    pub value: f64,
}

pub fn shard_to_bytes(results: &[RunResult]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in results {
        writer.serialize(r)?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))
}

/// Writes a shard atomically (temp file + rename).
pub fn write_shard(path: impl AsRef<Path>, results: &[RunResult]) -> Result<()> {
    write_atomic(path.as_ref(), &shard_to_bytes(results)?)
}

pub fn read_shard(path: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<RunResult>, _>>()?;
    Ok(rows)
}

/// Shard files (`*.csv`) in `dir`, sorted by name.
pub fn shard_paths(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    Ok(paths)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub variant: String,
    pub regime: String,
    pub metric: String,
    /// Cells at [`REPORT_STEPS`] (when present in the grid).
    pub steps: Vec<(usize, Cell)>,
    pub average: Cell,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub seeds: Vec<u64>,
    pub steps: Vec<usize>,
}

fn mean_std(values: &[f64]) -> Cell {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Cell {
        mean,
        std: var.sqrt(),
    }
}

type GroupKey = (String, String, String);

pub fn aggregate(results: &[RunResult]) -> Result<ReportTable> {
    if results.is_empty() {
        return Err(Error::RaggedGrid("no results".into()));
    }
    // (variant, regime, metric) -> seed -> step -> value
    let mut groups: BTreeMap<GroupKey, BTreeMap<u64, BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in results {
        let key = (r.variant.clone(), r.regime.clone(), r.metric.clone());
        let steps = groups.entry(key).or_default().entry(r.seed).or_default();
        if steps.insert(r.step, r.value).is_some() {
            return Err(Error::RaggedGrid(format!(
                "duplicate result for {}/{}/seed {}/step {}",
                r.variant, r.regime, r.seed, r.step
            )));
        }
    }

    let (first_key, first) = groups.iter().next().expect("non-empty");
    let seeds: BTreeSet<u64> = first.keys().copied().collect();
    let steps: BTreeSet<usize> = first
        .values()
        .next()
        .expect("seed")
        .keys()
        .copied()
        .collect();
    for (key, by_seed) in &groups {
        let these: BTreeSet<u64> = by_seed.keys().copied().collect();
        if these != seeds {
            return Err(Error::RaggedGrid(format!(
                "{key:?} has seeds {these:?} but {first_key:?} has {seeds:?}"
            )));
        }
        for (seed, by_step) in by_seed {
            let these: BTreeSet<usize> = by_step.keys().copied().collect();
            if these != steps {
                return Err(Error::RaggedGrid(format!(
                    "{key:?} seed {seed} has steps {these:?}, expected {steps:?}"
                )));
            }
        }
    }

    let mut rows = Vec::with_capacity(groups.len());
    for ((variant, regime, metric), by_seed) in groups {
        let at_step = |step: usize| -> Vec<f64> { by_seed.values().map(|s| s[&step]).collect() };
        let step_cells = REPORT_STEPS
            .iter()
            .filter(|s| steps.contains(s))
            .map(|&s| (s, mean_std(&at_step(s))))
            .collect();
        let per_seed_avg: Vec<f64> = by_seed
            .values()
            .map(|s| s.values().sum::<f64>() / s.len() as f64)
            .collect();
        rows.push(ReportRow {
            variant,
            regime,
            metric,
            steps: step_cells,
            average: mean_std(&per_seed_avg),
        });
    }
    rows.sort_by_key(row_order);
    Ok(ReportTable {
        rows,
        seeds: seeds.into_iter().collect(),
        steps: steps.into_iter().collect(),
    })
}

fn row_order(row: &ReportRow) -> (usize, String, String, usize, String) {
    let regime = row
        .regime
        .parse::<crate::harness::Regime>()
        .map_or(usize::MAX, |r| r as usize);
    let variant = row
        .variant
        .parse::<Variant>()
        .map_or(usize::MAX, |v| v.report_position());
    (
        regime,
        row.regime.clone(),
        row.metric.clone(),
        variant,
        row.variant.clone(),
    )
}

fn subscript(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '0'..='9' => {
                char::from_u32(0x2080 + c.to_digit(10).expect("digit")).expect("subscript")
            }
            '-' => '\u{208B}',
            other => other,
        })
        .collect()
}

/// `mean` with `std` as a subscript, one decimal each: `31.0₁.₀`.
pub fn format_cell(cell: &Cell) -> String {
    format!("{:.1}{}", cell.mean, subscript(&format!("{:.1}", cell.std)))
}

impl ReportTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["variant", "regime", "metric", "column", "mean", "std"])?;
        for row in &self.rows {
            let columns = row
                .steps
                .iter()
                .map(|(s, c)| (s.to_string(), c))
                .chain(std::iter::once(("average".to_string(), &row.average)));
            for (column, cell) in columns {
                writer.write_record([
                    row.variant.as_str(),
                    row.regime.as_str(),
                    row.metric.as_str(),
                    column.as_str(),
                    &cell.mean.to_string(),
                    &cell.std.to_string(),
                ])?;
            }
        }
        writer
            .into_inner()
            .map_err(|e| Error::Config(format!("csv flush failed: {e}")))
    }

    /// Plain-text table grouped by regime, with comparable methods between rules.
    pub fn to_text(&self) -> String {
        let step_headers: Vec<String> = REPORT_STEPS
            .iter()
            .filter(|s| self.steps.contains(s))
            .map(|s| ordinal(*s))
            .collect();
        let mut out = String::new();
        let mut current: Option<(&str, &str)> = None;
        let mut last_group = None;
        for row in &self.rows {
            if current != Some((row.regime.as_str(), row.metric.as_str())) {
                if current.is_some() {
                    out.push('\n');
                }
                let _ = write!(out, "{:<14}", format!("{} ({})", row.regime, row.metric));
                for h in &step_headers {
                    let _ = write!(out, "{h:>14}");
                }
                let _ = writeln!(out, "{:>14}", "Average");
                out.push_str(&"-".repeat(14 * (step_headers.len() + 2)));
                out.push('\n');
                current = Some((row.regime.as_str(), row.metric.as_str()));
                last_group = None;
            }
            let group = row
                .variant
                .parse::<Variant>()
                .ok()
                .map(Variant::report_group);
            if last_group.is_some() && group != last_group {
                out.push_str(&"-".repeat(14 * (step_headers.len() + 2)));
                out.push('\n');
            }
            last_group = group;
            let _ = write!(out, "{:<14}", row.variant);
            for (_, cell) in &row.steps {
                let _ = write!(out, "{:>14}", format_cell(cell));
            }
            let _ = writeln!(out, "{:>14}", format_cell(&row.average));
        }
        out
    }
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (1, r) if r != 11 => "st",
        (2, r) if r != 12 => "nd",
        (3, r) if r != 13 => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}
