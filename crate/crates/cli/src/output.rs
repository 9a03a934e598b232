//! Result-file schemas. Every number in `summary.json` is derived from the
//! same rows that go into `results.csv`, so the two cannot disagree.

use std::fs;
use std::path::Path;

use alsub_core::compare::Comparison;
use alsub_core::{AcquisitionKind, RunRecord, Strategy};
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const RESULTS_HEADER: [&str; 10] = [
    "experiment_id",
    "strategy",
    "acquisition",
    "seed",
    "iteration",
    "labeled_size",
    "test_accuracy",
    "af_evaluations",
    "cumulative_af_evaluations",
    "wall_time_s",
];

/// One `(seed, iteration)` line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub experiment_id: String,
    pub strategy: Strategy,
    pub acquisition: AcquisitionKind,
    pub seed: u64,
    pub iteration: usize,
    pub labeled_size: usize,
    pub test_accuracy: f64,
    pub af_evaluations: u64,
    pub cumulative_af_evaluations: u64,
    /// Left empty unless wall times were requested.
    pub wall_time_s: Option<f64>,
}

pub fn records_to_rows(record: &RunRecord, with_wall_time: bool) -> Vec<ResultsRow> {
    record
        .seeds
        .iter()
        .flat_map(|s| {
            s.iterations.iter().map(move |m| ResultsRow {
                experiment_id: record.experiment_id.clone(),
                strategy: record.strategy,
                acquisition: record.acquisition,
                seed: s.seed,
                iteration: m.iteration,
                labeled_size: m.labeled_size,
                test_accuracy: m.test_accuracy,
                af_evaluations: m.af_evaluations,
                cumulative_af_evaluations: m.cumulative_af_evaluations,
                wall_time_s: with_wall_time.then_some(m.wall_time_seconds),
            })
        })
        .collect()
}

fn csv_bytes<T: Serialize>(rows: &[T], header: Option<&[&str]>) -> Result<Vec<u8>> {
    let ser = |e: csv::Error| CliError::Serialize(e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h).map_err(ser)?;
    }
    for r in rows {
        w.serialize(r).map_err(ser)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Serialize(e.to_string()))
}

pub fn render_results_csv(rows: &[ResultsRow]) -> Result<Vec<u8>> {
    // Explicit header so an empty file still carries the schema.
    csv_bytes(rows, Some(&RESULTS_HEADER))
}

/// Reads a `results.csv`, insisting on the exact header.
pub fn read_results(path: &Path) -> Result<Vec<ResultsRow>> {
    let malformed = |msg: String| CliError::Malformed {
        path: path.to_path_buf(),
        msg,
    };
    let bytes = fs::read(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers().map_err(|e| malformed(e.to_string()))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(malformed(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .collect::<Result<Vec<ResultsRow>, _>>()
        .map_err(|e| malformed(e.to_string()))
}

/// Per-seed row blocks in file order. Each block must be iterations `0..=T`.
pub(crate) fn seed_blocks(rows: &[ResultsRow]) -> std::result::Result<Vec<&[ResultsRow]>, String> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].seed != rows[start].seed {
            blocks.push(&rows[start..i]);
            start = i;
        }
    }
    if blocks.is_empty() {
        return Err("no rows".into());
    }
    let len = blocks[0].len();
    for b in &blocks {
        if b.len() != len {
            return Err(format!(
                "seed {} has {} rows, expected {len}",
                b[0].seed,
                b.len()
            ));
        }
        if b.iter().enumerate().any(|(t, r)| r.iteration != t) {
            return Err(format!(
                "seed {} rows are not iterations 0..{}",
                b[0].seed,
                len - 1
            ));
        }
    }
    Ok(blocks)
}

/// Headline numbers of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub experiment_id: String,
    pub strategy: Strategy,
    pub acquisition: AcquisitionKind,
    pub dataset: String,
    pub train_size: usize,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub per_iteration_batch: usize,
    pub mean_accuracy: Vec<f64>,
    pub final_mean_accuracy: f64,
    pub final_min_accuracy: f64,
    pub final_max_accuracy: f64,
    pub total_af_evaluations_per_seed: Vec<u64>,
    /// Seed mean of the final cumulative count.
    pub total_af_evaluations: f64,
    /// What re-scoring the whole unlabeled pool every iteration would cost:
    /// `sum over t < T of (train_size - labeled_size[t])`.
    pub full_pool_equivalent_evaluations: u64,
    pub savings_vs_full_pool: f64,
}

impl Summary {
    pub fn from_rows(
        rows: &[ResultsRow],
        dataset: &str,
        train_size: usize,
    ) -> Result<Self, String> {
        let blocks = seed_blocks(rows)?;
        let n = blocks.len() as f64;
        let len = blocks[0].len();
        let mean_accuracy: Vec<f64> = (0..len)
            .map(|t| blocks.iter().map(|b| b[t].test_accuracy).sum::<f64>() / n)
            .collect();
        let finals: Vec<f64> = blocks.iter().map(|b| b[len - 1].test_accuracy).collect();
        let totals: Vec<u64> = blocks
            .iter()
            .map(|b| b[len - 1].cumulative_af_evaluations)
            .collect();
        let total = totals.iter().sum::<u64>() as f64 / n;
        let first = blocks[0];
        let full: u64 = first[..len - 1]
            .iter()
            .map(|r| train_size.saturating_sub(r.labeled_size) as u64)
            .sum();
        Ok(Self {
            experiment_id: first[0].experiment_id.clone(),
            strategy: first[0].strategy,
            acquisition: first[0].acquisition,
            dataset: dataset.to_string(),
            train_size,
            seeds: blocks.iter().map(|b| b[0].seed).collect(),
            iterations: len - 1,
            per_iteration_batch: if len > 1 {
                first[1].labeled_size - first[0].labeled_size
            } else {
                0
            },
            final_mean_accuracy: mean_accuracy[len - 1],
            final_min_accuracy: finals.iter().copied().fold(f64::INFINITY, f64::min),
            final_max_accuracy: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_accuracy,
            total_af_evaluations_per_seed: totals,
            total_af_evaluations: total,
            full_pool_equivalent_evaluations: full,
            savings_vs_full_pool: if full > 0 {
                1.0 - total / full as f64
            } else {
                0.0
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub experiment_id: String,
    pub strategy: Strategy,
    pub acquisition: AcquisitionKind,
    pub final_mean_accuracy: f64,
    pub final_min_accuracy: f64,
    pub final_max_accuracy: f64,
    pub final_delta: f64,
    pub total_af_evaluations: f64,
    pub savings_vs_full_pool: Option<f64>,
}

pub fn render_comparison_csv(cmp: &Comparison) -> Result<Vec<u8>> {
    let rows: Vec<ComparisonRow> = cmp
        .entries
        .iter()
        .map(|e| ComparisonRow {
            experiment_id: e.experiment_id.clone(),
            strategy: e.strategy,
            acquisition: e.acquisition,
            final_mean_accuracy: e.final_mean_accuracy,
            final_min_accuracy: *e.min_accuracy.last().unwrap_or(&f64::NAN),
            final_max_accuracy: *e.max_accuracy.last().unwrap_or(&f64::NAN),
            final_delta: e.final_delta,
            total_af_evaluations: e.total_af_evaluations,
            savings_vs_full_pool: e.savings_vs_full_pool,
        })
        .collect();
    csv_bytes(&rows, None)
}

/// Learning-curve point: seed mean and range at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub experiment_id: String,
    pub strategy: Strategy,
    pub acquisition: AcquisitionKind,
    pub iteration: usize,
    pub labeled_size: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
}

pub fn render_plot_data_csv(cmp: &Comparison) -> Result<Vec<u8>> {
    let rows: Vec<PlotRow> = cmp
        .entries
        .iter()
        .flat_map(|e| {
            (0..e.mean_accuracy.len()).map(move |t| PlotRow {
                experiment_id: e.experiment_id.clone(),
                strategy: e.strategy,
                acquisition: e.acquisition,
                iteration: t,
                labeled_size: e.labeled_size[t],
                mean_accuracy: e.mean_accuracy[t],
                min_accuracy: e.min_accuracy[t],
                max_accuracy: e.max_accuracy[t],
            })
        })
        .collect();
    csv_bytes(&rows, None)
}
