use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use alsub_core::{AcquisitionKind, Strategy};

use crate::output::{read_results, seed_blocks, ResultsRow};
use crate::{CliError, Result};

/// One experiment found under the report directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub source: PathBuf,
    pub experiment_id: String,
    pub strategy: Strategy,
    pub acquisition: AcquisitionKind,
    pub seeds: usize,
    pub final_mean_accuracy: f64,
    pub final_min_accuracy: f64,
    pub final_max_accuracy: f64,
    /// Seed mean of the final cumulative evaluation count.
    pub total_af_evaluations: f64,
    pub full_pool_equivalent_evaluations: Option<u64>,
    /// `1 - total / full_pool_equivalent`.
    pub savings: Option<f64>,
    labeled_schedule: Vec<usize>,
    train_size: Option<usize>,
}

fn find_results(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let read_err = |source| CliError::Read {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(read_err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(read_err)?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_results(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "results.csv") {
            found.push(p);
        }
    }
    Ok(())
}

/// Training-set size implied by the counters, where the strategy reveals it:
/// the initial pass of `subsampled` and the first pass of `full_pool` both
/// cover the whole unlabeled pool.
fn implied_train_size(seed0: &[ResultsRow]) -> Option<usize> {
    let l0 = seed0[0].labeled_size;
    match seed0[0].strategy {
        Strategy::Subsampled => Some(seed0[0].cumulative_af_evaluations as usize + l0),
        Strategy::FullPool => seed0.get(1).map(|r| r.af_evaluations as usize + l0),
        Strategy::RandomFull => None,
    }
}

fn lines_for(path: &Path, rows: &[ResultsRow]) -> Result<Vec<ReportLine>> {
    let mut ids: Vec<&str> = Vec::new();
    for r in rows {
        if !ids.contains(&r.experiment_id.as_str()) {
            ids.push(&r.experiment_id);
        }
    }
    ids.iter()
        .map(|id| {
            let own: Vec<ResultsRow> = rows
                .iter()
                .filter(|r| r.experiment_id == *id)
                .cloned()
                .collect();
            let blocks = seed_blocks(&own).map_err(|msg| CliError::Malformed {
                path: path.to_path_buf(),
                msg: format!("{id}: {msg}"),
            })?;
            let last = blocks[0].len() - 1;
            let finals: Vec<f64> = blocks.iter().map(|b| b[last].test_accuracy).collect();
            let n = blocks.len() as f64;
            Ok(ReportLine {
                source: path.to_path_buf(),
                experiment_id: id.to_string(),
                strategy: own[0].strategy,
                acquisition: own[0].acquisition,
                seeds: blocks.len(),
                final_mean_accuracy: finals.iter().sum::<f64>() / n,
                final_min_accuracy: finals.iter().copied().fold(f64::INFINITY, f64::min),
                final_max_accuracy: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                total_af_evaluations: blocks
                    .iter()
                    .map(|b| b[last].cumulative_af_evaluations as f64)
                    .sum::<f64>()
                    / n,
                full_pool_equivalent_evaluations: None,
                savings: None,
                labeled_schedule: blocks[0].iter().map(|r| r.labeled_size).collect(),
                train_size: implied_train_size(blocks[0]),
            })
        })
        .collect()
}

/// Collects every `results.csv` below `dir` into report lines.
pub fn collect_report(dir: impl AsRef<Path>) -> Result<Vec<ReportLine>> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    find_results(dir, &mut paths)?;
    if paths.is_empty() {
        return Err(CliError::NoResults(dir.to_path_buf()));
    }
    let mut lines = Vec::new();
    for p in &paths {
        lines.extend(lines_for(p, &read_results(p)?)?);
    }
    // random_full does not reveal the pool size; borrow it from a run on the
    // same labeled-size schedule.
    let known: Vec<(Vec<usize>, usize)> = lines
        .iter()
        .filter_map(|l| l.train_size.map(|n| (l.labeled_schedule.clone(), n)))
        .collect();
    for l in &mut lines {
        let n = l.train_size.or_else(|| {
            known
                .iter()
                .find(|(s, _)| *s == l.labeled_schedule)
                .map(|k| k.1)
        });
        if let Some(n) = n {
            let sched = &l.labeled_schedule;
            let full: u64 = sched[..sched.len() - 1]
                .iter()
                .map(|&s| n.saturating_sub(s) as u64)
                .sum();
            l.full_pool_equivalent_evaluations = Some(full);
            if full > 0 {
                l.savings = Some(1.0 - l.total_af_evaluations / full as f64);
            }
        }
    }
    Ok(lines)
}

pub fn render_report(lines: &[ReportLine]) -> String {
    let id_w = lines
        .iter()
        .map(|l| l.experiment_id.len())
        .max()
        .unwrap_or(0)
        .max(10);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<id_w$}  {:<11}  {:>5}  {:>8}  {:>17}  {:>12}  {:>8}",
        "experiment", "strategy", "seeds", "final", "range", "af_evals", "savings"
    );
    for l in lines {
        let savings = l.savings.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{:<id_w$}  {:<11}  {:>5}  {:>8.4}  {:>17}  {:>12.1}  {:>8}",
            l.experiment_id,
            l.strategy.as_str(),
            l.seeds,
            l.final_mean_accuracy,
            format!("{:.4}..{:.4}", l.final_min_accuracy, l.final_max_accuracy),
            l.total_af_evaluations,
            savings
        );
    }
    s
}

/// `report <dir>`: prints the table and returns its lines.
pub fn cmd_report(dir: impl AsRef<Path>) -> Result<Vec<ReportLine>> {
    let lines = collect_report(dir)?;
    print!("{}", render_report(&lines));
    Ok(lines)
}
