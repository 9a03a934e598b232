//! Side-by-side comparison of strategies run on the same protocol.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::acquisition::AcquisitionKind;
use crate::engine::{RunRecord, Strategy};

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("nothing to compare")]
    Empty,
    #[error("experiment `{0}` appears more than once")]
    Duplicate(String),
    #[error("`{id}` differs from `{baseline}` in {what}")]
    Mismatch {
        id: String,
        baseline: String,
        what: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub experiment_id: String,
    pub strategy: Strategy,
    pub acquisition: AcquisitionKind,
    pub labeled_size: Vec<usize>,
    pub mean_accuracy: Vec<f64>,
    pub min_accuracy: Vec<f64>,
    pub max_accuracy: Vec<f64>,
    pub final_mean_accuracy: f64,
    /// Final seed-mean accuracy minus the baseline's (the first record).
    pub final_delta: f64,
    pub total_af_evaluations: f64,
    /// `1 - evals / full_pool evals` when exactly one full-pool run is present.
    pub savings_vs_full_pool: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: String,
    pub entries: Vec<StrategySummary>,
}

impl Comparison {
    pub fn get(&self, id: &str) -> Option<&StrategySummary> {
        self.entries.iter().find(|e| e.experiment_id == id)
    }
}

fn check_compatible(base: &RunRecord, other: &RunRecord) -> Result<(), CompareError> {
    let mismatch = |what| CompareError::Mismatch {
        id: other.experiment_id.clone(),
        baseline: base.experiment_id.clone(),
        what,
    };
    if base.dataset != other.dataset || base.train_size != other.train_size {
        return Err(mismatch("dataset"));
    }
    if base.iterations() != other.iterations() {
        return Err(mismatch("iteration count"));
    }
    if base.per_iteration_batch != other.per_iteration_batch {
        return Err(mismatch("per-iteration batch"));
    }
    let seeds = |r: &RunRecord| r.seeds.iter().map(|s| s.seed).collect::<Vec<_>>();
    if seeds(base) != seeds(other) {
        return Err(mismatch("seeds"));
    }
    let sizes = |r: &RunRecord| {
        r.seeds[0]
            .iterations
            .iter()
            .map(|m| m.labeled_size)
            .collect::<Vec<_>>()
    };
    if sizes(base) != sizes(other) {
        return Err(mismatch("labeled-size schedule"));
    }
    Ok(())
}

fn summarize(record: &RunRecord) -> StrategySummary {
    let len = record.mean_accuracy.len();
    let column = |t: usize| {
        record
            .seeds
            .iter()
            .map(move |s| s.iterations[t].test_accuracy)
    };
    StrategySummary {
        experiment_id: record.experiment_id.clone(),
        strategy: record.strategy,
        acquisition: record.acquisition,
        labeled_size: record.seeds[0]
            .iterations
            .iter()
            .map(|m| m.labeled_size)
            .collect(),
        mean_accuracy: record.mean_accuracy.clone(),
        min_accuracy: (0..len)
            .map(|t| column(t).fold(f64::INFINITY, f64::min))
            .collect(),
        max_accuracy: (0..len)
            .map(|t| column(t).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        final_mean_accuracy: record.final_mean_accuracy(),
        final_delta: 0.0,
        total_af_evaluations: record.mean_total_af_evaluations(),
        savings_vs_full_pool: None,
    }
}

/// Per-iteration seed statistics, final-accuracy deltas against the first
/// record, and evaluation savings against the full-pool run.
pub fn compare_strategies(records: &[RunRecord]) -> Result<Comparison, CompareError> {
    let base = records.first().ok_or(CompareError::Empty)?;
    let mut ids = BTreeSet::new();
    for r in records {
        if !ids.insert(r.experiment_id.as_str()) {
            return Err(CompareError::Duplicate(r.experiment_id.clone()));
        }
        check_compatible(base, r)?;
    }
    let mut entries: Vec<StrategySummary> = records.iter().map(summarize).collect();
    let base_final = entries[0].final_mean_accuracy;
    let full: Vec<f64> = entries
        .iter()
        .filter(|e| e.strategy == Strategy::FullPool)
        .map(|e| e.total_af_evaluations)
        .collect();
    for e in &mut entries {
        e.final_delta = e.final_mean_accuracy - base_final;
        if let [full_evals] = full[..] {
            if full_evals > 0.0 {
                e.savings_vs_full_pool = Some(1.0 - e.total_af_evaluations / full_evals);
            }
        }
    }
    Ok(Comparison {
        baseline: base.experiment_id.clone(),
        entries,
    })
}
