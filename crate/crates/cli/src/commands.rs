use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use alsub_core::compare::{compare_strategies, CompareError, Comparison};
use alsub_core::{run_experiment_on, ExperimentConfig, RunRecord};

use crate::output::{self, Summary};
use crate::{parse_config, CliError, Result};

#[derive(Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub summary: Summary,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct CompareOutput {
    pub records: Vec<RunRecord>,
    pub comparison: Comparison,
    pub files: Vec<PathBuf>,
}

type FileSet = Vec<(PathBuf, Vec<u8>)>;

/// Writes every file or none: on the first failure everything this call
/// created is removed again.
fn write_all(out: &Path, files: &FileSet) -> Result<Vec<PathBuf>> {
    let mut created_dirs = Vec::new();
    let mut written = Vec::new();
    let result = (|| {
        for (rel, bytes) in files {
            let path = out.join(rel);
            let parent = path.parent().unwrap_or(out);
            let mut missing: Vec<&Path> = parent
                .ancestors()
                .take_while(|p| !p.as_os_str().is_empty() && !p.exists())
                .collect();
            missing.reverse();
            for dir in missing {
                fs::create_dir(dir).map_err(|source| CliError::Write {
                    path: dir.to_path_buf(),
                    source,
                })?;
                created_dirs.push(dir.to_path_buf());
            }
            fs::write(&path, bytes).map_err(|source| CliError::Write {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
        Ok(())
    })();
    if let Err(e) = result {
        for f in &written {
            let _ = fs::remove_file(f);
        }
        for d in created_dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
        return Err(e);
    }
    Ok(written)
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

/// Runs one experiment, returning its record, summary and file contents.
fn execute(cfg: &ExperimentConfig, prefix: &Path) -> Result<(RunRecord, Summary, FileSet)> {
    let (train, test) = cfg.dataset.load()?;
    let record = run_experiment_on(cfg, &train, &test)?;
    let rows = output::records_to_rows(&record, cfg.record_wall_time);
    let summary =
        Summary::from_rows(&rows, train.name(), train.len()).map_err(CliError::Serialize)?;
    let files = vec![
        (
            prefix.join("results.csv"),
            output::render_results_csv(&rows)?,
        ),
        (prefix.join("summary.json"), json_bytes(&summary)?),
        (prefix.join("resolved-config.json"), json_bytes(cfg)?),
    ];
    Ok((record, summary, files))
}

/// `run <config> --out <dir>`.
pub fn cmd_run(config: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<RunOutput> {
    let cfg = parse_config(config)?;
    let (record, summary, files) = execute(&cfg, Path::new(""))?;
    let files = write_all(out.as_ref(), &files)?;
    Ok(RunOutput {
        record,
        summary,
        files,
    })
}

/// Directory-safe form of an experiment id.
fn dir_name(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Configs may differ only in strategy and selection-policy fields.
fn check_comparable(cfgs: &[(PathBuf, ExperimentConfig)]) -> Result<()> {
    let (base_path, base) = &cfgs[0];
    let mut ids = BTreeSet::new();
    let mut dirs = BTreeSet::new();
    for (path, c) in cfgs {
        let id = c.experiment_id();
        if !ids.insert(id.clone()) {
            return Err(CompareError::Duplicate(id).into());
        }
        if !dirs.insert(dir_name(&id)) {
            return Err(CliError::Incompatible(format!(
                "experiment id `{id}` collides with another once made a directory name"
            )));
        }
        let differs = |what: &str| {
            CliError::Incompatible(format!(
                "{} and {} use different {what}",
                base_path.display(),
                path.display()
            ))
        };
        if c.dataset != base.dataset {
            return Err(differs("datasets"));
        }
        if c.iterations != base.iterations {
            return Err(differs("iterations"));
        }
        if c.per_iteration_batch != base.per_iteration_batch {
            return Err(differs("per_iteration_batch"));
        }
        if c.seeds != base.seeds {
            return Err(differs("seeds"));
        }
        if c.initial_pool_fraction != base.initial_pool_fraction || c.pool_seed != base.pool_seed {
            return Err(differs("initial pools"));
        }
    }
    Ok(())
}

/// `compare <config>... --out <dir>`.
pub fn cmd_compare<P: AsRef<Path>>(configs: &[P], out: impl AsRef<Path>) -> Result<CompareOutput> {
    if configs.is_empty() {
        return Err(CompareError::Empty.into());
    }
    let cfgs = configs
        .iter()
        .map(|p| Ok((p.as_ref().to_path_buf(), parse_config(p)?)))
        .collect::<Result<Vec<_>>>()?;
    check_comparable(&cfgs)?;

    let mut records = Vec::new();
    let mut files = FileSet::new();
    for (_, cfg) in &cfgs {
        let (record, _, f) = execute(cfg, Path::new(&dir_name(&cfg.experiment_id())))?;
        records.push(record);
        files.extend(f);
    }
    let comparison = compare_strategies(&records)?;
    files.push((
        "comparison.csv".into(),
        output::render_comparison_csv(&comparison)?,
    ));
    files.push((
        "plot_data.csv".into(),
        output::render_plot_data_csv(&comparison)?,
    ));
    let files = write_all(out.as_ref(), &files)?;
    Ok(CompareOutput {
        records,
        comparison,
        files,
    })
}
