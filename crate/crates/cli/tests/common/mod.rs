#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

/// A small blobs experiment; `extra` is appended verbatim before the tables.
pub fn blobs_config(strategy: &str, extra: &str) -> String {
    format!(
        r#"strategy = "{strategy}"
iterations = 3
per_iteration_batch = 8
initial_pool_fraction = 0.03
mc_passes = 4
seeds = [0, 1]
{extra}

[dataset]
kind = "blobs"
num_classes = 3
samples_per_class = 60
seed = 2

[train]
epochs = 3
"#
    )
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}
