use std::fs;
use std::path::Path;

use alsub_core::ExperimentConfig;

use crate::{CliError, Result};

/// Parses TOML text, fills defaults and validates. Relative dataset paths
/// are resolved against `base`.
pub fn config_from_str(text: &str, origin: &Path, base: &Path) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|source| CliError::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    let mut cfg = cfg.with_defaults();
    cfg.dataset.resolve_paths(base);
    // MNIST sizes are only known after loading; the run rechecks them.
    cfg.validate().map_err(|source| CliError::Invalid {
        path: origin.to_path_buf(),
        source,
    })?;
    Ok(cfg)
}

/// Reads and validates an experiment config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    config_from_str(&text, path, base)
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| CliError::Serialize(e.to_string()))
}
