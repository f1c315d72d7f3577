//! Experiment harness: configuration, orchestration and artifacts.

mod config;
mod experiment;

pub use config::{validate_config, ConfigError, DatasetSource, ExperimentConfig, GammaSource, Method, OracleKind};
pub use experiment::{
    execute, prepare_dataset, resolve_output, run_experiment, run_seed, select_grid_point, stratified_folds,
    ExperimentReport, SeedRun, CURVE_HEADER, SUMMARY_HEADER,
};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Environment variable naming the default output directory.
pub const OUTPUT_ENV: &str = "ADAMKL_OUTPUT";

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
