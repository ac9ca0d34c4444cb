//! Configuration-driven orchestration behind the command line tool.

pub mod analysis;
pub mod campaign;
pub mod config;
pub mod plots;
pub mod verify;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use analysis::{model_report, ModelReport};
pub use campaign::{run_campaign, RunManifest};
pub use config::ExperimentConfig;
pub use plots::{build_plot_bundle, PlotBundle};
pub use verify::{run_verification, VerifyOptions, VerifyReport};

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn now_unix_seconds() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}
