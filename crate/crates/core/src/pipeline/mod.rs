//! Batch commands behind the `arbor` binary. Each command reads its inputs,
//! writes its outputs into one directory and returns the files it wrote plus
//! any degenerate-result warnings.
//!
//! Result files are byte-identical for identical inputs, config and seed.
//! Wall-clock timestamps appear only in the `*.json` manifests.

mod commands;
mod config;

use std::path::{Path, PathBuf};

pub use commands::{
    cmd_ablate, cmd_curate, cmd_evaluate, cmd_grow, cmd_measure, cmd_reconstruct, cmd_simulate, run_pipeline,
    CurationEntry, CurationManifest, EvaluationRow, MeasureDocument, PipelineRun,
};
pub use config::{
    AblationConfig, CurateConfig, EnvelopeConfig, GrowthConfig, MetricsConfig, ObstacleSpec, PipelineConfig,
    PriorSource,
};

use crate::error::{ArborError, Result};

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub(crate) fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub(crate) fn extend(&mut self, other: Outcome) {
        self.files.extend(other.files);
        self.warnings.extend(other.warnings);
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_WARNING: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

/// Exit status for a failed command. A non-finite loss is a failed run on
/// valid input; everything else is bad input.
pub fn error_exit_code(err: &ArborError) -> i32 {
    match err {
        ArborError::NonFiniteLoss { .. } => EXIT_WARNING,
        _ => EXIT_INVALID,
    }
}

pub fn exit_code(result: &Result<Outcome>, strict: bool) -> i32 {
    match result {
        Ok(o) if strict && !o.warnings.is_empty() => EXIT_WARNING,
        Ok(_) => EXIT_OK,
        Err(e) => error_exit_code(e),
    }
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool when unset.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(ArborError::invalid("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ArborError::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
