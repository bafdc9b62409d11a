//! Experiment driver behind the `dqap-lab` binary.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{RunManifest, RunStatus, RunSummary, Table};

/// Runs one experiment on a pool of `jobs` workers and writes its CSV files and
/// `manifest.json` into `out`. Tables are written even when some points fail.
pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<RunManifest> {
    config.validate(kind)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let outcome = pool.install(|| experiments::run(kind, config))?;
    for table in &outcome.tables {
        table.write(out)?;
    }
    let manifest = RunManifest {
        experiment: kind.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        jobs,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        files: outcome.tables.iter().map(|t| t.file.clone()).collect(),
        runs: outcome.runs,
        summary: outcome.summary,
    };
    manifest.write(out)?;
    Ok(manifest)
}
