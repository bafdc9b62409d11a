//! CSV tables and the run manifest.

use std::path::Path;

use anyhow::{Context, Result};
use dqap_core::LatticeSpec;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Formats a float with 17 significant digits in scientific notation.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Leading context columns carried by every row.
pub const CONTEXT_HEADER: [&str; 4] = ["L", "N", "gamma", "M"];

pub fn context(spec: &LatticeSpec, m: usize) -> Vec<String> {
    vec![spec.sites().to_string(), spec.particles().to_string(), float(spec.gamma()), m.to_string()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// A table whose header starts with the context columns.
    pub fn new(file: &str, columns: &[&str]) -> Self {
        let header = CONTEXT_HEADER.iter().chain(columns).map(|s| s.to_string()).collect();
        Self { file: file.to_string(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, spec: &LatticeSpec, m: usize, values: Vec<String>) {
        let mut row = context(spec, m);
        row.extend(values);
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(&self.file);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of one (chain, depth) point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "N")]
    pub particles: usize,
    pub gamma: f64,
    #[serde(rename = "M")]
    pub depth: usize,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

impl RunSummary {
    pub fn ok(spec: &LatticeSpec, depth: usize) -> Self {
        Self {
            sites: spec.sites(),
            particles: spec.particles(),
            gamma: spec.gamma(),
            depth,
            status: RunStatus::Ok,
            error: None,
            energy: None,
            iterations: None,
            converged: None,
        }
    }

    pub fn failed(spec: &LatticeSpec, depth: usize, error: impl std::fmt::Display) -> Self {
        Self { status: RunStatus::Failed, error: Some(error.to_string()), ..Self::ok(spec, depth) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub jobs: usize,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub runs: Vec<RunSummary>,
    /// Derived scalar results such as fitted exponents.
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl RunManifest {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.status == RunStatus::Failed).count()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
