//! Experiment configuration read from a TOML file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use dqap_core::optimizer::OptimizerConfig;
use dqap_core::{Boundary, LatticeSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EnergySweep,
    EntanglementSweep,
    MutualInfo,
    OrbitalEvolution,
    ParamsTrace,
    Teff,
    ImaginarySweep,
    ContinuousTime,
    Qab,
    ScheduleOverlap,
    SpectrumDiagnostic,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 11] = [
        ExperimentKind::EnergySweep,
        ExperimentKind::EntanglementSweep,
        ExperimentKind::MutualInfo,
        ExperimentKind::OrbitalEvolution,
        ExperimentKind::ParamsTrace,
        ExperimentKind::Teff,
        ExperimentKind::ImaginarySweep,
        ExperimentKind::ContinuousTime,
        ExperimentKind::Qab,
        ExperimentKind::ScheduleOverlap,
        ExperimentKind::SpectrumDiagnostic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EnergySweep => "energy-sweep",
            ExperimentKind::EntanglementSweep => "entanglement-sweep",
            ExperimentKind::MutualInfo => "mutual-info",
            ExperimentKind::OrbitalEvolution => "orbital-evolution",
            ExperimentKind::ParamsTrace => "params-trace",
            ExperimentKind::Teff => "teff",
            ExperimentKind::ImaginarySweep => "imaginary-sweep",
            ExperimentKind::ContinuousTime => "continuous-time",
            ExperimentKind::Qab => "qab",
            ExperimentKind::ScheduleOverlap => "schedule-overlap",
            ExperimentKind::SpectrumDiagnostic => "spectrum-diagnostic",
        }
    }

    /// Whether the experiment consumes optimized circuits.
    pub fn needs_depths(self) -> bool {
        !matches!(self, ExperimentKind::ContinuousTime | ExperimentKind::Qab | ExperimentKind::Teff)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).with_context(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must match the experiment named on the command line.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub sites: Vec<usize>,
    /// Circuit depths. `teff` defaults to the light-cone depth of each chain.
    #[serde(default)]
    pub depths: Option<Vec<usize>>,
    #[serde(default = "default_boundaries")]
    pub boundaries: Vec<Boundary>,
    /// Fermion number; half filling when absent.
    #[serde(default)]
    pub particles: Option<usize>,
    #[serde(default = "default_hopping")]
    pub hopping: f64,
    /// Seed of the random initializations; replaces `optimizer.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Gradient-driven refinement steps after energy convergence.
    #[serde(default = "default_polish_steps")]
    pub polish_steps: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub entanglement: EntanglementOptions,
    #[serde(default)]
    pub orbital: OrbitalOptions,
    #[serde(default)]
    pub continuous: ContinuousOptions,
    #[serde(default)]
    pub qab: QabOptions,
    #[serde(default)]
    pub overlap: OverlapOptions,
}

fn default_boundaries() -> Vec<Boundary> {
    vec![Boundary::Antiperiodic]
}

fn default_hopping() -> f64 {
    1.0
}

fn default_polish_steps() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntanglementOptions {
    /// Block length; half the chain when absent.
    pub block: Option<usize>,
    pub start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitalOptions {
    /// Orbital columns to export; all when empty.
    pub orbitals: Vec<usize>,
    /// Amplitude threshold of the support width column.
    pub threshold: f64,
}

impl Default for OrbitalOptions {
    fn default() -> Self {
        Self { orbitals: Vec::new(), threshold: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuousOptions {
    pub times: Vec<f64>,
    pub dtau: f64,
    pub order: u8,
    /// Fidelity-error target of the threshold search; skipped when absent.
    pub target: Option<f64>,
    pub t_cap: f64,
}

impl Default for ContinuousOptions {
    fn default() -> Self {
        Self { times: Vec::new(), dtau: dqap_core::adiabatic::DEFAULT_DTAU, order: 1, target: None, t_cap: 1e5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QabOptions {
    pub samples: usize,
}

impl Default for QabOptions {
    fn default() -> Self {
        Self { samples: 1001 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapOptions {
    /// Fixes the scaling of the last layer instead of optimizing it.
    pub fixed_alpha: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(named) = self.experiment {
            if named != kind {
                bail!("config is for '{named}' but '{kind}' was requested");
            }
        }
        if self.sites.is_empty() {
            bail!("'sites' must not be empty");
        }
        if self.boundaries.is_empty() {
            bail!("'boundaries' must not be empty");
        }
        match &self.depths {
            Some(d) if d.is_empty() => bail!("'depths' must not be empty"),
            Some(d) if d.contains(&0) => bail!("depths must be positive"),
            None if kind.needs_depths() => bail!("'{kind}' needs a 'depths' list"),
            _ => {}
        }
        self.optimizer.validate()?;
        if kind == ExperimentKind::ContinuousTime
            && self.continuous.times.is_empty()
            && self.continuous.target.is_none()
        {
            bail!("continuous-time needs 'continuous.times' or 'continuous.target'");
        }
        if kind == ExperimentKind::Qab && self.qab.samples < 2 {
            bail!("qab needs at least two samples");
        }
        self.specs()?;
        Ok(())
    }

    /// Lattice instances in config order: sites outer, boundaries inner.
    pub fn specs(&self) -> Result<Vec<LatticeSpec>> {
        let mut out = Vec::new();
        for &l in &self.sites {
            for &b in &self.boundaries {
                let n = self.particles.unwrap_or(l / 2);
                out.push(
                    LatticeSpec::new(l, n, b, self.hopping)
                        .with_context(|| format!("L = {l}, N = {n}, {}", b.label()))?,
                );
            }
        }
        Ok(out)
    }

    /// Depths for one chain, ascending and deduplicated.
    pub fn depths_for(&self, spec: &LatticeSpec) -> Vec<usize> {
        let mut d = match &self.depths {
            Some(d) => d.clone(),
            None => vec![spec.lieb_robinson_depth().max(1)],
        };
        d.sort_unstable();
        d.dedup();
        d
    }
}
