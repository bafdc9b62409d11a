use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dqap_lab::{run_experiment, ExperimentConfig, ExperimentKind};

/// Generates CSV data sets for layered adiabatic circuits on the tight-binding ring.
#[derive(Debug, Parser)]
#[command(name = "dqap-lab", version)]
struct Cli {
    /// One of: energy-sweep, entanglement-sweep, mutual-info, orbital-evolution,
    /// params-trace, teff, imaginary-sweep, continuous-time, qab, schedule-overlap,
    /// spectrum-diagnostic.
    experiment: ExperimentKind,

    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "DQAP_JOBS")]
    jobs: Option<usize>,

    /// Output directory; overrides `out` in the config, default `results`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Optimizer seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("dqap-lab: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli.out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("results"));
    let jobs =
        cli.jobs.filter(|&j| j > 0).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match run_experiment(cli.experiment, &config, &out, jobs) {
        Ok(manifest) => {
            let failed = manifest.failures();
            for run in manifest.runs.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "dqap-lab: run L={} N={} gamma={} M={} failed: {}",
                    run.sites,
                    run.particles,
                    run.gamma,
                    run.depth,
                    run.error.as_deref().unwrap_or_default()
                );
            }
            println!(
                "{}: {} runs, {failed} failed, {} files in {} ({:.1}s)",
                manifest.experiment,
                manifest.runs.len(),
                manifest.files.len(),
                out.display(),
                manifest.wall_time_seconds
            );
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("dqap-lab: {e:#}");
            ExitCode::from(2)
        }
    }
}
