//! One function per experiment kind. Each returns its CSV tables, per-run
//! summaries and derived scalars; failed points are recorded and skipped.

use std::f64::consts::PI;

use dqap_core::adiabatic::{
    aggregate_imag_times, aggregate_times, find_t_epsilon, maximize_overlap, qab_gap, qab_residual, qab_schedule,
    qab_schedule_derivatives, sweep_error, EvolutionPlan,
};
use dqap_core::ansatz::{build_state, intermediate_states, orbital_support, CircuitParams, DqapParams, ImagParams};
use dqap_core::entanglement::{
    boundary_rank_diagnostic, correlation_spectrum, cyclic_distance, entanglement_entropy, mutual_information_table,
    Subsystem,
};
use dqap_core::fit::fit_power_law;
use dqap_core::lattice::{build_hamiltonian, exact_ground_state};
use dqap_core::optimizer::{
    initial_params, optimize_from, optimize_series, polish, InitMode, OptResult, OptimizerConfig,
};
use dqap_core::slater::{energy_expectation, fidelity_distance};
use dqap_core::{Boundary, LatticeSpec};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{float, RunSummary, Table};

/// Learning rate of the post-convergence refinement.
const POLISH_DELTA_BETA: f64 = 0.5;

#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub runs: Vec<RunSummary>,
    pub summary: Map<String, Value>,
}

pub fn run(kind: ExperimentKind, config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let specs = config.specs()?;
    Ok(match kind {
        ExperimentKind::EnergySweep => energy_sweep(config, &specs),
        ExperimentKind::EntanglementSweep => entanglement_sweep(config, &specs),
        ExperimentKind::MutualInfo => mutual_info(config, &specs),
        ExperimentKind::OrbitalEvolution => orbital_evolution(config, &specs),
        ExperimentKind::ParamsTrace => params_trace(config, &specs),
        ExperimentKind::Teff => teff(config, &specs),
        ExperimentKind::ImaginarySweep => imaginary_sweep(config, &specs),
        ExperimentKind::ContinuousTime => continuous_time(config, &specs),
        ExperimentKind::Qab => qab(config, &specs),
        ExperimentKind::ScheduleOverlap => schedule_overlap(config, &specs),
        ExperimentKind::SpectrumDiagnostic => spectrum_diagnostic(config, &specs),
    })
}

type Point<P> = (LatticeSpec, usize, Result<OptResult<P>, String>);

/// Optimizes every (chain, depth) point. Warm-started series run as one task
/// per chain; otherwise every point is its own task. Output follows config order.
fn optimized_points<P: CircuitParams>(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Vec<Point<P>> {
    let opt = OptimizerConfig { seed: config.seed, ..config.optimizer };
    let refine = |spec: &LatticeSpec, mut r: OptResult<P>| -> dqap_core::Result<OptResult<P>> {
        if config.polish_steps > 0 {
            r.params = polish(spec, &r.params, POLISH_DELTA_BETA, config.polish_steps)?.0;
            r.energy = energy_expectation(&build_state(spec, &r.params)?, &build_hamiltonian(spec))?;
        }
        Ok(r)
    };
    if opt.init_mode == InitMode::WarmStart {
        specs
            .par_iter()
            .map(|spec| {
                let depths = config.depths_for(spec);
                match optimize_series::<P>(spec, &depths, &opt) {
                    Ok(runs) => depths
                        .iter()
                        .zip(runs)
                        .map(|(&m, r)| (*spec, m, refine(spec, r).map_err(|e| e.to_string())))
                        .collect(),
                    Err(e) => depths.iter().map(|&m| (*spec, m, Err(e.to_string()))).collect(),
                }
            })
            .collect::<Vec<Vec<_>>>()
            .into_iter()
            .flatten()
            .collect()
    } else {
        let tasks: Vec<(LatticeSpec, usize, u64)> = specs
            .iter()
            .flat_map(|spec| {
                config
                    .depths_for(spec)
                    .into_iter()
                    .enumerate()
                    .map(move |(i, m)| (*spec, m, opt.seed.wrapping_add(i as u64)))
            })
            .collect();
        tasks
            .into_par_iter()
            .map(|(spec, m, seed)| {
                let init = initial_params::<P>(&spec, m, opt.init_mode, seed);
                let r = optimize_from(&spec, init, &opt).and_then(|r| refine(&spec, r));
                (spec, m, r.map_err(|e| e.to_string()))
            })
            .collect()
    }
}

fn summarize<P>(spec: &LatticeSpec, m: usize, r: &Result<OptResult<P>, String>) -> RunSummary {
    match r {
        Ok(r) => RunSummary {
            energy: Some(r.energy),
            iterations: Some(r.iterations),
            converged: Some(r.converged),
            ..RunSummary::ok(spec, m)
        },
        Err(e) => RunSummary::failed(spec, m, e),
    }
}

/// Maps each successful optimized point to table rows; analysis errors mark the run failed.
fn per_point<P>(
    points: &[Point<P>],
    out: &mut Outcome,
    mut rows: impl FnMut(&LatticeSpec, usize, &OptResult<P>) -> dqap_core::Result<()>,
) {
    for (spec, m, r) in points {
        let mut summary = summarize(spec, *m, r);
        if let Ok(res) = r {
            if let Err(e) = rows(spec, *m, res) {
                summary = RunSummary::failed(spec, *m, e);
            }
        }
        out.runs.push(summary);
    }
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

fn energy_sweep(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let mut out = Outcome::default();
    let mut table = Table::new("energy.csv", &["E", "E_exact", "dE", "dEps", "iterations", "converged"]);
    per_point(&points, &mut out, |spec, m, r| {
        let exact = exact_ground_state(spec)?.energy;
        let eps_inf = -2.0 * spec.hopping() / PI;
        table.push(
            spec,
            m,
            vec![
                float(r.energy),
                float(exact),
                float(r.energy - exact),
                float(r.energy / spec.sites() as f64 - eps_inf),
                r.iterations.to_string(),
                flag(r.converged),
            ],
        );
        Ok(())
    });
    out.tables.push(table);
    out
}

fn block(config: &ExperimentConfig, spec: &LatticeSpec) -> dqap_core::Result<Subsystem> {
    let l = spec.sites();
    Subsystem::block(config.entanglement.start, config.entanglement.block.unwrap_or(l / 2), l)
}

fn entanglement_sweep(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let mut out = Outcome::default();
    let mut table = Table::new("entropy.csv", &["start", "L_A", "bond_preserving", "S", "S_exact"]);
    per_point(&points, &mut out, |spec, m, r| {
        let a = block(config, spec)?;
        let s = entanglement_entropy(&build_state(spec, &r.params)?, &a)?;
        let s_exact = entanglement_entropy(&exact_ground_state(spec)?.state, &a)?;
        table.push(
            spec,
            m,
            vec![
                config.entanglement.start.to_string(),
                a.len().to_string(),
                flag(a.is_bond_preserving()),
                float(s),
                float(s_exact),
            ],
        );
        Ok(())
    });
    out.tables.push(table);
    out
}

fn mutual_info(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let mut out = Outcome::default();
    let mut table = Table::new("minfo.csv", &["x", "xprime", "distance", "I"]);
    per_point(&points, &mut out, |spec, m, r| {
        for (x, xp, i) in mutual_information_table(&build_state(spec, &r.params)?)? {
            let d = cyclic_distance(x, xp, spec.sites());
            table.push(spec, m, vec![x.to_string(), xp.to_string(), d.to_string(), float(i)]);
        }
        Ok(())
    });
    out.tables.push(table);
    out
}

fn orbital_evolution(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let mut out = Outcome::default();
    let mut amps = Table::new("orbitals.csv", &["layer", "orbital", "x", "re", "im", "abs2"]);
    let mut support = Table::new("support.csv", &["layer", "orbital", "support"]);
    let wanted = &config.orbital.orbitals;
    per_point(&points, &mut out, |spec, m, r| {
        for (layer, state) in intermediate_states(spec, &r.params)?.iter().enumerate() {
            let widths = orbital_support(state, config.orbital.threshold);
            for (k, col) in state.orbitals().column_iter().enumerate() {
                if !wanted.is_empty() && !wanted.contains(&k) {
                    continue;
                }
                for (x, z) in col.iter().enumerate() {
                    let row = vec![
                        layer.to_string(),
                        k.to_string(),
                        x.to_string(),
                        float(z.re),
                        float(z.im),
                        float(z.norm_sqr()),
                    ];
                    amps.push(spec, m, row);
                }
                support.push(spec, m, vec![layer.to_string(), k.to_string(), widths[k].to_string()]);
            }
        }
        Ok(())
    });
    out.tables.extend([amps, support]);
    out
}

fn params_trace(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let mut out = Outcome::default();
    let mut params = Table::new("params.csv", &["layer", "theta1", "theta2"]);
    let mut trace = Table::new("trace.csv", &["iteration", "E", "dE"]);
    per_point(&points, &mut out, |spec, m, r| {
        for (k, layer) in r.params.layers.iter().enumerate() {
            params.push(spec, m, vec![(k + 1).to_string(), float(layer.theta1), float(layer.theta2)]);
        }
        let exact = exact_ground_state(spec)?.energy;
        for (i, e) in r.energy_trace.iter().enumerate() {
            trace.push(spec, m, vec![i.to_string(), float(*e), float(e - exact)]);
        }
        Ok(())
    });
    out.tables.extend([params, trace]);
    out
}

/// Fits `ys ~ xs^p` for every boundary that has at least three points.
fn fit_by_boundary(rows: &[(Boundary, f64, f64)], key: &str, summary: &mut Map<String, Value>) {
    for b in [Boundary::Periodic, Boundary::Antiperiodic] {
        let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.0 == b).map(|r| (r.1, r.2)).unzip();
        if xs.is_empty() {
            continue;
        }
        let entry = match fit_power_law(&xs, &ys) {
            Ok(f) => json!({ "exponent": f.exponent, "stderr": f.stderr, "prefactor": f.prefactor }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        summary.insert(format!("{key}_{}", b.label()), entry);
    }
}

fn teff(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let mut out = Outcome::default();
    let mut table = Table::new("teff.csv", &["T_eff", "E", "dE", "iterations", "converged"]);
    // the fit uses the deepest circuit of each chain
    let mut fit_rows = Vec::new();
    per_point(&points, &mut out, |spec, m, r| {
        let t_eff = aggregate_times(&r.params);
        let exact = exact_ground_state(spec)?.energy;
        let row =
            vec![float(t_eff), float(r.energy), float(r.energy - exact), r.iterations.to_string(), flag(r.converged)];
        table.push(spec, m, row);
        if config.depths_for(spec).last() == Some(&m) {
            fit_rows.push((spec.boundary(), spec.sites() as f64, t_eff));
        }
        Ok(())
    });
    fit_by_boundary(&fit_rows, "teff_vs_L", &mut out.summary);
    out.tables.push(table);
    out
}

fn imaginary_sweep(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<ImagParams>(config, specs);
    let mut out = Outcome::default();
    let mut table =
        Table::new("imaginary.csv", &["E", "E_exact", "dE", "fidelity_distance", "beta", "iterations", "converged"]);
    per_point(&points, &mut out, |spec, m, r| {
        let exact = exact_ground_state(spec)?;
        let dist = fidelity_distance(&exact.state, &build_state(spec, &r.params)?)?;
        table.push(
            spec,
            m,
            vec![
                float(r.energy),
                float(exact.energy),
                float(r.energy - exact.energy),
                float(dist),
                float(aggregate_imag_times(&r.params)),
                r.iterations.to_string(),
                flag(r.converged),
            ],
        );
        Ok(())
    });
    out.tables.push(table);
    out
}

fn continuous_time(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let c = &config.continuous;
    let mut out = Outcome::default();
    let tasks: Vec<(LatticeSpec, f64)> = specs.iter().flat_map(|s| c.times.iter().map(move |&t| (*s, t))).collect();
    let errors: Vec<(LatticeSpec, f64, dqap_core::Result<(usize, f64)>)> = tasks
        .into_par_iter()
        .map(|(spec, t)| {
            let r = EvolutionPlan::with_step(t, c.dtau, c.order)
                .and_then(|plan| Ok((plan.steps, sweep_error(&spec, t, c.dtau, c.order)?)));
            (spec, t, r)
        })
        .collect();
    let thresholds: Vec<(LatticeSpec, Option<dqap_core::Result<f64>>)> = specs
        .par_iter()
        .map(|spec| (*spec, c.target.map(|target| find_t_epsilon(spec, target, c.dtau, c.t_cap))))
        .collect();

    let mut sweep = Table::new("continuous.csv", &["T", "dtau", "order", "steps", "eps"]);
    let mut t_eps = Table::new("t_epsilon.csv", &["target", "dtau", "T_eps"]);
    let mut fit_rows = Vec::new();
    for spec in specs {
        let mut failure = None;
        let mut curve = (Vec::new(), Vec::new());
        for (s, t, r) in errors.iter().filter(|e| e.0 == *spec) {
            match r {
                Ok((steps, eps)) => {
                    let row = vec![float(*t), float(c.dtau), c.order.to_string(), steps.to_string(), float(*eps)];
                    sweep.push(s, 0, row);
                    curve.0.push(*t);
                    curve.1.push(*eps);
                }
                Err(e) => failure = Some(format!("T = {t}: {e}")),
            }
        }
        if curve.0.len() >= 3 {
            if let Ok(f) = fit_power_law(&curve.0, &curve.1) {
                out.summary.insert(
                    format!("eps_vs_T_L{}_{}", spec.sites(), spec.boundary().label()),
                    json!({ "exponent": f.exponent, "stderr": f.stderr }),
                );
            }
        }
        if let Some((_, Some(r))) = thresholds.iter().find(|t| t.0 == *spec) {
            match r {
                Ok(t) => {
                    t_eps.push(spec, 0, vec![float(c.target.unwrap_or_default()), float(c.dtau), float(*t)]);
                    fit_rows.push((spec.boundary(), spec.sites() as f64, *t));
                }
                Err(e) => failure = Some(format!("T_eps: {e}")),
            }
        }
        out.runs.push(match failure {
            Some(e) => RunSummary::failed(spec, 0, e),
            None => RunSummary::ok(spec, 0),
        });
    }
    fit_by_boundary(&fit_rows, "t_eps_vs_L", &mut out.summary);
    out.tables.push(sweep);
    if c.target.is_some() {
        out.tables.push(t_eps);
    }
    out
}

fn qab(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let n = config.qab.samples;
    let mut out = Outcome::default();
    let mut table = Table::new("qab.csv", &["s", "chi", "dchi", "d2chi", "gap", "residual"]);
    for spec in specs {
        let l = spec.sites();
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let chi = qab_schedule(l, s);
            let (d1, d2) = qab_schedule_derivatives(l, s);
            let row = vec![
                float(s),
                float(chi),
                float(d1),
                float(d2),
                float(qab_gap(l, chi, spec.hopping())),
                float(qab_residual(l, chi, d1, d2)),
            ];
            table.push(spec, 0, row);
        }
        out.runs.push(RunSummary::ok(spec, 0));
    }
    out.tables.push(table);
    out
}

fn schedule_overlap(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let tasks: Vec<(usize, usize)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.2.is_ok())
        .flat_map(|(i, p)| (1..=p.1).map(move |layer| (i, layer)))
        .collect();
    let optima: Vec<_> = tasks
        .par_iter()
        .map(|&(i, layer)| {
            let (spec, _, r) = &points[i];
            let params = &r.as_ref().expect("filtered to successful points").params;
            (i, layer, maximize_overlap(spec, params, layer, config.overlap.fixed_alpha))
        })
        .collect();
    let mut out = Outcome::default();
    let mut table = Table::new("overlap.csv", &["layer", "s", "chi", "alpha", "overlap", "chi_qab"]);
    for (i, (spec, m, r)) in points.iter().enumerate() {
        let mut summary = summarize(spec, *m, r);
        for (_, layer, opt) in optima.iter().filter(|o| o.0 == i) {
            match opt {
                Ok(o) => {
                    let s = *layer as f64 / *m as f64;
                    let row = vec![
                        layer.to_string(),
                        float(s),
                        float(o.chi),
                        float(o.alpha),
                        float(o.overlap),
                        float(qab_schedule(spec.sites(), s)),
                    ];
                    table.push(spec, *m, row);
                }
                Err(e) => summary = RunSummary::failed(spec, *m, format!("layer {layer}: {e}")),
            }
        }
        out.runs.push(summary);
    }
    out.tables.push(table);
    out
}

fn spectrum_diagnostic(config: &ExperimentConfig, specs: &[LatticeSpec]) -> Outcome {
    let points = optimized_points::<DqapParams>(config, specs);
    let mut out = Outcome::default();
    let mut spectrum = Table::new("spectrum.csv", &["L_A", "index", "eigenvalue"]);
    let mut diag = Table::new("diagnostic.csv", &["L_A", "rank", "zeros", "ones", "interior", "pairwise_degenerate"]);
    per_point(&points, &mut out, |spec, m, r| {
        let a = block(config, spec)?;
        let state = build_state(spec, &r.params)?;
        for (k, v) in correlation_spectrum(&state, &a)?.eigenvalues.iter().enumerate() {
            spectrum.push(spec, m, vec![a.len().to_string(), k.to_string(), float(*v)]);
        }
        let d = boundary_rank_diagnostic(&state, &a)?;
        let row = vec![
            a.len().to_string(),
            d.rank.to_string(),
            d.zeros.to_string(),
            d.ones.to_string(),
            d.interior.len().to_string(),
            flag(d.pairwise_degenerate),
        ];
        diag.push(spec, m, row);
        Ok(())
    });
    out.tables.extend([spectrum, diag]);
    out
}
