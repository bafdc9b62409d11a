//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every verdict line reaches the terminal.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use dqap_core::adiabatic::{aggregate_times, find_t_epsilon, qab_fd_residual, qab_schedule, sweep_error, DEFAULT_DTAU};
use dqap_core::ansatz::{
    build_dqap_state, build_imag_state, build_state, energy_gradient, CircuitParams, DqapParams, ImagParams,
};
use dqap_core::entanglement::{
    boundary_rank_diagnostic, cyclic_distance, energy_exponents, entanglement_entropy, entropy_exponents,
    mutual_information_table, Subsystem,
};
use dqap_core::fit::fit_power_law;
use dqap_core::fock::{
    fock_energy, fock_entropy, fock_evolve, one_body, slater_to_fock, two_body, FockBasis, FockVector,
};
use dqap_core::lattice::{build_hamiltonian, build_v1, build_v2, exact_ground_state};
use dqap_core::optimizer::{
    optimize, optimize_imaginary, optimize_series, polish, InitMode, OptResult, OptimizerConfig,
};
use dqap_core::slater::{apply_bond_layer, energy_expectation, fidelity_distance, overlap, transition_density, wick};
use dqap_core::{BondSet, Boundary, CMatrix, Evolution, LatticeSpec, SlaterState, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT_RECOVERY_TOL: f64 = 1e-10;
const UNIVERSAL_ENERGY_TOL: f64 = 1e-10;
const UNIVERSAL_ENTROPY_TOL: f64 = 1e-8;
const EXACT_ENTROPY_TOL: f64 = 1e-8;
const EXPONENT_BAND: (f64, f64) = (0.85, 1.15);
const MI_ZERO_TOL: f64 = 1e-12;
const MI_EDGE_MIN: f64 = 1e-6;
const TEFF_SLOPE: (f64, f64) = (1.0, 0.15);
const IMAG_ENERGY_TOL: f64 = 2e-5;
const IMAG_DISTANCE_TOL: f64 = 1e-2;
const T_EPS_SLOPE: (f64, f64) = (2.0, 0.3);
const EPS_T_SLOPE: (f64, f64) = (-1.0, 0.1);
const QAB_ENDPOINT_TOL: f64 = 1e-12;
const QAB_RESIDUAL_TOL: f64 = 1e-6;
const EDGE_COUNT: usize = 10;
const ORACLE_TOL: f64 = 1e-10;
const GRADIENT_TOL: f64 = 1e-7;
const ROBUST_TOL: f64 = 1e-8;
const ROBUST_SEEDS: u64 = 50;

/// Learning rate of the warm-started depth series; random-start runs keep the default 0.01.
const SERIES_DELTA_BETA: f64 = 0.2;

/// Gradient-driven refinement applied after energy convergence; entropies are
/// first order in the parameter error while energies are second order.
const POLISH_DELTA_BETA: f64 = 0.5;
const POLISH_STEPS: usize = 200;

struct Series {
    cache: BTreeMap<(usize, bool), Vec<OptResult<DqapParams>>>,
}

impl Series {
    fn spec(l: usize, apbc: bool) -> LatticeSpec {
        LatticeSpec::half_filled(l, if apbc { Boundary::Antiperiodic } else { Boundary::Periodic }).unwrap()
    }

    /// Optimized results for depths `1..=m_max`, warm-started from the previous depth.
    fn get(&mut self, l: usize, apbc: bool, m_max: usize) -> &[OptResult<DqapParams>] {
        let have = self.cache.get(&(l, apbc)).map_or(0, |v| v.len());
        if have < m_max {
            let config = OptimizerConfig {
                delta_beta: SERIES_DELTA_BETA,
                init_mode: InitMode::WarmStart,
                ..OptimizerConfig::default()
            };
            let depths: Vec<usize> = (1..=m_max).collect();
            let spec = Self::spec(l, apbc);
            let t = build_hamiltonian(&spec);
            let mut runs = optimize_series(&spec, &depths, &config).unwrap();
            for run in &mut runs {
                run.params = polish(&spec, &run.params, POLISH_DELTA_BETA, POLISH_STEPS).unwrap().0;
                run.energy = energy_expectation(&build_dqap_state(&spec, &run.params).unwrap(), &t).unwrap();
            }
            self.cache.insert((l, apbc), runs);
        }
        &self.cache[&(l, apbc)][..m_max]
    }

    fn at(&mut self, l: usize, apbc: bool, m: usize) -> OptResult<DqapParams> {
        self.get(l, apbc, m)[m - 1].clone()
    }
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn within(x: f64, (center, width): (f64, f64)) -> bool {
    (x - center).abs() <= width
}

fn criterion_1(s: &mut Series) -> Verdict {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (l, apbc) in [(16, true), (18, false)] {
        let run = s.at(l, apbc, 4);
        let de = run.energy - exact_ground_state(&Series::spec(l, apbc)).unwrap().energy;
        worst = worst.max(de.abs());
        parts.push(format!("L={l} {} dE={de:.2e}", if apbc { "APBC" } else { "PBC" }));
    }
    verdict(worst < EXACT_RECOVERY_TOL, format!("{} (tol {EXACT_RECOVERY_TOL:e})", parts.join(", ")))
}

fn criterion_2(s: &mut Series) -> Verdict {
    let values: Vec<(String, f64)> = [(16, true), (24, true), (32, true), (18, false)]
        .iter()
        .map(|&(l, apbc)| (format!("L={l}{}", if apbc { "" } else { " PBC" }), s.at(l, apbc, 3).energy / l as f64))
        .collect();
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        hi - lo <= UNIVERSAL_ENERGY_TOL,
        format!("E/L at M=3 = {:.15}, spread {:.2e} (tol {UNIVERSAL_ENERGY_TOL:e})", values[0].1, hi - lo),
    )
}

fn half_chain(l: usize) -> Subsystem {
    Subsystem::block(0, l / 2, l).unwrap()
}

fn criterion_3(s: &mut Series) -> Verdict {
    let mut entropy = |l: usize, m: usize| {
        let run = s.at(l, true, m);
        entanglement_entropy(&build_dqap_state(&Series::spec(l, true), &run.params).unwrap(), &half_chain(l)).unwrap()
    };
    let (s24, s40) = (entropy(24, 2), entropy(40, 2));
    let universal = (s24 - s40).abs();
    let mut exact_dev: f64 = 0.0;
    for l in [24, 40] {
        let exact = exact_ground_state(&Series::spec(l, true)).unwrap().state;
        exact_dev = exact_dev.max((entropy(l, l / 4) - entanglement_entropy(&exact, &half_chain(l)).unwrap()).abs());
    }
    verdict(
        universal <= UNIVERSAL_ENTROPY_TOL && exact_dev <= EXACT_ENTROPY_TOL,
        format!(
            "S_A(M=2) L=24 {s24:.12} vs L=40 {s40:.12} (diff {universal:.1e}); |S_A(M=L/4) - S_exact| <= {exact_dev:.1e}"
        ),
    )
}

fn criterion_4(s: &mut Series) -> Verdict {
    let l = 160;
    let runs = s.get(l, true, 21).to_vec();
    let spec = Series::spec(l, true);
    let a = half_chain(l);
    // the entropy series needs 4M <= L_A for both M and M+1
    let s_series: Vec<(usize, f64)> = (10..=20)
        .map(|m| (m, entanglement_entropy(&build_dqap_state(&spec, &runs[m - 1].params).unwrap(), &a).unwrap()))
        .collect();
    let e_series: Vec<(usize, f64)> = (10..=21).map(|m| (m, runs[m - 1].energy / l as f64 + 2.0 / PI)).collect();
    let ds = entropy_exponents(&s_series).unwrap();
    let de = energy_exponents(&e_series).unwrap();
    let in_band = |v: &[(usize, f64)]| v.iter().all(|&(_, x)| x >= EXPONENT_BAND.0 && x <= EXPONENT_BAND.1);
    let trending = |v: &[(usize, f64)]| (v.last().unwrap().1 - 1.0).abs() < (v[0].1 - 1.0).abs();
    let fmt = |v: &[(usize, f64)]| {
        let lo = v.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let hi = v.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        format!(
            "[{lo:.3}, {hi:.3}] (M={}: {:.3}, M={}: {:.3})",
            v[0].0,
            v[0].1,
            v.last().unwrap().0,
            v.last().unwrap().1
        )
    };
    verdict(
        in_band(&ds) && in_band(&de) && trending(&ds) && trending(&de),
        format!("delta_S {} delta_E {} (band [{}, {}])", fmt(&ds), fmt(&de), EXPONENT_BAND.0, EXPONENT_BAND.1),
    )
}

fn criterion_5(s: &mut Series) -> Verdict {
    let l = 40;
    let spec = Series::spec(l, true);
    let runs = s.get(l, true, 9).to_vec();
    let mut ok = true;
    let mut max_outside: f64 = 0.0;
    let mut min_edge = f64::INFINITY;
    for (i, run) in runs.iter().enumerate() {
        let m = i + 1;
        let cone = 4 * m + 1;
        // once the cone spans half the ring the farthest pair sits at distance L/2
        let edge = cone.min(l / 2);
        let table = mutual_information_table(&build_dqap_state(&spec, &run.params).unwrap()).unwrap();
        let outside = table.iter().filter(|t| cyclic_distance(t.0, t.1, l) > cone).map(|t| t.2).fold(0.0, f64::max);
        let at_edge = table.iter().filter(|t| cyclic_distance(t.0, t.1, l) == edge).map(|t| t.2).fold(0.0, f64::max);
        max_outside = max_outside.max(outside);
        min_edge = min_edge.min(at_edge);
        ok &= outside <= MI_ZERO_TOL && at_edge > MI_EDGE_MIN;
    }
    verdict(
        ok,
        format!("M=1..9: max I beyond 4M+1 = {max_outside:.1e}, min over M of max I at the cone edge = {min_edge:.2e}"),
    )
}

fn criterion_6(s: &mut Series) -> Verdict {
    let ls = [16usize, 24, 32, 40];
    let teff: Vec<f64> = ls.iter().map(|&l| aggregate_times(&s.at(l, true, l / 4).params)).collect();
    let fit = fit_power_law(&ls.map(|l| l as f64), &teff).unwrap();
    verdict(
        within(fit.exponent, TEFF_SLOPE),
        format!(
            "T_eff = {teff:.3?}, slope {:.3} +- {:.3} (target {} +- {})",
            fit.exponent, fit.stderr, TEFF_SLOPE.0, TEFF_SLOPE.1
        ),
    )
}

fn criterion_7() -> Verdict {
    let spec = LatticeSpec::half_filled(30, Boundary::Periodic).unwrap();
    let exact = exact_ground_state(&spec).unwrap();
    // large learning rates or the linear-schedule start fall into basins with
    // cancelling steps of opposite sign; the default rate from small random steps does not
    let config = OptimizerConfig { init_mode: InitMode::Random, ..OptimizerConfig::default() };
    let mut de = Vec::new();
    let mut dist = 0.0;
    for m in 1..=3 {
        let run = optimize_imaginary(&spec, m, &config).unwrap();
        de.push(run.energy - exact.energy);
        dist = fidelity_distance(&exact.state, &build_imag_state(&spec, &run.params).unwrap()).unwrap();
    }
    let decades = de.windows(2).all(|w| w[1] <= 0.1 * w[0]);
    verdict(
        de[2] <= IMAG_ENERGY_TOL && dist < IMAG_DISTANCE_TOL && decades,
        format!("dE(M=1,2,3) = {:.2e} {:.2e} {:.2e}, distance at M=3 {dist:.2e}", de[0], de[1], de[2]),
    )
}

fn criterion_8() -> Verdict {
    let ls = [8usize, 12, 16, 20];
    let t_eps: Vec<f64> = ls
        .iter()
        .map(|&l| {
            let spec = LatticeSpec::half_filled(l, Boundary::Antiperiodic).unwrap();
            find_t_epsilon(&spec, 0.01, DEFAULT_DTAU, 1e5).unwrap()
        })
        .collect();
    let fit_t = fit_power_law(&ls.map(|l| l as f64), &t_eps).unwrap();
    let spec = LatticeSpec::half_filled(10, Boundary::Periodic).unwrap();
    let ts: Vec<f64> = (0..=10).map(|k| 100.0 * 10f64.powf(k as f64 / 10.0)).collect();
    let eps: Vec<f64> = ts.iter().map(|&t| sweep_error(&spec, t, DEFAULT_DTAU, 1).unwrap()).collect();
    let fit_e = fit_power_law(&ts, &eps).unwrap();
    verdict(
        within(fit_t.exponent, T_EPS_SLOPE) && within(fit_e.exponent, EPS_T_SLOPE),
        format!(
            "T_eps(L=8,12,16,20) = {t_eps:.1?}, slope {:.3}; eps(T) slope at L=10 over T in [100, 1000]: {:.3}",
            fit_t.exponent, fit_e.exponent
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut endpoint: f64 = 0.0;
    let mut residual: f64 = 0.0;
    for l in (8..=256).step_by(2) {
        endpoint = endpoint.max(qab_schedule(l, 0.0).abs()).max((qab_schedule(l, 1.0) - 1.0).abs());
        for k in 0..=100 {
            residual = residual.max(qab_fd_residual(l, k as f64 / 100.0, 1e-4));
        }
    }
    verdict(
        endpoint <= QAB_ENDPOINT_TOL && residual < QAB_RESIDUAL_TOL,
        format!("even L in 8..=256: endpoint error {endpoint:.1e}, worst relative FD residual {residual:.1e}"),
    )
}

fn criterion_10(s: &mut Series) -> Verdict {
    let diag = |s: &mut Series, l: usize, m: usize| {
        let run = s.at(l, true, m);
        boundary_rank_diagnostic(&build_dqap_state(&Series::spec(l, true), &run.params).unwrap(), &half_chain(l))
            .unwrap()
    };
    let d80 = diag(s, 80, 5);
    let d40 = diag(s, 40, 6);
    let ok = d80.ones == EDGE_COUNT
        && d80.zeros == EDGE_COUNT
        && d80.rank == 2 * EDGE_COUNT
        && d80.pairwise_degenerate
        && !d40.pairwise_degenerate;
    verdict(
        ok,
        format!(
            "L=80 M=5: ones {} zeros {} rank {} paired {}; L=40 M=6 paired {}",
            d80.ones, d80.zeros, d80.rank, d80.pairwise_degenerate, d40.pairwise_degenerate
        ),
    )
}

fn random_orbitals(rng: &mut ChaCha8Rng, l: usize, n: usize) -> CMatrix {
    CMatrix::from_fn(l, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn vec_diff(a: &FockVector, b: &FockVector) -> f64 {
    (&a.amplitudes - &b.amplitudes).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Worst relative deviation from the occupation-basis oracle over one random instance.
fn oracle_instance(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let l = [4usize, 6, 8][rng.gen_range(0..3)];
    let n = rng.gen_range(1..l);
    let boundary = if rng.gen_bool(0.5) { Boundary::Periodic } else { Boundary::Antiperiodic };
    let spec = LatticeSpec::new(l, n, boundary, 1.0).unwrap();
    let basis = FockBasis::new(l, n).unwrap();
    let t = build_hamiltonian(&spec);
    let mut worst: f64 = 0.0;
    let rel = |a: C64, b: C64| (a - b).norm() / (1.0 + b.norm());

    let psi = SlaterState::general(random_orbitals(rng, l, n));
    let phi = SlaterState::general(random_orbitals(rng, l, n));
    let (bra, ket) = (slater_to_fock(&basis, &psi).unwrap(), slater_to_fock(&basis, &phi).unwrap());
    let norm = bra.inner(&ket);
    worst = worst.max(rel(overlap(&psi, &phi).unwrap(), norm));
    let g = transition_density(&psi, &phi).unwrap();
    for _ in 0..8 {
        let (x, y, yp, xp) = (rng.gen_range(0..l), rng.gen_range(0..l), rng.gen_range(0..l), rng.gen_range(0..l));
        worst = worst.max(rel(g[(xp, x)], one_body(&basis, &bra, &ket, x, xp).unwrap() / norm));
        worst = worst.max(rel(wick(&g, x, y, yp, xp), two_body(&basis, &bra, &ket, x, y, yp, xp).unwrap() / norm));
    }

    let start = SlaterState::orthonormal(random_orbitals(rng, l, n).qr().q());
    for mode in [Evolution::RealTime, Evolution::ImaginaryTime] {
        let mut state = start.clone();
        let mut vec = slater_to_fock(&basis, &state).unwrap();
        for step in 0..4 {
            let (which, h) =
                if step % 2 == 0 { (BondSet::V2, build_v2(&spec)) } else { (BondSet::V1, build_v1(&spec)) };
            let (angle, z) = match mode {
                Evolution::RealTime => {
                    let a = rng.gen_range(-2.0..2.0);
                    (a, C64::new(0.0, a))
                }
                Evolution::ImaginaryTime => {
                    let a = rng.gen_range(0.0..1.0);
                    (a, C64::new(a, 0.0))
                }
            };
            state = apply_bond_layer(&state, which, angle, mode, &spec).unwrap();
            vec = fock_evolve(&basis, &vec, &h, z).unwrap();
        }
        let mut got = slater_to_fock(&basis, &state).unwrap();
        got.amplitudes *= C64::new(state.log_scale().exp(), 0.0);
        worst = worst.max(vec_diff(&got, &vec) / vec.norm());
        let e = energy_expectation(&state, &t).unwrap();
        worst = worst.max((e - fock_energy(&basis, &vec, &t).unwrap()).abs());
        // imaginary-evolved states can sit close to a pure reduced state, where
        // -x ln x amplifies round-off; entropies are compared on unitary states
        if mode == Evolution::RealTime {
            let len = rng.gen_range(1..l);
            let sites: Vec<usize> =
                (0..len).map(|i| (i * 2 + 1) % l).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
            let a = Subsystem::new(sites.clone(), l).unwrap();
            let s_slater = entanglement_entropy(&state, &a).unwrap();
            worst = worst.max((s_slater - fock_entropy(&basis, &vec, &sites).unwrap()).abs());
        }
    }

    let half = LatticeSpec::half_filled(l, boundary).unwrap();
    let th = build_hamiltonian(&half);
    let depth = rng.gen_range(1..4);
    let flat: Vec<f64> = (0..2 * depth).map(|_| rng.gen_range(0.0..1.2)).collect();
    let h = 1e-5;
    let mut grad_err: f64 = 0.0;
    let mut check = |grad: Vec<f64>, energy: &dyn Fn(&[f64]) -> f64| {
        for k in 0..flat.len() {
            let (mut up, mut dn) = (flat.clone(), flat.clone());
            up[k] += h;
            dn[k] -= h;
            grad_err = grad_err.max(((energy(&up) - energy(&dn)) / (2.0 * h) - grad[k]).abs());
        }
    };
    let real =
        |x: &[f64]| energy_expectation(&build_state(&half, &DqapParams::from_flat(x).unwrap()).unwrap(), &th).unwrap();
    check(energy_gradient(&half, &DqapParams::from_flat(&flat).unwrap(), &th).unwrap().1, &real);
    let imag =
        |x: &[f64]| energy_expectation(&build_state(&half, &ImagParams::from_flat(x).unwrap()).unwrap(), &th).unwrap();
    check(energy_gradient(&half, &ImagParams::from_flat(&flat).unwrap(), &th).unwrap().1, &imag);
    (worst, grad_err)
}

fn criterion_11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst, mut grad): (f64, f64) = (0.0, 0.0);
    let instances = 200;
    for _ in 0..instances {
        let (w, g) = oracle_instance(&mut rng);
        worst = worst.max(w);
        grad = grad.max(g);
    }
    verdict(
        worst < ORACLE_TOL && grad < GRADIENT_TOL,
        format!("{instances} instances: worst oracle deviation {worst:.1e} (tol {ORACLE_TOL:e}), worst gradient-FD gap {grad:.1e} (tol {GRADIENT_TOL:e})"),
    )
}

fn criterion_12() -> Verdict {
    let spec = LatticeSpec::half_filled(24, Boundary::Antiperiodic).unwrap();
    let exact = exact_ground_state(&spec).unwrap().energy;
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let mut iters = Vec::new();
    for seed in 0..ROBUST_SEEDS {
        let config = OptimizerConfig { init_mode: InitMode::Random, seed, ..OptimizerConfig::default() };
        let run = optimize(&spec, 6, &config).unwrap();
        worst = worst.max(run.energy - exact);
        monotone &= run.is_monotone();
        iters.push(run.iterations);
    }
    verdict(
        worst < ROBUST_TOL && monotone,
        format!(
            "{ROBUST_SEEDS} seeds at delta_beta 0.01: worst dE {worst:.2e}, all monotone {monotone}, iterations {}..{}",
            iters.iter().min().unwrap(),
            iters.iter().max().unwrap()
        ),
    )
}

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut series = Series { cache: BTreeMap::new() };
    let criteria: Vec<(usize, &str, Box<dyn Fn(&mut Series) -> Verdict>)> = vec![
        (1, "exact recovery at the light-cone depth", Box::new(criterion_1)),
        (2, "energy universality below the bound", Box::new(criterion_2)),
        (3, "entanglement universal curve", Box::new(criterion_3)),
        (4, "asymptotic exponents at L=160", Box::new(criterion_4)),
        (5, "mutual-information cone", Box::new(criterion_5)),
        (6, "effective evolution time scaling", Box::new(criterion_6)),
        (7, "imaginary-time accuracy", Box::new(|_| criterion_7())),
        (8, "continuous-time scaling", Box::new(|_| criterion_8())),
        (9, "QAB schedule", Box::new(|_| criterion_9())),
        (10, "boundary spectrum diagnostics", Box::new(criterion_10)),
        (11, "oracle equivalence", Box::new(|_| criterion_11())),
        (12, "optimization robustness", Box::new(|_| criterion_12())),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in &criteria {
        if !only.is_empty() && !only.contains(n) {
            continue;
        }
        let t0 = Instant::now();
        let v = run(&mut series);
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {n:>2} ({name}): {} [{:.1}s]", v.detail, t0.elapsed().as_secs_f64());
        if !v.passed {
            failed.push(*n);
        }
    }
    println!("acceptance: {} failed {failed:?}", if failed.is_empty() { "all passed;" } else { "some criteria" });
}
