//! Continuous-time reference evolution along the linear sweep, the
//! brachistochrone schedule of the chain, and overlaps of intermediate
//! circuit states with instantaneous ground states.

use serde::{Deserialize, Serialize};

use crate::ansatz::{DqapParams, ImagParams};
use crate::error::{DqapError, Result};
use crate::lattice::{
    build_v1, build_v2, exact_ground_state, fill_lowest, initial_state, interpolated_hamiltonian, sorted_eigh,
    LatticeSpec,
};
use crate::slater::{apply_bond_layer, fidelity, BondSet, Evolution, SlaterState};
use crate::{c64, CMatrix, C64};

/// Default step of the continuous-time reference, in units of `1/t`.
pub const DEFAULT_DTAU: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPlan {
    pub total_time: f64,
    pub steps: usize,
    /// Magnus truncation order, 1 or 2.
    pub order: u8,
}

impl EvolutionPlan {
    pub fn new(total_time: f64, steps: usize, order: u8) -> Result<Self> {
        if !(total_time >= 0.0 && total_time.is_finite()) {
            return Err(DqapError::InvalidParams(format!("total time {total_time} must be non-negative")));
        }
        if !(order == 1 || order == 2) {
            return Err(DqapError::InvalidParams(format!("Magnus order {order} must be 1 or 2")));
        }
        if steps == 0 && total_time > 0.0 {
            return Err(DqapError::InvalidParams("at least one step is needed".into()));
        }
        Ok(Self { total_time, steps, order })
    }

    /// Smallest step count with `T/M <= dtau`.
    pub fn with_step(total_time: f64, dtau: f64, order: u8) -> Result<Self> {
        if !(dtau > 0.0) {
            return Err(DqapError::InvalidParams(format!("step {dtau} must be positive")));
        }
        let steps = (total_time / dtau - 1e-9).ceil().max(0.0) as usize;
        Self::new(total_time, steps.max(usize::from(total_time > 0.0)), order)
    }

    pub fn delta_tau(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_time / self.steps as f64
        }
    }
}

/// `exp(a)` for anti-Hermitian `a` through the Hermitian eigendecomposition of `i a`.
pub fn expm_antihermitian(a: &CMatrix) -> CMatrix {
    let h = a * c64(0.0, 1.0);
    let h = (&h + h.adjoint()) * c64(0.5, 0.0);
    let (e, u) = sorted_eigh(h);
    let phases =
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(e.len(), e.iter().map(|&x| c64(0.0, -x).exp())));
    &u * phases * u.adjoint()
}

/// Linear-sweep Hamiltonian `V1 + (tau/T) V2`.
fn sweep_hamiltonian(v1: &CMatrix, v2: &CMatrix, tau: f64, total: f64) -> CMatrix {
    let s = if total > 0.0 { tau / total } else { 1.0 };
    v1 + v2 * c64(s, 0.0)
}

/// Magnus generator between two instantaneous Hamiltonians.
pub fn magnus_generator(h_prev: &CMatrix, h_next: &CMatrix, dtau: f64, order: u8) -> CMatrix {
    let mut f = (h_next + h_prev) * c64(0.0, -0.5 * dtau);
    if order >= 2 {
        let comm = h_next * h_prev - h_prev * h_next;
        f += comm * c64(dtau * dtau / 6.0, 0.0);
    }
    f
}

/// One Magnus step of the linear sweep from `tau_prev` to `tau_next`.
pub fn magnus_step(
    state: &SlaterState,
    tau_prev: f64,
    tau_next: f64,
    plan: &EvolutionPlan,
    spec: &LatticeSpec,
) -> Result<SlaterState> {
    let v1 = build_v1(spec).into_inner();
    let v2 = build_v2(spec).into_inner();
    let hp = sweep_hamiltonian(&v1, &v2, tau_prev, plan.total_time);
    let hn = sweep_hamiltonian(&v1, &v2, tau_next, plan.total_time);
    let u = expm_antihermitian(&magnus_generator(&hp, &hn, tau_next - tau_prev, plan.order));
    Ok(SlaterState::orthonormal(u * state.orbitals()))
}

/// `sqrt(2 - 2 |<a|b>|)`.
pub fn fidelity_error(a: &SlaterState, b: &SlaterState) -> Result<f64> {
    crate::slater::fidelity_distance(a, b)
}

/// Evolves the bonding product state along the linear sweep and reports the
/// fidelity error against the exact ground state.
pub fn evolve_linear_schedule(spec: &LatticeSpec, plan: &EvolutionPlan) -> Result<(SlaterState, f64)> {
    let exact = exact_ground_state(spec)?.state;
    let v1 = build_v1(spec).into_inner();
    let v2 = build_v2(spec).into_inner();
    let mut psi = initial_state(spec)?.into_orbitals();
    let dtau = plan.delta_tau();
    for m in 1..=plan.steps {
        let hp = sweep_hamiltonian(&v1, &v2, (m - 1) as f64 * dtau, plan.total_time);
        let hn = sweep_hamiltonian(&v1, &v2, m as f64 * dtau, plan.total_time);
        let u = expm_antihermitian(&magnus_generator(&hp, &hn, dtau, plan.order));
        psi = u * psi;
    }
    let state = SlaterState::orthonormal(psi);
    let eps = fidelity_error(&exact, &state)?;
    Ok((state, eps))
}

/// Fidelity error after a sweep of duration `total` with step at most `dtau`.
pub fn sweep_error(spec: &LatticeSpec, total: f64, dtau: f64, order: u8) -> Result<f64> {
    Ok(evolve_linear_schedule(spec, &EvolutionPlan::with_step(total, dtau, order)?)?.1)
}

/// Geometric growth of the upward scan that brackets `T_epsilon`.
pub const T_SCAN_RATIO: f64 = 1.05;

/// Smallest sweep time reaching `target` fidelity error. The error oscillates
/// in `T`, so the first crossing is bracketed by a fine geometric scan upward
/// from `1/t` and then refined by bisection to 1% relative width.
pub fn find_t_epsilon(spec: &LatticeSpec, target: f64, dtau: f64, t_cap: f64) -> Result<f64> {
    if !(target > 0.0 && target < 2f64.sqrt()) {
        return Err(DqapError::InvalidParams(format!("target {target} must lie in (0, sqrt 2)")));
    }
    let err = |total: f64| sweep_error(spec, total, dtau, 1);
    if err(0.0)? <= target {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / spec.hopping();
    loop {
        if hi > t_cap {
            return Err(DqapError::NoConvergence(format!("error {target} not reached below T = {t_cap}")));
        }
        if err(hi)? <= target {
            break;
        }
        lo = hi;
        hi *= T_SCAN_RATIO;
    }
    while (hi - lo) > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        if err(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn qab_constants(l: usize) -> (f64, f64, f64) {
    let c = 2.0 * std::f64::consts::PI / l as f64;
    let a = -(c.sin() / (1.0 - c.cos())).atan();
    let b = (c.cos() / c.sin()).atan();
    (c, a, b)
}

/// Brachistochrone schedule `chi(s) = cos c - sin c tan(a s + b)`, `c = 2 pi / L`.
pub fn qab_schedule(l: usize, s: f64) -> f64 {
    let (c, a, b) = qab_constants(l);
    c.cos() - c.sin() * (a * s + b).tan()
}

/// First and second derivatives of [`qab_schedule`] in `s`.
pub fn qab_schedule_derivatives(l: usize, s: f64) -> (f64, f64) {
    let (c, a, b) = qab_constants(l);
    let x = a * s + b;
    let sec2 = 1.0 / x.cos().powi(2);
    let d1 = -c.sin() * a * sec2;
    let d2 = -c.sin() * 2.0 * a * a * sec2 * x.tan();
    (d1, d2)
}

/// Minimum gap `2 t sqrt((chi - cos c)^2 + sin^2 c)` of `V1 + chi V2`.
pub fn qab_gap(l: usize, chi: f64, hopping: f64) -> f64 {
    let c = 2.0 * std::f64::consts::PI / l as f64;
    2.0 * hopping * ((chi - c.cos()).powi(2) + c.sin().powi(2)).sqrt()
}

/// Left-hand side of the schedule's Euler-Lagrange equation.
pub fn qab_residual(l: usize, chi: f64, d1: f64, d2: f64) -> f64 {
    let c = 2.0 * std::f64::consts::PI / l as f64;
    let u = chi - c.cos();
    d2 - 2.0 * u / (u * u + c.sin().powi(2)) * d1 * d1
}

/// ODE residual at `s` from five-point finite differences of step `h`,
/// relative to `1 + |chi''|`.
pub fn qab_fd_residual(l: usize, s: f64, h: f64) -> f64 {
    let f: Vec<f64> = (-2..=2).map(|k| qab_schedule(l, s + k as f64 * h)).collect();
    let d1 = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
    let d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
    qab_residual(l, f[2], d1, d2).abs() / (1.0 + d2.abs())
}

/// Ground state of `V1 + chi V2` at the filling of `spec`.
pub fn instantaneous_ground_state(spec: &LatticeSpec, chi: f64) -> Result<SlaterState> {
    Ok(fill_lowest(&interpolated_hamiltonian(spec, chi), spec.particles(), spec.hopping())?.state)
}

/// The `m`-th intermediate state with the last `V1` angle scaled by `alpha`.
pub fn modified_intermediate(spec: &LatticeSpec, params: &DqapParams, m: usize, alpha: f64) -> Result<SlaterState> {
    if m > params.layers.len() {
        return Err(DqapError::InvalidParams(format!("m = {m} exceeds depth {}", params.layers.len())));
    }
    let mut st = initial_state(spec)?;
    for (k, layer) in params.layers.iter().take(m).enumerate() {
        let scale = if k + 1 == m { alpha } else { 1.0 };
        st = apply_bond_layer(&st, BondSet::V2, layer.theta2, Evolution::RealTime, spec)?;
        st = apply_bond_layer(&st, BondSet::V1, scale * layer.theta1, Evolution::RealTime, spec)?;
    }
    Ok(st)
}

fn squared_overlap(a: &SlaterState, b: &SlaterState) -> Result<f64> {
    Ok(fidelity(a, b)?.powi(2))
}

/// `F_m(chi, alpha) = |<chi|phi_m(alpha)>|^2`.
pub fn scheduling_overlap(spec: &LatticeSpec, params: &DqapParams, m: usize, chi: f64, alpha: f64) -> Result<f64> {
    let gs = instantaneous_ground_state(spec, chi)?;
    squared_overlap(&gs, &modified_intermediate(spec, params, m, alpha)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapOptimum {
    pub chi: f64,
    pub alpha: f64,
    pub overlap: f64,
}

const GRID_MAX: f64 = 1.5;
const GRID_STEP: f64 = 0.01;
const GOLDEN_TOL: f64 = 1e-4;

fn grid() -> Vec<f64> {
    let n = (GRID_MAX / GRID_STEP).round() as usize;
    (0..=n).map(|i| i as f64 * GRID_STEP).collect()
}

/// Maximizes `f` on `[lo, hi]` by golden-section search.
fn golden_max(mut lo: f64, mut hi: f64, f: &mut dyn FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > GOLDEN_TOL {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

fn refine(center: f64, f: &mut dyn FnMut(f64) -> Result<f64>, best: (f64, f64)) -> Result<(f64, f64)> {
    let lo = (center - GRID_STEP).max(0.0);
    let hi = (center + GRID_STEP).min(GRID_MAX);
    let cand = golden_max(lo, hi, f)?;
    Ok(if cand.1 > best.1 { cand } else { best })
}

/// Grid scan of `chi` (and `alpha` unless fixed) over `[0, 1.5]` in steps of
/// 0.01, refined by golden-section search on each axis.
pub fn maximize_overlap(
    spec: &LatticeSpec,
    params: &DqapParams,
    m: usize,
    fixed_alpha: Option<f64>,
) -> Result<OverlapOptimum> {
    let chis = grid();
    let alphas = match fixed_alpha {
        Some(a) => vec![a],
        None => grid(),
    };
    let ground: Vec<SlaterState> = chis.iter().map(|&c| instantaneous_ground_state(spec, c)).collect::<Result<_>>()?;
    let phis: Vec<SlaterState> =
        alphas.iter().map(|&a| modified_intermediate(spec, params, m, a)).collect::<Result<_>>()?;
    let mut best = OverlapOptimum { chi: 0.0, alpha: alphas[0], overlap: -1.0 };
    for (ci, gs) in ground.iter().enumerate() {
        for (ai, phi) in phis.iter().enumerate() {
            let f = squared_overlap(gs, phi)?;
            if f > best.overlap {
                best = OverlapOptimum { chi: chis[ci], alpha: alphas[ai], overlap: f };
            }
        }
    }
    for _ in 0..2 {
        let alpha = best.alpha;
        let phi = modified_intermediate(spec, params, m, alpha)?;
        let mut fc = |c: f64| squared_overlap(&instantaneous_ground_state(spec, c)?, &phi);
        let (chi, f) = refine(best.chi, &mut fc, (best.chi, best.overlap))?;
        best = OverlapOptimum { chi, alpha, overlap: f };
        if fixed_alpha.is_none() {
            let gs = instantaneous_ground_state(spec, best.chi)?;
            let mut fa = |a: f64| squared_overlap(&gs, &modified_intermediate(spec, params, m, a)?);
            let (alpha, f) = refine(best.alpha, &mut fa, (best.alpha, best.overlap))?;
            best = OverlapOptimum { chi: best.chi, alpha, overlap: f };
        }
    }
    Ok(best)
}

/// Effective evolution time: the sum of all real-time angles.
pub fn aggregate_times(params: &DqapParams) -> f64 {
    params.total_time()
}

/// Half the sum of all imaginary-time steps.
pub fn aggregate_imag_times(params: &ImagParams) -> f64 {
    params.mean_inverse_temperature()
}

/// Exact single-particle gap at the Fermi level of `spec`.
pub fn fermi_gap(spec: &LatticeSpec) -> Result<f64> {
    exact_ground_state(spec)?.fermi_gap().ok_or_else(|| DqapError::InvalidSpec("fully filled band has no gap".into()))
}

/// Overlap `|<exact|psi_i>|` helper used for the zero-time limit.
pub fn initial_overlap(spec: &LatticeSpec) -> Result<C64> {
    crate::slater::overlap(&exact_ground_state(spec)?.state, &initial_state(spec)?)
}
