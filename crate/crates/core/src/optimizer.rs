//! Natural-gradient energy minimization for both circuit families.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{param_derivatives, CircuitParams, DqapParams, ImagParams, StateDerivatives};
use crate::error::{DqapError, Result};
use crate::lattice::{build_hamiltonian, sorted_eigh, HoppingMatrix, LatticeSpec};
use crate::slater::Evolution;
use crate::{CMatrix, CVector, C64};

pub const DEFAULT_DELTA_BETA: f64 = 0.01;
pub const DEFAULT_RIDGE: f64 = 1e-10;
pub const DEFAULT_ENERGY_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITERS: usize = 200_000;
/// Relative singular-value cutoff of the pseudo-inverse fallback.
pub const PSEUDO_CUTOFF: f64 = 1e-12;
/// Allowed upward energy drift per step before a trace counts as non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Ridge growth factor applied when a step would raise the energy.
pub const DAMPING_FACTOR: f64 = 10.0;
/// Ridge escalations tried before the run is declared stalled.
pub const MAX_DAMPING_ROUNDS: usize = 24;

/// Metric, force and learning rate of one natural-gradient iteration.
#[derive(Debug, Clone)]
pub struct NaturalGradientWorkspace {
    pub s: CMatrix,
    pub f: CVector,
    pub delta_beta: f64,
    /// Energy of the state the workspace was assembled at.
    pub energy: f64,
}

impl NaturalGradientWorkspace {
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// Energy gradient `f + f^*`.
    pub fn gradient(&self) -> Vec<f64> {
        self.f.iter().map(|z| 2.0 * z.re).collect()
    }

    /// Largest deviation of `S` from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.s - self.s.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of `Re S`, ascending.
    pub fn real_metric_eigenvalues(&self) -> Vec<f64> {
        let re = self.s.map(|z| C64::new(z.re, 0.0));
        sorted_eigh((&re + re.transpose()) * C64::new(0.5, 0.0)).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// `theta1 = dtau`, `theta2 = (m/M) dtau` with `dtau = 0.01/t`.
    LinearSchedule,
    /// Zeros plus uniform noise in `[-1e-4, 1e-4]/t`.
    ZerosNoise,
    /// Uniform in `[0, 0.01/t]`.
    Random,
    /// Linear schedule for the first depth, then mid-layer insertion from the previous optimum.
    WarmStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub energy_tol: f64,
    pub ridge: f64,
    pub delta_beta: f64,
    pub init_mode: InitMode,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            energy_tol: DEFAULT_ENERGY_TOL,
            ridge: DEFAULT_RIDGE,
            delta_beta: DEFAULT_DELTA_BETA,
            init_mode: InitMode::LinearSchedule,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(DqapError::InvalidParams("max_iters must be at least 1".into()));
        }
        if !(self.energy_tol > 0.0) || !(self.ridge >= 0.0) || !(self.delta_beta > 0.0) {
            return Err(DqapError::InvalidParams("tolerances and learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptResult<P> {
    pub params: P,
    /// Energy before the first step followed by the energy after every step.
    pub energy_trace: Vec<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl<P> OptResult<P> {
    /// Whether every step lowered the energy up to [`MONOTONE_SLACK`].
    pub fn is_monotone(&self) -> bool {
        self.energy_trace.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK)
    }
}

/// Frobenius inner product `tr[a^dagger b]`.
fn frob(a: &CMatrix, b: &CMatrix) -> C64 {
    a.dotc(b)
}

/// Columns are the vectorized matrices.
fn stack(blocks: &[CMatrix]) -> CMatrix {
    let len = blocks.first().map_or(0, |b| b.len());
    let mut out = CMatrix::zeros(len, blocks.len());
    for (k, b) in blocks.iter().enumerate() {
        out.column_mut(k).copy_from_slice(b.as_slice());
    }
    out
}

/// Metric tensor and force from state derivatives.
///
/// With `F = (G^dagger G)^{-1}` (identity in real time) and `A_k = G^dagger dG_k`:
/// `S_kk' = tr[F dG_k^dagger dG_k'] - tr[F A_k^dagger F A_k']` and
/// `f_k = tr[F dG_k^dagger T G] - tr[F A_k^dagger F G^dagger T G]`.
pub fn assemble_metric_and_force(
    derivs: &StateDerivatives,
    t: &HoppingMatrix,
    delta_beta: f64,
) -> Result<NaturalGradientWorkspace> {
    let g = derivs.state.orbitals();
    let kdim = derivs.derivatives.len();
    let tg = t.matrix() * g;
    let h = g.adjoint() * &tg;
    let f_inv = match derivs.mode {
        Evolution::RealTime if derivs.state.is_normalized() => None,
        _ => Some((g.adjoint() * g).cholesky().ok_or(DqapError::SingularOverlap(0.0))?.inverse()),
    };
    let right = |m: &CMatrix| match &f_inv {
        Some(f) => m * f,
        None => m.clone(),
    };
    let left = |m: &CMatrix| match &f_inv {
        Some(f) => f * m,
        None => m.clone(),
    };
    let energy = left(&h).trace().re;
    let a: Vec<CMatrix> = derivs.derivatives.iter().map(|d| g.adjoint() * d).collect();
    let d_stack = stack(&derivs.derivatives);
    let dy_stack = stack(&derivs.derivatives.iter().map(&right).collect::<Vec<_>>());
    let af_stack = stack(&a.iter().map(&right).collect::<Vec<_>>());
    let fa_stack = stack(&a.iter().map(&left).collect::<Vec<_>>());
    let s = d_stack.adjoint() * dy_stack - af_stack.adjoint() * fa_stack;
    let tgf = right(&tg);
    let fh = left(&h);
    let f =
        CVector::from_iterator(kdim, (0..kdim).map(|k| frob(&derivs.derivatives[k], &tgf) - frob(&right(&a[k]), &fh)));
    Ok(NaturalGradientWorkspace { s, f, delta_beta, energy })
}

/// Solves `(S + S^* + ridge I) dtheta = -delta_beta (f + f^*)`.
pub fn solve_step(ws: &NaturalGradientWorkspace, ridge: f64) -> Result<Vec<f64>> {
    let k = ws.dim();
    let mut a = DMatrix::<f64>::from_fn(k, k, |i, j| ws.s[(i, j)].re + ws.s[(j, i)].re);
    for i in 0..k {
        a[(i, i)] += ridge;
    }
    let b = DVector::<f64>::from_iterator(k, ws.f.iter().map(|z| -ws.delta_beta * 2.0 * z.re));
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(&b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x.iter().copied().collect());
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let x = svd.solve(&b, PSEUDO_CUTOFF * smax).map_err(|e| DqapError::LinearSolve(e.to_string()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(DqapError::LinearSolve("non-finite update".into()));
    }
    Ok(x.iter().copied().collect())
}

/// One parameter update.
pub fn natural_gradient_step<P: CircuitParams>(ws: &NaturalGradientWorkspace, params: &P, ridge: f64) -> Result<P> {
    let delta = solve_step(ws, ridge)?;
    let flat: Vec<f64> = params.to_flat().iter().zip(&delta).map(|(p, d)| p + d).collect();
    P::from_flat(&flat)
}

/// Workspace at the given parameters.
pub fn workspace_at<P: CircuitParams>(
    spec: &LatticeSpec,
    params: &P,
    t: &HoppingMatrix,
    delta_beta: f64,
) -> Result<NaturalGradientWorkspace> {
    assemble_metric_and_force(&param_derivatives(spec, params)?, t, delta_beta)
}

/// Natural-gradient step that never raises the energy. The plain step is tried
/// first; while it would raise the energy the ridge is multiplied by
/// [`DAMPING_FACTOR`]. Returns `None` when no escalation descends.
pub fn damped_step<P: CircuitParams>(
    spec: &LatticeSpec,
    params: &P,
    ws: &NaturalGradientWorkspace,
    t: &HoppingMatrix,
    ridge: f64,
) -> Result<Option<(P, NaturalGradientWorkspace)>> {
    let mut r = ridge.max(f64::MIN_POSITIVE);
    for round in 0..=MAX_DAMPING_ROUNDS {
        let next = natural_gradient_step(ws, params, if round == 0 { ridge } else { r })?;
        match workspace_at(spec, &next, t, ws.delta_beta) {
            Ok(next_ws) if next_ws.energy <= ws.energy => return Ok(Some((next, next_ws))),
            Ok(_) | Err(DqapError::SingularOverlap(_)) => {}
            Err(e) => return Err(e),
        }
        r = if round == 0 { ridge.max(1e-12) * DAMPING_FACTOR } else { r * DAMPING_FACTOR };
    }
    Ok(None)
}

/// Refines a converged point with plain natural-gradient steps, keeping each
/// step only while the gradient norm shrinks. Energy-based stopping saturates at
/// round-off well before the parameters do; this drives the gradient instead.
pub fn polish<P: CircuitParams>(spec: &LatticeSpec, params: &P, delta_beta: f64, max_steps: usize) -> Result<(P, f64)> {
    let t = build_hamiltonian(spec);
    let norm = |ws: &NaturalGradientWorkspace| ws.gradient().iter().map(|g| g * g).sum::<f64>().sqrt();
    let mut best = params.clone();
    let mut ws = workspace_at(spec, &best, &t, delta_beta)?;
    let mut g = norm(&ws);
    for _ in 0..max_steps {
        let next = natural_gradient_step(&ws, &best, DEFAULT_RIDGE)?;
        let next_ws = match workspace_at(spec, &next, &t, delta_beta) {
            Ok(w) => w,
            Err(DqapError::SingularOverlap(_)) => break,
            Err(e) => return Err(e),
        };
        let next_g = norm(&next_ws);
        if !(next_g < g) {
            break;
        }
        (best, ws, g) = (next, next_ws, next_g);
    }
    Ok((best, g))
}

/// Initial parameters of depth `m` for the non-warm-start modes.
pub fn initial_params<P: CircuitParams>(spec: &LatticeSpec, depth: usize, mode: InitMode, seed: u64) -> P {
    let t = spec.hopping();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = match mode {
        InitMode::LinearSchedule | InitMode::WarmStart => {
            DqapParams::linear_schedule(depth, 0.01 / t).layers.iter().map(|l| (l.theta1, l.theta2)).collect()
        }
        InitMode::ZerosNoise => {
            (0..depth).map(|_| (rng.gen_range(-1e-4..=1e-4) / t, rng.gen_range(-1e-4..=1e-4) / t)).collect()
        }
        InitMode::Random => {
            (0..depth).map(|_| (rng.gen_range(0.0..=0.01) / t, rng.gen_range(0.0..=0.01) / t)).collect()
        }
    };
    P::from_pairs(pairs)
}

/// Inserts the average of the two middle layers, giving `M + 1` layers.
pub fn warm_start<P: CircuitParams>(params: &P) -> Result<P> {
    let mut pairs = params.pairs();
    let m = pairs.len();
    if m == 0 {
        return Err(DqapError::InvalidParams("warm start needs at least one layer".into()));
    }
    if m == 1 {
        pairs.push(pairs[0]);
        return Ok(P::from_pairs(pairs));
    }
    // 1-based layers (M/2, M/2 + 1) for even M and ((M-1)/2, (M+1)/2) for odd M.
    let lo = if m.is_multiple_of(2) { m / 2 } else { (m - 1) / 2 };
    let (a, b) = (pairs[lo - 1], pairs[lo]);
    pairs.insert(lo, (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1)));
    Ok(P::from_pairs(pairs))
}

/// Runs natural-gradient iterations from `init`.
pub fn optimize_from<P: CircuitParams>(spec: &LatticeSpec, init: P, config: &OptimizerConfig) -> Result<OptResult<P>> {
    config.validate()?;
    let t = build_hamiltonian(spec);
    let mut params = init;
    if params.depth() == 0 {
        let e = crate::slater::energy_expectation(&crate::ansatz::build_state(spec, &params)?, &t)?;
        return Ok(OptResult { params, energy_trace: vec![e], energy: e, iterations: 0, converged: true });
    }
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut ws = workspace_at(spec, &params, &t, config.delta_beta)?;
    trace.push(ws.energy);
    while iterations < config.max_iters {
        let Some((next, next_ws)) = damped_step(spec, &params, &ws, &t, config.ridge)? else {
            converged = true;
            break;
        };
        iterations += 1;
        let prev = ws.energy;
        params = next;
        ws = next_ws;
        trace.push(ws.energy);
        if ((ws.energy - prev) / (ws.energy.abs() + 1.0)).abs() < config.energy_tol {
            converged = true;
            break;
        }
    }
    Ok(OptResult { params, energy: ws.energy, energy_trace: trace, iterations, converged })
}

/// Optimizes a real-time circuit of depth `depth`.
pub fn optimize(spec: &LatticeSpec, depth: usize, config: &OptimizerConfig) -> Result<OptResult<DqapParams>> {
    let init = initial_params(spec, depth, config.init_mode, config.seed);
    optimize_from(spec, init, config)
}

/// Optimizes an imaginary-time circuit of depth `depth`.
pub fn optimize_imaginary(spec: &LatticeSpec, depth: usize, config: &OptimizerConfig) -> Result<OptResult<ImagParams>> {
    let init = initial_params(spec, depth, config.init_mode, config.seed);
    optimize_from(spec, init, config)
}

/// Optimizes every depth in `depths` (ascending). With [`InitMode::WarmStart`]
/// each depth starts from the previous optimum with averaged layers inserted.
pub fn optimize_series<P: CircuitParams>(
    spec: &LatticeSpec,
    depths: &[usize],
    config: &OptimizerConfig,
) -> Result<Vec<OptResult<P>>> {
    let mut out: Vec<OptResult<P>> = Vec::with_capacity(depths.len());
    for (i, &m) in depths.iter().enumerate() {
        let init = match (config.init_mode, out.last()) {
            (InitMode::WarmStart, Some(prev)) if prev.params.depth() >= 1 && prev.params.depth() < m => {
                let mut p = prev.params.clone();
                while p.depth() < m {
                    p = warm_start(&p)?;
                }
                p
            }
            _ => initial_params(spec, m, config.init_mode, config.seed.wrapping_add(i as u64)),
        };
        out.push(optimize_from(spec, init, config)?);
    }
    Ok(out)
}
