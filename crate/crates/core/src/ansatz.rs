//! Layered variational states built from alternating bond layers, together
//! with their intermediate snapshots and exact parameter derivatives.
//!
//! Parameters are flattened as `(theta2^(1), theta1^(1), theta2^(2), theta1^(2), ...)`,
//! which is also the order the layers act on the initial state: flat index
//! `k` uses `V2` when `k` is even and `V1` when it is odd.

use serde::{Deserialize, Serialize};

use crate::error::{DqapError, Result};
use crate::lattice::{initial_state, HoppingMatrix, LatticeSpec};
use crate::slater::{apply_bond_matrix, apply_layer_raw, normalize_layer, BondSet, Evolution, Gauge, SlaterState};
use crate::{c64, CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerAngles {
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagSteps {
    pub tau1: f64,
    pub tau2: f64,
}

/// Real-time layer angles, one entry per layer in application order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DqapParams {
    pub layers: Vec<LayerAngles>,
}

/// Imaginary-time steps, one entry per layer in application order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagParams {
    pub layers: Vec<ImagSteps>,
}

/// Common interface of the two parameter families.
pub trait CircuitParams: Clone + Send + Sync + std::fmt::Debug {
    const MODE: Evolution;

    fn depth(&self) -> usize;

    /// Flattened parameters in application order.
    fn to_flat(&self) -> Vec<f64>;

    fn from_flat(flat: &[f64]) -> Result<Self>;

    fn from_pairs(pairs: Vec<(f64, f64)>) -> Self;

    /// `(V1 parameter, V2 parameter)` per layer.
    fn pairs(&self) -> Vec<(f64, f64)>;

    fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }
}

fn flat_to_pairs(flat: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !flat.len().is_multiple_of(2) {
        return Err(DqapError::InvalidParams(format!("odd parameter count {}", flat.len())));
    }
    Ok(flat.chunks(2).map(|c| (c[1], c[0])).collect())
}

fn pairs_to_flat(pairs: &[(f64, f64)]) -> Vec<f64> {
    pairs.iter().flat_map(|&(v1, v2)| [v2, v1]).collect()
}

impl CircuitParams for DqapParams {
    const MODE: Evolution = Evolution::RealTime;

    fn depth(&self) -> usize {
        self.layers.len()
    }

    fn to_flat(&self) -> Vec<f64> {
        pairs_to_flat(&self.pairs())
    }

    fn from_flat(flat: &[f64]) -> Result<Self> {
        Ok(Self::from_pairs(flat_to_pairs(flat)?))
    }

    fn from_pairs(pairs: Vec<(f64, f64)>) -> Self {
        Self { layers: pairs.into_iter().map(|(theta1, theta2)| LayerAngles { theta1, theta2 }).collect() }
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        self.layers.iter().map(|l| (l.theta1, l.theta2)).collect()
    }
}

impl CircuitParams for ImagParams {
    const MODE: Evolution = Evolution::ImaginaryTime;

    fn depth(&self) -> usize {
        self.layers.len()
    }

    fn to_flat(&self) -> Vec<f64> {
        pairs_to_flat(&self.pairs())
    }

    fn from_flat(flat: &[f64]) -> Result<Self> {
        Ok(Self::from_pairs(flat_to_pairs(flat)?))
    }

    fn from_pairs(pairs: Vec<(f64, f64)>) -> Self {
        Self { layers: pairs.into_iter().map(|(tau1, tau2)| ImagSteps { tau1, tau2 }).collect() }
    }

    fn pairs(&self) -> Vec<(f64, f64)> {
        self.layers.iter().map(|l| (l.tau1, l.tau2)).collect()
    }
}

impl DqapParams {
    pub fn zeros(depth: usize) -> Self {
        Self { layers: vec![LayerAngles::default(); depth] }
    }

    /// Discretized linear sweep: `theta1 = dtau`, `theta2 = (m/M) dtau`.
    pub fn linear_schedule(depth: usize, dtau: f64) -> Self {
        let layers =
            (1..=depth).map(|m| LayerAngles { theta1: dtau, theta2: m as f64 / depth as f64 * dtau }).collect();
        Self { layers }
    }

    /// Sum of all angles.
    pub fn total_time(&self) -> f64 {
        self.layers.iter().map(|l| l.theta1 + l.theta2).sum()
    }
}

impl ImagParams {
    pub fn zeros(depth: usize) -> Self {
        Self { layers: vec![ImagSteps::default(); depth] }
    }

    /// Half the sum of all imaginary-time steps.
    pub fn mean_inverse_temperature(&self) -> f64 {
        0.5 * self.layers.iter().map(|l| l.tau1 + l.tau2).sum::<f64>()
    }
}

/// Bond set acting at flat index `k`.
pub fn bond_at(k: usize) -> BondSet {
    if k.is_multiple_of(2) {
        BondSet::V2
    } else {
        BondSet::V1
    }
}

/// Forward pass: matrices after each flat layer (after renormalization) and the per-layer gauge factors.
struct Forward {
    states: Vec<CMatrix>,
    gauges: Vec<Gauge>,
    log_scale: f64,
}

fn forward(spec: &LatticeSpec, flat: &[f64], mode: Evolution, keep: bool) -> Result<Forward> {
    let psi = initial_state(spec)?;
    let mut cur = psi.into_orbitals();
    let mut states = Vec::with_capacity(if keep { flat.len() + 1 } else { 1 });
    let mut gauges = Vec::new();
    let mut log_scale = 0.0;
    if keep {
        states.push(cur.clone());
    }
    for (k, &angle) in flat.iter().enumerate() {
        apply_layer_raw(&mut cur, bond_at(k), angle, mode, spec);
        if mode == Evolution::ImaginaryTime {
            let (g, log) = normalize_layer(&mut cur);
            log_scale += log;
            gauges.push(g);
        }
        if keep {
            states.push(cur.clone());
        }
    }
    if !keep {
        states.push(cur);
    }
    Ok(Forward { states, gauges, log_scale })
}

fn check_finite(flat: &[f64]) -> Result<()> {
    if flat.iter().any(|x| !x.is_finite()) {
        return Err(DqapError::InvalidParams("non-finite parameter".into()));
    }
    Ok(())
}

/// State produced by an arbitrary parameter family.
pub fn build_state<P: CircuitParams>(spec: &LatticeSpec, params: &P) -> Result<SlaterState> {
    let flat = params.to_flat();
    check_finite(&flat)?;
    let mut fw = forward(spec, &flat, P::MODE, false)?;
    let m = fw.states.pop().expect("final state");
    Ok(finish(m, P::MODE, fw.log_scale))
}

fn finish(m: CMatrix, mode: Evolution, log_scale: f64) -> SlaterState {
    match mode {
        Evolution::RealTime => SlaterState::orthonormal(m),
        Evolution::ImaginaryTime => SlaterState::general(m).with_log_scale(log_scale),
    }
}

/// Real-time layered state applied to the bonding product state.
pub fn build_dqap_state(spec: &LatticeSpec, params: &DqapParams) -> Result<SlaterState> {
    build_state(spec, params)
}

/// Imaginary-time layered state (unnormalized).
pub fn build_imag_state(spec: &LatticeSpec, params: &ImagParams) -> Result<SlaterState> {
    build_state(spec, params)
}

/// Snapshots after each full layer, starting with the initial state.
pub fn intermediate_states(spec: &LatticeSpec, params: &DqapParams) -> Result<Vec<SlaterState>> {
    let flat = params.to_flat();
    check_finite(&flat)?;
    let fw = forward(spec, &flat, Evolution::RealTime, true)?;
    Ok(fw.states.into_iter().step_by(2).map(SlaterState::orthonormal).collect())
}

/// Length of the shortest cyclic window holding every entry above `threshold`, per column.
pub fn orbital_support(state: &SlaterState, threshold: f64) -> Vec<usize> {
    let l = state.sites();
    state
        .orbitals()
        .column_iter()
        .map(|col| {
            let pos: Vec<usize> = (0..l).filter(|&x| col[x].norm() > threshold).collect();
            if pos.is_empty() {
                return 0;
            }
            let mut max_gap = pos[0] + l - pos[pos.len() - 1];
            for w in pos.windows(2) {
                max_gap = max_gap.max(w[1] - w[0]);
            }
            l - max_gap + 1
        })
        .collect()
}

/// Final state and its derivative with respect to every flat parameter.
pub struct StateDerivatives {
    pub state: SlaterState,
    pub derivatives: Vec<CMatrix>,
    pub mode: Evolution,
}

/// Analytic derivatives of the stored orbital matrix.
///
/// For imaginary time the per-layer gauge factors of the forward pass are
/// held fixed, which multiplies every derivative and the state by the same
/// invertible matrix on the right. All normalized quantities are invariant
/// under that transformation.
pub fn param_derivatives<P: CircuitParams>(spec: &LatticeSpec, params: &P) -> Result<StateDerivatives> {
    let flat = params.to_flat();
    check_finite(&flat)?;
    let mode = P::MODE;
    let fw = forward(spec, &flat, mode, true)?;
    let factor = match mode {
        Evolution::RealTime => c64(0.0, -1.0),
        Evolution::ImaginaryTime => c64(-1.0, 0.0),
    };
    let kmax = flat.len();
    let mut derivatives = Vec::with_capacity(kmax);
    for k in 0..kmax {
        let mut d = apply_bond_matrix(&fw.states[k + 1], bond_at(k), spec);
        d *= factor;
        for j in k + 1..kmax {
            apply_layer_raw(&mut d, bond_at(j), flat[j], mode, spec);
            if mode == Evolution::ImaginaryTime {
                fw.gauges[j].apply(&mut d);
            }
        }
        derivatives.push(d);
    }
    let last = fw.states.into_iter().last().expect("final state");
    Ok(StateDerivatives { state: finish(last, mode, fw.log_scale), derivatives, mode })
}

pub fn dqap_param_derivatives(spec: &LatticeSpec, params: &DqapParams) -> Result<Vec<CMatrix>> {
    Ok(param_derivatives(spec, params)?.derivatives)
}

pub fn imag_param_derivatives(spec: &LatticeSpec, params: &ImagParams) -> Result<Vec<CMatrix>> {
    Ok(param_derivatives(spec, params)?.derivatives)
}

/// Energy and its gradient by a forward pass and a backward adjoint sweep, O(K L N).
pub fn energy_gradient<P: CircuitParams>(spec: &LatticeSpec, params: &P, t: &HoppingMatrix) -> Result<(f64, Vec<f64>)> {
    let flat = params.to_flat();
    check_finite(&flat)?;
    let mode = P::MODE;
    let fw = forward(spec, &flat, mode, true)?;
    let g = fw.states.last().expect("final state");
    let tg = t.matrix() * g;
    let (energy, mut lambda) = match mode {
        Evolution::RealTime => ((g.adjoint() * &tg).trace().re, tg),
        Evolution::ImaginaryTime => {
            let gram = g.adjoint() * g;
            let f = gram.try_inverse().ok_or(DqapError::SingularOverlap(0.0))?;
            let h = g.adjoint() * &tg;
            let energy = (&f * &h).trace().re;
            let lambda = (&tg - g * (&f * &h)) * &f;
            (energy, lambda)
        }
    };
    let factor = match mode {
        Evolution::RealTime => c64(0.0, -1.0),
        Evolution::ImaginaryTime => c64(-1.0, 0.0),
    };
    let mut grad = vec![0.0; flat.len()];
    for k in (0..flat.len()).rev() {
        let x = apply_bond_matrix(&fw.states[k + 1], bond_at(k), spec);
        grad[k] = 2.0 * (factor * lambda.dotc(&x)).re;
        if mode == Evolution::ImaginaryTime {
            fw.gauges[k].apply_adjoint(&mut lambda);
        }
        let back = match mode {
            Evolution::RealTime => -flat[k],
            Evolution::ImaginaryTime => flat[k],
        };
        apply_layer_raw(&mut lambda, bond_at(k), back, mode, spec);
    }
    Ok((energy, grad))
}

/// Helper for tests and diagnostics: `C64` from a real number.
pub fn real(x: f64) -> C64 {
    c64(x, 0.0)
}
