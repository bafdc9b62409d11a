//! Slater-determinant algebra: overlaps, transition densities, Wick
//! contractions and closed-form bond-layer evolution.

use nalgebra::LU;
use serde::{Deserialize, Serialize};

use crate::error::{DqapError, Result};
use crate::lattice::{bond_pairs, HoppingMatrix, LatticeSpec};
use crate::{c64, CMatrix, C64};

/// Relative determinant magnitude below which an overlap matrix is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-14;

/// One of the two commuting bond sets of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondSet {
    V1,
    V2,
}

/// Whether a layer is `exp(-i theta V)` or `exp(-tau V)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evolution {
    RealTime,
    ImaginaryTime,
}

/// N-fermion Slater determinant stored as an `L x N` orbital matrix.
///
/// Imaginary-time evolution rescales columns to avoid overflow. The stored
/// matrix equals the unscaled one times `diag(1/c_n)` and `log_scale` holds
/// `sum_n ln c_n`, so the unscaled determinant norm is recoverable.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterState {
    orbitals: CMatrix,
    normalized: bool,
    log_scale: f64,
}

impl SlaterState {
    /// Wraps a matrix whose columns are assumed orthonormal.
    pub fn orthonormal(orbitals: CMatrix) -> Self {
        Self { orbitals, normalized: true, log_scale: 0.0 }
    }

    /// Wraps a general full-rank orbital matrix.
    pub fn general(orbitals: CMatrix) -> Self {
        Self { orbitals, normalized: false, log_scale: 0.0 }
    }

    pub(crate) fn with_log_scale(mut self, log_scale: f64) -> Self {
        self.log_scale = log_scale;
        self
    }

    pub fn orbitals(&self) -> &CMatrix {
        &self.orbitals
    }

    pub fn into_orbitals(self) -> CMatrix {
        self.orbitals
    }

    pub fn sites(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn particles(&self) -> usize {
        self.orbitals.ncols()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn gram(&self) -> CMatrix {
        self.orbitals.adjoint() * &self.orbitals
    }

    /// `ln sqrt(det(G^dagger G))` of the unscaled orbitals, i.e. the log norm of the many-body state.
    pub fn log_norm(&self) -> Result<f64> {
        Ok(orthonormal_basis(self)?.1 + self.log_scale)
    }

    /// Orthonormalized copy spanning the same subspace (same many-body state up to norm and phase).
    pub fn orthonormalized(&self) -> Self {
        let q = self.orbitals.clone().qr().q();
        Self::orthonormal(q)
    }

    /// Projector `Psi (Psi^dagger Psi)^{-1} Psi^dagger`; entry `[x', x]` is `<c_x^dagger c_x'>`.
    pub fn projector(&self) -> Result<CMatrix> {
        if self.normalized {
            return Ok(&self.orbitals * self.orbitals.adjoint());
        }
        transition_density(self, self)
    }

    fn check_dims(&self, other: &Self) -> Result<()> {
        if self.orbitals.shape() != other.orbitals.shape() {
            return Err(DqapError::DimensionMismatch {
                expected: format!("{:?}", self.orbitals.shape()),
                actual: format!("{:?}", other.orbitals.shape()),
            });
        }
        Ok(())
    }

    fn check_spec(&self, spec: &LatticeSpec) -> Result<()> {
        if self.sites() != spec.sites() || self.particles() != spec.particles() {
            return Err(DqapError::DimensionMismatch {
                expected: format!("({}, {})", spec.sites(), spec.particles()),
                actual: format!("{:?}", self.orbitals.shape()),
            });
        }
        Ok(())
    }
}

fn column_norm_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.column_iter().zip(b.column_iter()).map(|(x, y)| x.norm() * y.norm()).product()
}

/// Orthonormal basis of the orbital span and `ln |det R|` from a QR
/// factorization. Working with `Q` keeps errors at `cond(Psi)` instead of the
/// `cond(Psi)^2` of the Gram matrix.
fn orthonormal_basis(state: &SlaterState) -> Result<(CMatrix, f64)> {
    if state.normalized {
        return Ok((state.orbitals.clone(), 0.0));
    }
    let qr = state.orbitals.clone().qr();
    let log_det: f64 = qr.r().diagonal().iter().map(|z| z.norm().ln()).sum();
    let log_cols: f64 = state.orbitals.column_iter().map(|c| c.norm().ln()).sum();
    let rel = (2.0 * (log_det - log_cols)).exp();
    if !(rel >= SINGULAR_TOL) {
        return Err(DqapError::SingularOverlap(rel));
    }
    Ok((qr.q(), log_det))
}

/// `det(Psi^dagger Phi)` of the stored orbitals, excluding log scales.
fn raw_overlap(psi: &SlaterState, phi: &SlaterState) -> Result<C64> {
    psi.check_dims(phi)?;
    Ok(LU::new(psi.orbitals.adjoint() * &phi.orbitals).determinant())
}

/// Many-body overlap `<psi|phi> = det(Psi^dagger Phi)` including accumulated scales.
pub fn overlap(psi: &SlaterState, phi: &SlaterState) -> Result<C64> {
    let det = raw_overlap(psi, phi)?;
    Ok(det * (psi.log_scale + phi.log_scale).exp())
}

/// `|<psi|phi>| / (||psi|| ||phi||)`, independent of normalization and scale.
pub fn fidelity(psi: &SlaterState, phi: &SlaterState) -> Result<f64> {
    psi.check_dims(phi)?;
    let (a, _) = orthonormal_basis(psi)?;
    let (b, _) = orthonormal_basis(phi)?;
    Ok(LU::new(a.adjoint() * b).determinant().norm())
}

/// `sqrt(2 - 2 |<psi|phi>|)` for normalized states.
pub fn fidelity_distance(psi: &SlaterState, phi: &SlaterState) -> Result<f64> {
    let f = fidelity(psi, phi)?;
    Ok((2.0 - 2.0 * f).max(0.0).sqrt())
}

/// `Phi (Psi^dagger Phi)^{-1} Psi^dagger`, with entry `[x', x] = <psi|c_x^dagger c_x'|phi> / <psi|phi>`.
pub fn transition_density(psi: &SlaterState, phi: &SlaterState) -> Result<CMatrix> {
    psi.check_dims(phi)?;
    let m = psi.orbitals.adjoint() * &phi.orbitals;
    let lu = LU::new(m);
    let rel = lu.determinant().norm() / column_norm_product(&psi.orbitals, &phi.orbitals);
    if !(rel >= SINGULAR_TOL) {
        return Err(DqapError::SingularOverlap(rel));
    }
    let x = lu.solve(&psi.orbitals.adjoint()).ok_or(DqapError::SingularOverlap(rel))?;
    Ok(&phi.orbitals * x)
}

/// `<psi|c_x^dagger c_y^dagger c_y' c_x'|phi> / <psi|phi>` by Wick's theorem.
pub fn two_body_expectation(
    psi: &SlaterState,
    phi: &SlaterState,
    x: usize,
    y: usize,
    yp: usize,
    xp: usize,
) -> Result<C64> {
    let g = transition_density(psi, phi)?;
    Ok(wick(&g, x, y, yp, xp))
}

/// Wick contraction on a precomputed transition density.
pub fn wick(g: &CMatrix, x: usize, y: usize, yp: usize, xp: usize) -> C64 {
    let c = |a: usize, b: usize| g[(b, a)];
    c(x, xp) * c(y, yp) - c(x, yp) * c(y, xp)
}

/// `Re tr[(Psi^dagger Psi)^{-1} Psi^dagger T Psi]`.
pub fn energy_expectation(state: &SlaterState, t: &HoppingMatrix) -> Result<f64> {
    if t.dim() != state.sites() {
        return Err(DqapError::DimensionMismatch {
            expected: format!("{} sites", state.sites()),
            actual: format!("{} sites", t.dim()),
        });
    }
    if state.normalized {
        return Ok((state.orbitals.adjoint() * (t.matrix() * &state.orbitals)).trace().re);
    }
    let (q, _) = orthonormal_basis(state)?;
    Ok((q.adjoint() * (t.matrix() * &q)).trace().re)
}

/// Mixes row pairs in place: `(r_a, r_b) <- (d r_a + s o r_b, s o r_a + d r_b)`.
pub(crate) fn mix_rows(m: &mut CMatrix, pairs: &[(usize, usize, f64)], d: C64, o: C64) {
    let ncols = m.ncols();
    for &(a, b, s) in pairs {
        let so = o * s;
        for j in 0..ncols {
            let ra = m[(a, j)];
            let rb = m[(b, j)];
            m[(a, j)] = d * ra + so * rb;
            m[(b, j)] = so * ra + d * rb;
        }
    }
}

/// Closed-form 2x2 block coefficients `(diag, offdiag)` of the layer exponential.
pub(crate) fn layer_coefficients(angle: f64, hopping: f64, mode: Evolution) -> (C64, C64) {
    let a = angle * hopping;
    match mode {
        Evolution::RealTime => (c64(a.cos(), 0.0), c64(0.0, a.sin())),
        Evolution::ImaginaryTime => (c64(a.cosh(), 0.0), c64(a.sinh(), 0.0)),
    }
}

/// Left-multiplies `m` by the bond matrix of `set` in O(L N).
pub fn apply_bond_matrix(m: &CMatrix, set: BondSet, spec: &LatticeSpec) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols());
    let t = spec.hopping();
    for (a, b, s) in bond_pairs(spec, set) {
        let w = -t * s;
        for j in 0..m.ncols() {
            out[(a, j)] += m[(b, j)] * w;
            out[(b, j)] += m[(a, j)] * w;
        }
    }
    out
}

/// In-place layer `exp(-i angle V)` or `exp(-angle V)` on a raw orbital matrix, without rescaling.
pub(crate) fn apply_layer_raw(m: &mut CMatrix, set: BondSet, angle: f64, mode: Evolution, spec: &LatticeSpec) {
    let (d, o) = layer_coefficients(angle, spec.hopping(), mode);
    mix_rows(m, &bond_pairs(spec, set), d, o);
}

/// Columns whose largest absolute entry stays inside this window are left untouched.
const RESCALE_WINDOW: (f64, f64) = (1.0 / 16.0, 1.0);

/// Divides every column whose largest absolute entry leaves [`RESCALE_WINDOW`]
/// by that entry and returns `sum ln c_n`.
pub(crate) fn rescale_columns(m: &mut CMatrix) -> f64 {
    let mut acc = 0.0;
    for mut col in m.column_iter_mut() {
        let c = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let inside = c >= RESCALE_WINDOW.0 && c <= RESCALE_WINDOW.1;
        if c > 0.0 && c.is_finite() && !inside {
            col.unscale_mut(c);
            acc += c.ln();
        }
    }
    acc
}

/// Below this value of `|det Psi|^2 / prod ||psi_n||^2` the orbitals are
/// re-orthonormalized; long imaginary-time steps otherwise collapse the
/// columns onto the lowest modes.
pub const REORTHO_TRIGGER: f64 = 1e-2;

/// Right factor `A` applied to the orbital matrix by [`normalize_layer`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Gauge {
    /// Columns divided by these factors.
    Diagonal(Vec<f64>),
    Full(CMatrix),
}

impl Gauge {
    /// `m <- m A`.
    pub(crate) fn apply(&self, m: &mut CMatrix) {
        match self {
            Gauge::Diagonal(c) => {
                for (mut col, &f) in m.column_iter_mut().zip(c) {
                    col.unscale_mut(f);
                }
            }
            Gauge::Full(a) => *m = &*m * a,
        }
    }

    /// `m <- m A^dagger`, the adjoint action used by backward sweeps.
    pub(crate) fn apply_adjoint(&self, m: &mut CMatrix) {
        match self {
            Gauge::Diagonal(_) => self.apply(m),
            Gauge::Full(a) => *m = &*m * a.adjoint(),
        }
    }
}

fn column_maxima(m: &CMatrix) -> Vec<f64> {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).fold(0.0, f64::max)).collect()
}

/// Windowed column rescaling, followed by a phase-preserving QR
/// re-orthonormalization when the columns become nearly dependent. Returns
/// the applied right factor `A` and `ln det A^{-1}`, which is real.
pub(crate) fn normalize_layer(m: &mut CMatrix) -> (Gauge, f64) {
    let before = column_maxima(m);
    let mut log = rescale_columns(m);
    let factors: Vec<f64> =
        before.iter().zip(column_maxima(m)).map(|(b, a)| if a > 0.0 { b / a } else { 1.0 }).collect();
    let norms: f64 = m.column_iter().map(|c| c.norm().ln()).sum();
    let qr = m.clone().qr();
    let r = qr.r();
    let log_det: f64 = r.diagonal().iter().map(|z| z.norm().ln()).sum();
    if !((2.0 * (log_det - norms)).exp() < REORTHO_TRIGGER) || !log_det.is_finite() {
        return (Gauge::Diagonal(factors), log);
    }
    let det_phase = r.diagonal().iter().fold(c64(1.0, 0.0), |acc, z| acc * z / z.norm());
    let mut q = qr.q();
    q.column_mut(0).iter_mut().for_each(|z| *z *= det_phase);
    let mut phase = CMatrix::identity(r.nrows(), r.ncols());
    phase[(0, 0)] = det_phase;
    let r_inv = r.clone().try_inverse().expect("triangular factor is invertible when log det is finite");
    let diag = CMatrix::from_diagonal(&factors.iter().map(|f| c64(1.0 / f, 0.0)).collect::<Vec<_>>().into());
    *m = q;
    log += log_det;
    let mut a = diag * r_inv * phase;
    // keep the entries of the new columns inside the window as well
    let before = column_maxima(m);
    log += rescale_columns(m);
    for ((mut col, b), after) in a.column_iter_mut().zip(before).zip(column_maxima(m)) {
        if after > 0.0 {
            col.scale_mut(after / b);
        }
    }
    (Gauge::Full(a), log)
}

/// Applies one bond layer. Real-time layers are unitary and keep the
/// normalized flag; imaginary-time layers clear it and renormalize the
/// orbitals through [`normalize_layer`].
pub fn apply_bond_layer(
    state: &SlaterState,
    which: BondSet,
    angle: f64,
    mode: Evolution,
    spec: &LatticeSpec,
) -> Result<SlaterState> {
    state.check_spec(spec)?;
    let mut out = state.clone();
    apply_layer_raw(&mut out.orbitals, which, angle, mode, spec);
    if mode == Evolution::ImaginaryTime {
        out.normalized = false;
        out.log_scale += normalize_layer(&mut out.orbitals).1;
    }
    Ok(out)
}
