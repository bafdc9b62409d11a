//! Brute-force many-body reference over the fixed-N occupation basis.
//!
//! Basis states are `c_{x1}^dagger ... c_{xN}^dagger |0>` with `x1 < ... < xN`,
//! encoded as bitmasks (bit `x` = site `x`). The sign of `c_x^dagger c_x'`
//! is `(-1)` to the number of occupied sites strictly between `x` and `x'`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{DqapError, Result};
use crate::lattice::{sorted_eigh, HoppingMatrix};
use crate::slater::SlaterState;
use crate::{c64, CMatrix, CVector, C64};

pub const DEFAULT_DIM_CAP: usize = 1000;
/// No setting allows chains longer than this.
pub const MAX_SITES: usize = 14;
pub const MAX_SUBSYSTEM: usize = 8;

#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    masks: Vec<u32>,
    index: HashMap<u32, usize>,
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl FockBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        Self::with_cap(sites, particles, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(sites: usize, particles: usize, cap: usize) -> Result<Self> {
        if particles > sites || sites == 0 {
            return Err(DqapError::InvalidSpec(format!("N = {particles} with L = {sites}")));
        }
        if sites > MAX_SITES {
            return Err(DqapError::SizeLimitExceeded {
                dim: binomial(sites, particles),
                cap: binomial(MAX_SITES, MAX_SITES / 2),
            });
        }
        let dim = binomial(sites, particles);
        if dim > cap {
            return Err(DqapError::SizeLimitExceeded { dim, cap });
        }
        let masks: Vec<u32> = (0u32..(1u32 << sites)).filter(|m| m.count_ones() as usize == particles).collect();
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self { sites, particles, masks, index })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn index_of(&self, mask: u32) -> Option<usize> {
        self.index.get(&mask).copied()
    }

    /// Occupied sites of a basis state in ascending order.
    pub fn occupied(mask: u32) -> Vec<usize> {
        (0..32).filter(|&x| mask >> x & 1 == 1).collect()
    }
}

/// Amplitude vector over a [`FockBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub amplitudes: CVector,
}

impl FockVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn normalized(&self) -> Self {
        Self { amplitudes: self.amplitudes.unscale(self.norm()) }
    }
}

fn check_basis(basis: &FockBasis, vec: &FockVector) -> Result<()> {
    if vec.amplitudes.len() != basis.dim() {
        return Err(DqapError::DimensionMismatch {
            expected: format!("{} amplitudes", basis.dim()),
            actual: format!("{}", vec.amplitudes.len()),
        });
    }
    Ok(())
}

/// Expands a Slater determinant into the occupation basis via row minors.
pub fn slater_to_fock(basis: &FockBasis, state: &SlaterState) -> Result<FockVector> {
    if state.sites() != basis.sites() || state.particles() != basis.particles() {
        return Err(DqapError::DimensionMismatch {
            expected: format!("({}, {})", basis.sites(), basis.particles()),
            actual: format!("({}, {})", state.sites(), state.particles()),
        });
    }
    let psi = state.orbitals();
    let n = basis.particles();
    let amps = basis.masks().iter().map(|&mask| {
        let rows = FockBasis::occupied(mask);
        let sub = CMatrix::from_fn(n, n, |i, j| psi[(rows[i], j)]);
        sub.determinant()
    });
    Ok(FockVector { amplitudes: CVector::from_iterator(basis.dim(), amps) })
}

/// `c_x^dagger c_x'` applied to a basis mask; `None` if the result vanishes.
pub fn hop(mask: u32, x: usize, xp: usize) -> Option<(u32, f64)> {
    if mask >> xp & 1 == 0 {
        return None;
    }
    if x == xp {
        return Some((mask, 1.0));
    }
    if mask >> x & 1 == 1 {
        return None;
    }
    let (lo, hi) = if x < xp { (x, xp) } else { (xp, x) };
    let between = (mask >> (lo + 1)) & ((1u32 << (hi - lo - 1)) - 1);
    let sign = if between.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((mask ^ (1 << xp) ^ (1 << x), sign))
}

/// `c_x^dagger c_x'` applied to a vector.
pub fn apply_hop(basis: &FockBasis, vec: &FockVector, x: usize, xp: usize) -> Result<FockVector> {
    check_basis(basis, vec)?;
    let mut out = CVector::zeros(basis.dim());
    for (i, &mask) in basis.masks().iter().enumerate() {
        if let Some((new, sign)) = hop(mask, x, xp) {
            let j = basis.index_of(new).expect("hop preserves particle number");
            out[j] += vec.amplitudes[i] * sign;
        }
    }
    Ok(FockVector { amplitudes: out })
}

/// `<bra|c_x^dagger c_x'|ket>`.
pub fn one_body(basis: &FockBasis, bra: &FockVector, ket: &FockVector, x: usize, xp: usize) -> Result<C64> {
    Ok(bra.inner(&apply_hop(basis, ket, x, xp)?))
}

/// `<bra|c_x^dagger c_y^dagger c_y' c_x'|ket>`.
pub fn two_body(
    basis: &FockBasis,
    bra: &FockVector,
    ket: &FockVector,
    x: usize,
    y: usize,
    yp: usize,
    xp: usize,
) -> Result<C64> {
    let inner = apply_hop(basis, ket, y, yp)?;
    let mut val = bra.inner(&apply_hop(basis, &inner, x, xp)?);
    if y == xp {
        val -= one_body(basis, bra, ket, x, yp)?;
    }
    Ok(val)
}

/// Dense many-body matrix of `sum_{x,x'} T_{x x'} c_x^dagger c_x'`.
pub fn many_body_matrix(basis: &FockBasis, t: &HoppingMatrix) -> Result<CMatrix> {
    if t.dim() != basis.sites() {
        return Err(DqapError::DimensionMismatch {
            expected: format!("{} sites", basis.sites()),
            actual: format!("{}", t.dim()),
        });
    }
    let l = basis.sites();
    let mut h = CMatrix::zeros(basis.dim(), basis.dim());
    for (i, &mask) in basis.masks().iter().enumerate() {
        for x in 0..l {
            for xp in 0..l {
                let tx = t.matrix()[(x, xp)];
                if tx == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((new, sign)) = hop(mask, x, xp) {
                    let j = basis.index_of(new).expect("hop preserves particle number");
                    h[(j, i)] += tx * sign;
                }
            }
        }
    }
    Ok(h)
}

pub fn fock_apply_hamiltonian(basis: &FockBasis, vec: &FockVector, t: &HoppingMatrix) -> Result<FockVector> {
    check_basis(basis, vec)?;
    Ok(FockVector { amplitudes: many_body_matrix(basis, t)? * &vec.amplitudes })
}

/// `exp(-z H)` applied to a vector through the eigendecomposition of the many-body matrix.
pub fn fock_evolve(basis: &FockBasis, vec: &FockVector, t: &HoppingMatrix, z: C64) -> Result<FockVector> {
    check_basis(basis, vec)?;
    let (values, vectors) = sorted_eigh(many_body_matrix(basis, t)?);
    let coeffs = vectors.adjoint() * &vec.amplitudes;
    let scaled =
        CVector::from_iterator(values.len(), values.iter().zip(coeffs.iter()).map(|(&e, &c)| c * (-z * e).exp()));
    Ok(FockVector { amplitudes: vectors * scaled })
}

/// Energy `<v|H|v> / <v|v>`.
pub fn fock_energy(basis: &FockBasis, vec: &FockVector, t: &HoppingMatrix) -> Result<f64> {
    let hv = fock_apply_hamiltonian(basis, vec, t)?;
    Ok(vec.inner(&hv).re / vec.inner(vec).re)
}

/// Reduced density matrix on the sites `a` (in the given order), normalized to unit trace.
///
/// Modes of `a` are moved in front of the complement; the reordering sign is
/// `(-1)` to the number of pairs `b < a'` with `b` an occupied complement site
/// and `a'` an occupied subsystem site.
pub fn fock_reduced_dm(basis: &FockBasis, vec: &FockVector, a: &[usize]) -> Result<CMatrix> {
    check_basis(basis, vec)?;
    if a.len() > MAX_SUBSYSTEM {
        return Err(DqapError::SizeLimitExceeded { dim: 1 << a.len(), cap: 1 << MAX_SUBSYSTEM });
    }
    let mut a_mask = 0u32;
    for &x in a {
        if x >= basis.sites() || a_mask >> x & 1 == 1 {
            return Err(DqapError::InvalidSpec(format!("bad subsystem site {x}")));
        }
        a_mask |= 1 << x;
    }
    let dim_a = 1usize << a.len();
    let mut groups: HashMap<u32, Vec<(usize, C64)>> = HashMap::new();
    for (i, &mask) in basis.masks().iter().enumerate() {
        let amp = vec.amplitudes[i];
        let mut local = 0usize;
        for (k, &x) in a.iter().enumerate() {
            if mask >> x & 1 == 1 {
                local |= 1 << k;
            }
        }
        // Reorder the ascending product so that A modes (in the order of `a`) precede B modes.
        let occ_a: Vec<usize> = a.iter().copied().filter(|&x| mask >> x & 1 == 1).collect();
        let mut inversions = 0usize;
        for (p, &x) in occ_a.iter().enumerate() {
            for &y in &occ_a[p + 1..] {
                if y < x {
                    inversions += 1;
                }
            }
            let b_below = (mask & !a_mask) & ((1u32 << x) - 1);
            inversions += b_below.count_ones() as usize;
        }
        let sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
        groups.entry(mask & !a_mask).or_default().push((local, amp * sign));
    }
    let mut rho = CMatrix::zeros(dim_a, dim_a);
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let entries = &groups[&key];
        for &(i, ai) in entries {
            for &(j, aj) in entries {
                rho[(i, j)] += ai * aj.conj();
            }
        }
    }
    let tr = rho.trace().re;
    Ok(rho.unscale(tr))
}

/// Von Neumann entropy (nats) of the reduced density matrix on `a`.
pub fn fock_entropy(basis: &FockBasis, vec: &FockVector, a: &[usize]) -> Result<f64> {
    let rho = fock_reduced_dm(basis, vec, a)?;
    let (p, _) = sorted_eigh(rho);
    Ok(p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum())
}

/// Correlation matrix `[D]_{ij} = <c_{a_i}^dagger c_{a_j}>` from the Fock vector.
pub fn fock_correlation(basis: &FockBasis, vec: &FockVector, a: &[usize]) -> Result<CMatrix> {
    let norm = vec.inner(vec).re;
    let mut d = CMatrix::zeros(a.len(), a.len());
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in a.iter().enumerate() {
            d[(i, j)] = one_body(basis, vec, vec, x, y)? / norm;
        }
    }
    Ok(d)
}

/// Real matrix view helper for diagnostics.
pub fn real_part(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// Builds a basis vector from explicit occupied sites.
pub fn basis_vector(basis: &FockBasis, occupied: &[usize]) -> Result<FockVector> {
    let mask = occupied.iter().fold(0u32, |m, &x| m | 1 << x);
    let i = basis.index_of(mask).ok_or_else(|| DqapError::InvalidSpec(format!("{occupied:?} is not in the basis")))?;
    let mut v = DVector::zeros(basis.dim());
    v[i] = c64(1.0, 0.0);
    Ok(FockVector { amplitudes: v })
}
