//! Correlation-matrix entanglement: one-particle density matrices, von
//! Neumann entropies, two-site mutual information and boundary diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{DqapError, Result};
use crate::lattice::sorted_eigh;
use crate::slater::SlaterState;
use crate::{CMatrix, C64};

/// Eigenvalues further than this outside `[0, 1]` signal an upstream failure.
pub const EIGENVALUE_RANGE_TOL: f64 = 1e-8;
pub const RANK_TOL: f64 = 1e-8;
pub const PAIRING_TOL: f64 = 1e-6;
/// Eigenvalues closer than this to 0 or 1 count as unentangled.
pub const EDGE_TOL: f64 = 1e-8;

/// Ordered set of distinct sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    sites: Vec<usize>,
}

impl Subsystem {
    pub fn new(sites: Vec<usize>, chain_len: usize) -> Result<Self> {
        let mut seen = vec![false; chain_len];
        for &x in &sites {
            if x >= chain_len {
                return Err(DqapError::InvalidSpec(format!("site {x} outside chain of length {chain_len}")));
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(DqapError::InvalidSpec(format!("site {x} repeated")));
            }
        }
        Ok(Self { sites })
    }

    /// `len` consecutive sites starting at `start` (0-based, wrapping around).
    pub fn block(start: usize, len: usize, chain_len: usize) -> Result<Self> {
        Self::new((0..len).map(|i| (start + i) % chain_len).collect(), chain_len)
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Whether every bonding pair `(2k, 2k+1)` lies entirely inside or outside.
    pub fn is_bond_preserving(&self) -> bool {
        let inside = |x: usize| self.sites.contains(&x);
        self.sites.iter().all(|&x| inside(x ^ 1))
    }

    pub fn complement(&self, chain_len: usize) -> Self {
        Self { sites: (0..chain_len).filter(|x| !self.sites.contains(x)).collect() }
    }
}

/// Ascending eigenvalues of a subsystem correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpectrum {
    pub eigenvalues: Vec<f64>,
    pub subsystem: Subsystem,
}

/// `[D]_{ij} = <c_{A_i}^dagger c_{A_j}>`.
pub fn one_particle_dm(state: &SlaterState, a: &Subsystem) -> Result<CMatrix> {
    let p = state.projector()?;
    Ok(restrict(&p, a))
}

fn restrict(p: &CMatrix, a: &Subsystem) -> CMatrix {
    let s = a.sites();
    CMatrix::from_fn(s.len(), s.len(), |i, j| p[(s[j], s[i])])
}

pub fn correlation_spectrum(state: &SlaterState, a: &Subsystem) -> Result<CorrelationSpectrum> {
    let d = one_particle_dm(state, a)?;
    let (eigenvalues, _) = sorted_eigh(d);
    Ok(CorrelationSpectrum { eigenvalues, subsystem: a.clone() })
}

fn binary_entropy(d: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    term(d) + term(1.0 - d)
}

/// Entropy from correlation eigenvalues after clamping into `[0, 1]`.
pub fn entropy_from_eigenvalues(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &d in eigenvalues {
        if !(-EIGENVALUE_RANGE_TOL..=1.0 + EIGENVALUE_RANGE_TOL).contains(&d) || !d.is_finite() {
            return Err(DqapError::EigenvalueOutOfRange(d));
        }
        s += binary_entropy(d.clamp(0.0, 1.0));
    }
    Ok(s)
}

/// Same entropy through the single-particle entanglement energies
/// `lambda = ln(1 - d) - ln d`, over eigenvalues strictly inside `(cut, 1 - cut)`.
pub fn entropy_from_entanglement_energies(eigenvalues: &[f64], cut: f64) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&d| d > cut && d < 1.0 - cut)
        .map(|&d| {
            let lambda = (1.0 - d).ln() - d.ln();
            let occ = 1.0 / (lambda.exp() + 1.0);
            lambda.exp().ln_1p() - lambda * (1.0 - occ)
        })
        .sum()
}

/// Von Neumann entropy of subsystem `a` in nats.
pub fn entanglement_entropy(state: &SlaterState, a: &Subsystem) -> Result<f64> {
    entropy_from_eigenvalues(&correlation_spectrum(state, a)?.eigenvalues)
}

/// Mutual information of a two-site correlation matrix `[[n_x, c], [c^*, n_x']]`.
pub fn mutual_information_from_dm(nx: f64, nxp: f64, c: C64) -> Result<f64> {
    let d = CMatrix::from_row_slice(2, 2, &[C64::new(nx, 0.0), c, c.conj(), C64::new(nxp, 0.0)]);
    let (pair, _) = sorted_eigh(d);
    let joint = entropy_from_eigenvalues(&pair)?;
    Ok(entropy_from_eigenvalues(&[nx])? + entropy_from_eigenvalues(&[nxp])? - joint)
}

/// `I_{x,x'} = S_x + S_x' - S_{x,x'}`.
pub fn mutual_information(state: &SlaterState, x: usize, xp: usize) -> Result<f64> {
    if x == xp {
        return Err(DqapError::InvalidSpec("mutual information needs two distinct sites".into()));
    }
    let p = state.projector()?;
    mutual_information_from_projector(&p, x, xp)
}

pub fn mutual_information_from_projector(p: &CMatrix, x: usize, xp: usize) -> Result<f64> {
    mutual_information_from_dm(p[(x, x)].re, p[(xp, xp)].re, p[(xp, x)])
}

/// All pairs `x < x'` with their mutual information.
pub fn mutual_information_table(state: &SlaterState) -> Result<Vec<(usize, usize, f64)>> {
    let p = state.projector()?;
    let l = state.sites();
    let mut out = Vec::with_capacity(l * (l - 1) / 2);
    for x in 0..l {
        for xp in x + 1..l {
            out.push((x, xp, mutual_information_from_projector(&p, x, xp)?));
        }
    }
    Ok(out)
}

/// Distance on the ring.
pub fn cyclic_distance(x: usize, xp: usize, l: usize) -> usize {
    let d = x.abs_diff(xp);
    d.min(l - d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDiagnostic {
    /// Rank of `D^2 - D` with singular values above [`RANK_TOL`].
    pub rank: usize,
    pub zeros: usize,
    pub ones: usize,
    /// Eigenvalues strictly between the edges, ascending.
    pub interior: Vec<f64>,
    /// Interior eigenvalues split into adjacent pairs closer than [`PAIRING_TOL`].
    pub pairwise_degenerate: bool,
}

pub fn boundary_rank_diagnostic(state: &SlaterState, a: &Subsystem) -> Result<BoundaryDiagnostic> {
    let d = one_particle_dm(state, a)?;
    let dd = &d * &d - &d;
    let rank = dd.singular_values().iter().filter(|&&s| s > RANK_TOL).count();
    let (eig, _) = sorted_eigh(d);
    let zeros = eig.iter().filter(|&&x| x.abs() < EDGE_TOL).count();
    let ones = eig.iter().filter(|&&x| (x - 1.0).abs() < EDGE_TOL).count();
    let interior: Vec<f64> = eig.into_iter().filter(|&x| x.abs() >= EDGE_TOL && (x - 1.0).abs() >= EDGE_TOL).collect();
    let pairwise_degenerate = interior.len().is_multiple_of(2) && interior.chunks(2).all(|c| (c[1] - c[0]).abs() < PAIRING_TOL);
    Ok(BoundaryDiagnostic { rank, zeros, ones, interior, pairwise_degenerate })
}

fn check_consecutive(series: &[(usize, f64)]) -> Result<()> {
    if series.len() < 2 {
        return Err(DqapError::InvalidParams("exponent needs at least two depths".into()));
    }
    for w in series.windows(2) {
        if w[1].0 != w[0].0 + 1 || w[0].0 == 0 {
            return Err(DqapError::InvalidParams(format!(
                "depths {} and {} are not consecutive positive integers",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(())
}

/// `delta_S(M) = 3 (S_{M+1} - S_M) / (ln(M+1) - ln M)` for each consecutive pair.
pub fn entropy_exponents(series: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    check_consecutive(series)?;
    Ok(series
        .windows(2)
        .map(|w| {
            let dl = (w[1].0 as f64).ln() - (w[0].0 as f64).ln();
            (w[0].0, 3.0 * (w[1].1 - w[0].1) / dl)
        })
        .collect())
}

/// `delta_E(M) = -(1/2) (ln de_{M+1} - ln de_M) / (ln(M+1) - ln M)`, positive for `de ~ M^-2`.
pub fn energy_exponents(series: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    check_consecutive(series)?;
    if let Some(&(m, e)) = series.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(DqapError::InvalidParams(format!("non-positive energy error {e} at M = {m}")));
    }
    Ok(series
        .windows(2)
        .map(|w| {
            let dl = (w[1].0 as f64).ln() - (w[0].0 as f64).ln();
            (w[0].0, -0.5 * (w[1].1.ln() - w[0].1.ln()) / dl)
        })
        .collect())
}
