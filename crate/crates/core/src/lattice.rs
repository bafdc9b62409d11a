//! One-dimensional tight-binding chain: hopping matrices, the two bond
//! sets of the layered circuit, and exact Slater ground states.
//!
//! Sites are 0-based internally. The boundary bond always sits at matrix
//! positions `(0, L-1)` and `(L-1, 0)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DqapError, Result};
use crate::slater::SlaterState;
use crate::{c64, CMatrix, C64};

/// Absolute gap (in units of `t`) below which the Fermi level is treated as degenerate.
pub const OPEN_SHELL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// gamma = +1
    #[serde(alias = "pbc")]
    Periodic,
    /// gamma = -1
    #[serde(alias = "apbc")]
    Antiperiodic,
}

impl Boundary {
    pub fn gamma(self) -> f64 {
        match self {
            Boundary::Periodic => 1.0,
            Boundary::Antiperiodic => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Boundary::Periodic => "pbc",
            Boundary::Antiperiodic => "apbc",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = DqapError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbc" | "periodic" | "+1" | "1" => Ok(Boundary::Periodic),
            "apbc" | "antiperiodic" | "-1" => Ok(Boundary::Antiperiodic),
            other => Err(DqapError::InvalidSpec(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Problem instance: chain length, fermion number, boundary sign and hopping energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    sites: usize,
    particles: usize,
    boundary: Boundary,
    hopping: f64,
}

impl LatticeSpec {
    pub fn new(sites: usize, particles: usize, boundary: Boundary, hopping: f64) -> Result<Self> {
        if sites < 2 || !sites.is_multiple_of(2) {
            return Err(DqapError::InvalidSpec(format!("L = {sites} must be a positive even integer")));
        }
        if particles == 0 || particles > sites {
            return Err(DqapError::InvalidSpec(format!("N = {particles} must satisfy 0 < N <= L = {sites}")));
        }
        if !(hopping > 0.0 && hopping.is_finite()) {
            return Err(DqapError::InvalidSpec(format!("t = {hopping} must be positive")));
        }
        Ok(Self { sites, particles, boundary, hopping })
    }

    /// Half filling (`N = L/2`) with `t = 1`.
    pub fn half_filled(sites: usize, boundary: Boundary) -> Result<Self> {
        Self::new(sites, sites / 2, boundary, 1.0)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn gamma(&self) -> f64 {
        self.boundary.gamma()
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn is_half_filled(&self) -> bool {
        2 * self.particles == self.sites
    }

    /// Smallest depth whose light cone covers the chain, `ceil((L-2)/4)`.
    pub fn lieb_robinson_depth(&self) -> usize {
        (self.sites.saturating_sub(2)).div_ceil(4)
    }

    /// Whether the Fermi level is non-degenerate according to the k-space rule
    /// at half filling (APBC needs N even, PBC needs N odd).
    pub fn is_closed_shell_half_filling(&self) -> bool {
        match self.boundary {
            Boundary::Antiperiodic => self.particles.is_multiple_of(2),
            Boundary::Periodic => self.particles % 2 == 1,
        }
    }
}

/// Dense Hermitian single-particle matrix on the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingMatrix(CMatrix);

impl HoppingMatrix {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(DqapError::DimensionMismatch {
                expected: "square matrix".into(),
                actual: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order with matching eigenvector columns.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        sorted_eigh(self.0.clone())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }
}

/// Hermitian eigendecomposition with eigenpairs sorted by ascending eigenvalue.
pub(crate) fn sorted_eigh(m: CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), m);
    }
    // faer's divide-and-conquer solver; nalgebra's implicit QL loses accuracy on
    // some near-degenerate spectra (residuals up to 1e-3 observed).
    let a = faer::Mat::<C64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = a.self_adjoint_eigen(faer::Side::Lower).expect("Hermitian eigensolver converges");
    let s = eig.S();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let values = order.iter().map(|&i| s[i].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    (values, vectors)
}

/// Pairs `(a, b, sign)` of the bonding set, with the boundary phase folded into `sign`.
pub(crate) fn bond_pairs(spec: &LatticeSpec, set: crate::slater::BondSet) -> Vec<(usize, usize, f64)> {
    use crate::slater::BondSet;
    let l = spec.sites();
    match set {
        BondSet::V1 => (0..l / 2).map(|x| (2 * x, 2 * x + 1, 1.0)).collect(),
        BondSet::V2 => {
            let mut pairs: Vec<_> = (0..l / 2 - 1).map(|x| (2 * x + 1, 2 * x + 2, 1.0)).collect();
            pairs.push((0, l - 1, spec.gamma()));
            pairs
        }
    }
}

fn bond_matrix(spec: &LatticeSpec, set: crate::slater::BondSet) -> HoppingMatrix {
    let l = spec.sites();
    let t = spec.hopping();
    let mut m = CMatrix::zeros(l, l);
    for (a, b, sign) in bond_pairs(spec, set) {
        m[(a, b)] += c64(-t * sign, 0.0);
        m[(b, a)] += c64(-t * sign, 0.0);
    }
    HoppingMatrix(m)
}

/// Intra-pair bonds `(2x-1, 2x)` in 1-based labels.
pub fn build_v1(spec: &LatticeSpec) -> HoppingMatrix {
    bond_matrix(spec, crate::slater::BondSet::V1)
}

/// Inter-pair bonds `(2x, 2x+1)` plus the gamma-weighted boundary bond.
pub fn build_v2(spec: &LatticeSpec) -> HoppingMatrix {
    bond_matrix(spec, crate::slater::BondSet::V2)
}

/// Full chain hopping matrix `T = V1 + V2`.
pub fn build_hamiltonian(spec: &LatticeSpec) -> HoppingMatrix {
    build_v1(spec).add(&build_v2(spec))
}

/// `V1 + chi * V2`, the instantaneous Hamiltonian of the linear interpolation.
pub fn interpolated_hamiltonian(spec: &LatticeSpec, chi: f64) -> HoppingMatrix {
    build_v1(spec).add(&build_v2(spec).scaled(chi))
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: SlaterState,
    pub energy: f64,
    /// Full single-particle spectrum, ascending.
    pub spectrum: Vec<f64>,
}

impl GroundState {
    /// Gap between the lowest empty and highest occupied single-particle levels.
    pub fn fermi_gap(&self) -> Option<f64> {
        let n = self.state.particles();
        self.spectrum.get(n).map(|e| e - self.spectrum[n - 1])
    }
}

/// Fills the `n` lowest eigenvectors of `matrix`, rejecting a degenerate Fermi level.
pub fn fill_lowest(matrix: &HoppingMatrix, n: usize, scale: f64) -> Result<GroundState> {
    let (values, vectors) = matrix.eigh();
    if n == 0 || n > values.len() {
        return Err(DqapError::InvalidSpec(format!("cannot fill {n} of {} levels", values.len())));
    }
    if n < values.len() {
        let gap = values[n] - values[n - 1];
        if gap.abs() < OPEN_SHELL_TOL * scale {
            return Err(DqapError::OpenShell { lower: n, upper: n + 1, gap });
        }
    }
    let orbitals = vectors.columns(0, n).into_owned();
    let energy = values[..n].iter().sum();
    Ok(GroundState { state: SlaterState::orthonormal(orbitals), energy, spectrum: values })
}

/// Exact N-particle ground state of the chain.
pub fn exact_ground_state(spec: &LatticeSpec) -> Result<GroundState> {
    fill_lowest(&build_hamiltonian(spec), spec.particles(), spec.hopping())
}

/// Product of nearest-pair bonding orbitals, the ground state of `V1`.
pub fn initial_state(spec: &LatticeSpec) -> Result<SlaterState> {
    if !spec.is_half_filled() {
        return Err(DqapError::InvalidSpec(format!(
            "initial bonding state needs N = L/2, got L = {}, N = {}",
            spec.sites(),
            spec.particles()
        )));
    }
    let l = spec.sites();
    let amp = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut m = CMatrix::zeros(l, l / 2);
    for n in 0..l / 2 {
        m[(2 * n, n)] = amp;
        m[(2 * n + 1, n)] = amp;
    }
    Ok(SlaterState::orthonormal(m))
}

/// Real matrix helper used by tests and the oracle.
pub fn to_real(m: &CMatrix) -> DMatrix<f64> {
    m.map(|z: C64| z.re)
}
