//! Slater-level quantities against brute-force occupation-basis calculations.

use dqap_core::ansatz::{build_state, energy_gradient, CircuitParams, DqapParams, ImagParams};
use dqap_core::entanglement::{entanglement_entropy, mutual_information, Subsystem};
use dqap_core::fock::*;
use dqap_core::lattice::{build_hamiltonian, build_v1, build_v2, initial_state};
use dqap_core::slater::{
    apply_bond_layer, energy_expectation, overlap, transition_density, two_body_expectation, wick,
};
use dqap_core::{BondSet, Boundary, CMatrix, Evolution, LatticeSpec, SlaterState, C64};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-10;

fn random_orbitals(rng: &mut ChaCha8Rng, l: usize, n: usize) -> CMatrix {
    CMatrix::from_fn(l, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn instance() -> impl Strategy<Value = (LatticeSpec, u64)> {
    (prop::sample::select(vec![4usize, 6, 8]), any::<u64>(), any::<bool>(), 1usize..8).prop_map(|(l, seed, apbc, n)| {
        let boundary = if apbc { Boundary::Antiperiodic } else { Boundary::Periodic };
        let spec = LatticeSpec::new(l, n.min(l - 1), boundary, 1.0).unwrap();
        (spec, seed)
    })
}

fn half_filled() -> impl Strategy<Value = (LatticeSpec, u64)> {
    (prop::sample::select(vec![4usize, 6, 8]), any::<u64>(), any::<bool>()).prop_map(|(l, seed, apbc)| {
        let boundary = if apbc { Boundary::Antiperiodic } else { Boundary::Periodic };
        (LatticeSpec::half_filled(l, boundary).unwrap(), seed)
    })
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn vec_diff(a: &FockVector, b: &FockVector) -> f64 {
    (&a.amplitudes - &b.amplitudes).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn scaled_fock(basis: &FockBasis, state: &SlaterState) -> FockVector {
    let mut v = slater_to_fock(basis, state).unwrap();
    v.amplitudes *= C64::new(state.log_scale().exp(), 0.0);
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, rng_seed: RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]

    #[test]
    fn overlap_matches_inner_product((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, n) = (spec.sites(), spec.particles());
        let psi = SlaterState::general(random_orbitals(&mut rng, l, n));
        let phi = SlaterState::general(random_orbitals(&mut rng, l, n));
        let basis = FockBasis::new(l, n).unwrap();
        let expect = slater_to_fock(&basis, &psi).unwrap().inner(&slater_to_fock(&basis, &phi).unwrap());
        let got = overlap(&psi, &phi).unwrap();
        prop_assert!((got - expect).norm() <= TOL * (1.0 + expect.norm()), "{got} vs {expect}");
    }

    #[test]
    fn one_and_two_body_match((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, n) = (spec.sites(), spec.particles());
        let psi = SlaterState::general(random_orbitals(&mut rng, l, n));
        let phi = SlaterState::general(random_orbitals(&mut rng, l, n));
        let basis = FockBasis::new(l, n).unwrap();
        let bra = slater_to_fock(&basis, &psi).unwrap();
        let ket = slater_to_fock(&basis, &phi).unwrap();
        let norm = bra.inner(&ket);
        let g = transition_density(&psi, &phi).unwrap();
        for x in 0..l {
            for xp in 0..l {
                let expect = one_body(&basis, &bra, &ket, x, xp).unwrap() / norm;
                prop_assert!((g[(xp, x)] - expect).norm() < TOL * (1.0 + expect.norm()));
            }
        }
        for _ in 0..12 {
            let (x, y, yp, xp) = (rng.gen_range(0..l), rng.gen_range(0..l), rng.gen_range(0..l), rng.gen_range(0..l));
            let expect = two_body(&basis, &bra, &ket, x, y, yp, xp).unwrap() / norm;
            let got = wick(&g, x, y, yp, xp);
            prop_assert!((got - expect).norm() < TOL * (1.0 + expect.norm()), "{got} vs {expect}");
            let direct = two_body_expectation(&psi, &phi, x, y, yp, xp).unwrap();
            prop_assert!((direct - got).norm() < 1e-12 * (1.0 + got.norm()));
        }
    }

    #[test]
    fn real_time_layers_match((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, n) = (spec.sites(), spec.particles());
        let basis = FockBasis::new(l, n).unwrap();
        let q = random_orbitals(&mut rng, l, n).qr().q();
        let mut state = SlaterState::orthonormal(q);
        let mut vec = slater_to_fock(&basis, &state).unwrap();
        for step in 0..4 {
            let (which, h) = if step % 2 == 0 { (BondSet::V2, build_v2(&spec)) } else { (BondSet::V1, build_v1(&spec)) };
            let theta = rng.gen_range(-2.0..2.0);
            state = apply_bond_layer(&state, which, theta, Evolution::RealTime, &spec).unwrap();
            vec = fock_evolve(&basis, &vec, &h, C64::new(0.0, theta)).unwrap();
        }
        let got = slater_to_fock(&basis, &state).unwrap();
        prop_assert!(vec_diff(&got, &vec) < TOL);
    }

    #[test]
    fn imaginary_time_layers_match((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, n) = (spec.sites(), spec.particles());
        let basis = FockBasis::new(l, n).unwrap();
        let q = random_orbitals(&mut rng, l, n).qr().q();
        let mut state = SlaterState::orthonormal(q);
        let mut vec = slater_to_fock(&basis, &state).unwrap();
        for step in 0..4 {
            let (which, h) = if step % 2 == 0 { (BondSet::V2, build_v2(&spec)) } else { (BondSet::V1, build_v1(&spec)) };
            let tau = rng.gen_range(0.0..1.0);
            state = apply_bond_layer(&state, which, tau, Evolution::ImaginaryTime, &spec).unwrap();
            vec = fock_evolve(&basis, &vec, &h, C64::new(tau, 0.0)).unwrap();
        }
        let got = scaled_fock(&basis, &state);
        let scale = vec.norm();
        prop_assert!(vec_diff(&got, &vec) < TOL * scale);
        let t = build_hamiltonian(&spec);
        let e = energy_expectation(&state, &t).unwrap();
        prop_assert!((e - fock_energy(&basis, &vec, &t).unwrap()).abs() < TOL);
    }

    #[test]
    fn circuits_match_sequential_fock_evolution((spec, seed) in half_filled(), depth in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = FockBasis::new(spec.sites(), spec.particles()).unwrap();
        let (v1, v2) = (build_v1(&spec), build_v2(&spec));
        let pairs: Vec<(f64, f64)> = (0..depth).map(|_| (rng.gen_range(0.0..1.5), rng.gen_range(0.0..1.5))).collect();
        let start = slater_to_fock(&basis, &initial_state(&spec).unwrap()).unwrap();

        let real = build_state(&spec, &DqapParams::from_pairs(pairs.clone())).unwrap();
        let mut vec = start.clone();
        for &(a, b) in &pairs {
            vec = fock_evolve(&basis, &vec, &v2, C64::new(0.0, b)).unwrap();
            vec = fock_evolve(&basis, &vec, &v1, C64::new(0.0, a)).unwrap();
        }
        prop_assert!(vec_diff(&slater_to_fock(&basis, &real).unwrap(), &vec) < TOL);

        let imag = build_state(&spec, &ImagParams::from_pairs(pairs.clone())).unwrap();
        let mut vec = start;
        for &(a, b) in &pairs {
            vec = fock_evolve(&basis, &vec, &v2, C64::new(b, 0.0)).unwrap();
            vec = fock_evolve(&basis, &vec, &v1, C64::new(a, 0.0)).unwrap();
        }
        prop_assert!(vec_diff(&scaled_fock(&basis, &imag), &vec) < TOL * vec.norm());
    }

    #[test]
    fn entropy_and_mutual_information_match((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, n) = (spec.sites(), spec.particles());
        let basis = FockBasis::new(l, n).unwrap();
        let state = SlaterState::orthonormal(random_orbitals(&mut rng, l, n).qr().q());
        let vec = slater_to_fock(&basis, &state).unwrap();
        let len = rng.gen_range(1..l);
        let mut sites: Vec<usize> = (0..l).collect();
        for i in (1..l).rev() {
            sites.swap(i, rng.gen_range(0..=i));
        }
        sites.truncate(len);
        sites.sort_unstable();
        let a = Subsystem::new(sites.clone(), l).unwrap();
        let got = entanglement_entropy(&state, &a).unwrap();
        let expect = fock_entropy(&basis, &vec, &sites).unwrap();
        prop_assert!((got - expect).abs() < TOL, "{got} vs {expect}");

        let (x, xp) = (sites[0], (sites[0] + 1 + rng.gen_range(0..l - 1)) % l);
        let mi = fock_entropy(&basis, &vec, &[x]).unwrap() + fock_entropy(&basis, &vec, &[xp]).unwrap()
            - fock_entropy(&basis, &vec, &[x.min(xp), x.max(xp)]).unwrap();
        prop_assert!((mutual_information(&state, x, xp).unwrap() - mi).abs() < TOL);
    }

    #[test]
    fn reduced_density_matrix_is_gaussian((spec, seed) in instance()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (l, n) = (spec.sites(), spec.particles());
        let basis = FockBasis::new(l, n).unwrap();
        let state = SlaterState::orthonormal(random_orbitals(&mut rng, l, n).qr().q());
        let vec = slater_to_fock(&basis, &state).unwrap();
        let sites: Vec<usize> = (0..l / 2).collect();
        let d = fock_correlation(&basis, &vec, &sites).unwrap();
        let p = state.projector().unwrap();
        let d_slater = CMatrix::from_fn(sites.len(), sites.len(), |i, j| p[(sites[j], sites[i])]);
        prop_assert!(max_diff(&d, &d_slater) < TOL);
        let rho = fock_reduced_dm(&basis, &vec, &sites).unwrap();
        prop_assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < TOL);
        prop_assert!(max_diff(&rho, &rho.adjoint()) < TOL);
    }

    #[test]
    fn gradients_match_central_differences((spec, seed) in half_filled(), depth in 1usize..4, imaginary in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = build_hamiltonian(&spec);
        let flat: Vec<f64> = (0..2 * depth).map(|_| rng.gen_range(0.0..1.2)).collect();
        let h = 1e-5;
        let check = |grad: &[f64], energy: &dyn Fn(&[f64]) -> f64| -> std::result::Result<(), TestCaseError> {
            for k in 0..flat.len() {
                let mut up = flat.clone();
                let mut dn = flat.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (energy(&up) - energy(&dn)) / (2.0 * h);
                prop_assert!((fd - grad[k]).abs() < 1e-7, "k={} fd={} analytic={}", k, fd, grad[k]);
            }
            Ok(())
        };
        if imaginary {
            let p = ImagParams::from_flat(&flat).unwrap();
            let (_, grad) = energy_gradient(&spec, &p, &t).unwrap();
            let energy = |x: &[f64]| energy_expectation(&build_state(&spec, &ImagParams::from_flat(x).unwrap()).unwrap(), &t).unwrap();
            check(&grad, &energy)?;
        } else {
            let p = DqapParams::from_flat(&flat).unwrap();
            let (_, grad) = energy_gradient(&spec, &p, &t).unwrap();
            let energy = |x: &[f64]| energy_expectation(&build_state(&spec, &DqapParams::from_flat(x).unwrap()).unwrap(), &t).unwrap();
            check(&grad, &energy)?;
        }
    }

    #[test]
    fn long_imaginary_steps_match((spec, seed) in half_filled(), depth in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = FockBasis::new(spec.sites(), spec.particles()).unwrap();
        let (v1, v2) = (build_v1(&spec), build_v2(&spec));
        let t = build_hamiltonian(&spec);
        let flat: Vec<f64> = (0..2 * depth).map(|_| rng.gen_range(1.0..4.0)).collect();
        let params = ImagParams::from_flat(&flat).unwrap();
        let state = build_state(&spec, &params).unwrap();
        let mut vec = slater_to_fock(&basis, &initial_state(&spec).unwrap()).unwrap();
        for &(a, b) in &params.pairs() {
            vec = fock_evolve(&basis, &vec, &v2, C64::new(b, 0.0)).unwrap();
            vec = fock_evolve(&basis, &vec, &v1, C64::new(a, 0.0)).unwrap();
        }
        let got = scaled_fock(&basis, &state);
        prop_assert!(vec_diff(&got, &vec) < TOL * vec.norm(), "{:e}", vec_diff(&got, &vec) / vec.norm());
        let e = energy_expectation(&state, &t).unwrap();
        prop_assert!((e - fock_energy(&basis, &vec, &t).unwrap()).abs() < TOL);

        let (_, grad) = energy_gradient(&spec, &params, &t).unwrap();
        let energy = |x: &[f64]| energy_expectation(&build_state(&spec, &ImagParams::from_flat(x).unwrap()).unwrap(), &t).unwrap();
        let h = 1e-5;
        for k in 0..flat.len() {
            let (mut up, mut dn) = (flat.clone(), flat.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (energy(&up) - energy(&dn)) / (2.0 * h);
            prop_assert!((fd - grad[k]).abs() < 1e-7, "k={} fd={} analytic={}", k, fd, grad[k]);
        }
    }
}
