use super::oracle::{dense_superoperator, propagate_dense, unvectorize, vectorize, FullSpaceLindblad};
use super::*;
use crate::lattice::{build_hamiltonian, sample_disorder, DisorderRealization};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn chain(n: usize, g: f64, energies: &[f64]) -> HamiltonianMatrix {
    HamiltonianMatrix::from_parts(energies.to_vec(), vec![g; n - 1]).unwrap()
}

fn final_state(
    rho0: &DensityMatrix,
    h: &HamiltonianMatrix,
    model: &NoiseModel,
    t: f64,
    dt: f64,
    options: &EvolveOptions,
) -> DensityMatrix {
    let grid = TimeGrid::new(t, dt, vec![t]).unwrap();
    let run = evolve_density_matrix(rho0, h, model, &grid, options).unwrap();
    run.states.last().unwrap().clone()
}

/// Deterministic pseudo-random density matrix `AA†/tr(AA†)`.
fn mixed_state(n: usize, salt: u64) -> DensityMatrix {
    let mut x = salt.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let mut next = || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let a = DMatrix::from_fn(n, n, |_, _| c(next(), next()));
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    DensityMatrix::from_matrix(&(rho / tr)).unwrap()
}

#[test]
fn two_site_coherence_decays_at_four_gamma() {
    // g = 0: populations frozen, coherence ρ01 ∝ e^{-4γt} with a phase from ΔE.
    let gamma = 0.3;
    let h = chain(2, 0.0, &[0.0, 0.7]);
    let psi = PureState::from_amplitudes(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
    let rho0 = DensityMatrix::from_pure(&psi);
    let t = 2.0;
    let rho = final_state(&rho0, &h, &NoiseModel::dephasing(gamma), t, 1e-3, &EvolveOptions::exact());
    let expected = 0.5 * (-4.0 * gamma * t).exp();
    assert!((rho.get(0, 1).norm() - expected).abs() < 1e-10);
    let phase = rho.get(0, 1).arg();
    assert!((phase - 0.7 * t).abs() < 1e-9, "phase {phase}");
    assert!((rho.get(0, 0).re - 0.5).abs() < 1e-12);
}

#[test]
fn noiseless_generator_is_commutator() {
    let h = chain(5, 1.0, &[0.3, -0.2, 0.5, 0.0, 1.1]);
    let rho = mixed_state(5, 7);
    let got = liouvillian_apply(&h, &NoiseModel::none(), &rho).unwrap();
    let hd = h.to_dense_complex();
    let r = rho.to_matrix();
    let expected = (&hd * &r - &r * &hd) * c(0.0, -1.0);
    assert!((got - expected).camax() < 1e-13);
}

#[test]
fn generator_matches_dense_superoperator() {
    let h = chain(6, 1.0, &[0.1, -0.4, 0.9, 0.0, -1.3, 0.6]);
    for (salt, model) in [
        NoiseModel::dephasing(0.7),
        NoiseModel::hopping(0.4),
        NoiseModel::from_rates(0.2, 1.5),
    ]
    .into_iter()
    .enumerate()
    {
        let rho = mixed_state(6, salt as u64 + 1);
        let s = dense_superoperator(&h, &model).unwrap();
        let expected = unvectorize(&(&s * vectorize(&rho)), 6);
        let got = DensityMatrix::from_matrix(&liouvillian_apply(&h, &model, &rho).unwrap()).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-12, "{model:?}");
    }
}

#[test]
fn noiseless_dimer_superoperator_matches_generator() {
    let h = chain(2, 0.8, &[0.4, -0.3]);
    let s = dense_superoperator(&h, &NoiseModel::none()).unwrap();
    for salt in 1..=3 {
        let rho = mixed_state(2, salt);
        let expected = unvectorize(&(&s * vectorize(&rho)), 2);
        let got = DensityMatrix::from_matrix(&liouvillian_apply(&h, &NoiseModel::none(), &rho).unwrap()).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-12);
    }
}

#[test]
fn hopping_superoperator_restricted_to_populations_is_birth_death() {
    let big_gamma = 0.6;
    let h = chain(3, 0.0, &[0.0; 3]);
    let s = dense_superoperator(&h, &NoiseModel::hopping(big_gamma)).unwrap();
    let q = [
        [-1.0, 1.0, 0.0],
        [1.0, -2.0, 1.0],
        [0.0, 1.0, -1.0],
    ];
    for j in 0..3 {
        for k in 0..3 {
            let entry = s[(j * 4, k * 4)];
            assert!((entry - c(big_gamma * q[j][k], 0.0)).norm() < 1e-14, "({j},{k})");
        }
    }
}

#[test]
fn decohered_diagonal_is_stationary_under_dephasing() {
    let h = chain(5, 0.0, &[0.2, -0.7, 1.0, 0.0, 0.4]);
    let p = [0.1, 0.3, 0.25, 0.15, 0.2];
    let rho = DensityMatrix::from_matrix(&DMatrix::from_fn(5, 5, |m, k| {
        if m == k {
            c(p[m], 0.0)
        } else {
            c(0.0, 0.0)
        }
    }))
    .unwrap();
    let d = liouvillian_apply(&h, &NoiseModel::dephasing(1.3), &rho).unwrap();
    assert!(d.camax() < 1e-15);
}

#[test]
fn dense_dephasing_spectrum_contains_minus_four_gamma() {
    // Clean g = 0: coherences are eigenvectors with eigenvalue −4γ + i(E_k − E_m).
    let gamma = 0.25;
    let h = chain(3, 0.0, &[0.0, 0.0, 0.0]);
    let s = dense_superoperator(&h, &NoiseModel::dephasing(gamma)).unwrap();
    let mut rho = DMatrix::zeros(3, 3);
    rho[(0, 2)] = c(1.0, 0.0);
    let v = vectorize(&DensityMatrix::from_matrix(&rho).unwrap());
    let sv = &s * &v;
    assert!((sv - v * c(-4.0 * gamma, 0.0)).camax() < 1e-14);
}

#[test]
fn hopping_without_coupling_is_rate_equation() {
    // dp/dt = Γ (p_{j−1} + p_{j+1} − deg(j) p_j), integrated here by expm of
    // the classical generator.
    let n = 5;
    let big_gamma = 0.8;
    let h = chain(n, 0.0, &[0.0; 5]);
    let mut w = DMatrix::<f64>::zeros(n, n);
    for j in 0..n - 1 {
        w[(j + 1, j)] += big_gamma;
        w[(j, j + 1)] += big_gamma;
        w[(j, j)] -= big_gamma;
        w[(j + 1, j + 1)] -= big_gamma;
    }
    let t = 1.7;
    let mut p0 = nalgebra::DVector::zeros(n);
    p0[2] = 1.0;
    let expected = (w * t).exp() * p0;
    let rho0 = DensityMatrix::localized(n, 2).unwrap();
    let rho = final_state(&rho0, &h, &NoiseModel::hopping(big_gamma), t, 1e-3, &EvolveOptions::exact());
    for (j, p) in rho.diagonal().iter().enumerate() {
        assert!((p - expected[j]).abs() < 1e-11, "site {j}");
    }
    assert!(rho.hermiticity_error() < 1e-15);
}

#[test]
fn unitary_two_site_oscillation() {
    // p_1(t) = sin²(gt) on a resonant dimer.
    let h = chain(2, 1.0, &[0.0, 0.0]);
    let rho0 = DensityMatrix::localized(2, 0).unwrap();
    let rho = final_state(&rho0, &h, &NoiseModel::none(), 5.0, 1e-3, &EvolveOptions::exact());
    assert!((rho.get(1, 1).re - 5.0f64.sin().powi(2)).abs() < 1e-10);
}

#[test]
fn unitary_chain_matches_expm() {
    let h = chain(7, 1.0, &[0.2, -0.5, 0.1, 0.0, 0.8, -0.3, 0.4]);
    let rho0 = DensityMatrix::localized(7, 3).unwrap();
    let t = 5.0;
    let u = (h.to_dense_complex() * c(0.0, -t)).exp();
    let expected = DensityMatrix::from_matrix(&(&u * rho0.to_matrix() * u.adjoint())).unwrap();
    let rho = final_state(&rho0, &h, &NoiseModel::none(), t, 1e-3, &EvolveOptions::exact());
    assert!(rho.max_abs_diff(&expected) < 1e-9);
}

#[test]
fn dephased_dimer_matches_expm() {
    let h = chain(2, 1.0, &[0.0, 0.0]);
    let model = NoiseModel::dephasing(1.0);
    let s = dense_superoperator(&h, &model).unwrap();
    let rho0 = DensityMatrix::localized(2, 0).unwrap();
    let grid = TimeGrid::uniform(5.0, 5e-4, 0.5).unwrap();
    let run = evolve_density_matrix(&rho0, &h, &model, &grid, &EvolveOptions::exact()).unwrap();
    for (t, rho) in run.times.iter().zip(&run.states) {
        let expected = propagate_dense(&s, &rho0, *t);
        assert!(rho.max_abs_diff(&expected) < 1e-8, "t = {t}");
    }
}

#[test]
fn trace_drift_is_tiny() {
    let spec = ChainSpec::new(41, 1.0).with_disorder(1.0).with_dephasing(0.5);
    let h = build_hamiltonian(&spec, &sample_disorder(&spec, 3).unwrap()).unwrap();
    let rho0 = DensityMatrix::localized(41, 20).unwrap();
    let grid = TimeGrid::uniform(10.0, 0.01, 1.0).unwrap();
    let run = evolve_density_matrix(&rho0, &h, &NoiseModel::dephasing(0.5), &grid, &EvolveOptions::default())
        .unwrap();
    assert!(run.stats.max_trace_drift_rate < 1e-10, "{:?}", run.stats);
    assert!(run.stats.min_eigenvalue > -POSITIVITY_TOL);
}

#[test]
fn populations_frozen_without_coupling() {
    let h = chain(4, 0.0, &[0.5, -1.0, 2.0, 0.0]);
    let rho0 = mixed_state(4, 11);
    let rho = final_state(&rho0, &h, &NoiseModel::dephasing(2.0), 3.0, 1e-3, &EvolveOptions::exact());
    for j in 0..4 {
        assert!((rho.get(j, j) - rho0.get(j, j)).norm() < 1e-13);
    }
    // Coherences are gone after 4γt = 24.
    for m in 0..4 {
        for k in 0..4 {
            if m != k {
                assert!(rho.get(m, k).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn hopping_relaxes_to_uniform_mixture() {
    let h = chain(4, 1.0, &[0.3, -0.2, 0.1, 0.0]);
    let rho0 = DensityMatrix::localized(4, 0).unwrap();
    let rho = final_state(&rho0, &h, &NoiseModel::hopping(1.0), 40.0, 5e-3, &EvolveOptions::exact());
    for m in 0..4 {
        for k in 0..4 {
            let target = if m == k { 0.25 } else { 0.0 };
            assert!((rho.get(m, k).re - target).abs() < 1e-6);
            assert!(rho.get(m, k).im.abs() < 1e-6);
        }
    }
}

#[test]
fn halving_step_changes_little() {
    let spec = ChainSpec::new(31, 1.0).with_disorder(0.5).with_dephasing(0.2);
    let h = build_hamiltonian(&spec, &sample_disorder(&spec, 5).unwrap()).unwrap();
    let rho0 = DensityMatrix::localized(31, 15).unwrap();
    let model = NoiseModel::dephasing(0.2);
    let coarse = final_state(&rho0, &h, &model, 20.0, 0.01, &EvolveOptions::exact());
    let fine = final_state(&rho0, &h, &model, 20.0, 0.005, &EvolveOptions::exact());
    let diff = coarse
        .diagonal()
        .iter()
        .zip(fine.diagonal())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn active_region_matches_full_integration() {
    let spec = ChainSpec::new(81, 1.0).with_disorder(1.0).with_hopping(0.3);
    let h = build_hamiltonian(&spec, &sample_disorder(&spec, 9).unwrap()).unwrap();
    let rho0 = DensityMatrix::localized(81, 40).unwrap();
    let model = NoiseModel::hopping(0.3);
    let exact = final_state(&rho0, &h, &model, 6.0, 0.01, &EvolveOptions::exact());
    let truncated = final_state(&rho0, &h, &model, 6.0, 0.01, &EvolveOptions::default());
    assert!(exact.max_abs_diff(&truncated) < 1e-12);
}

#[test]
fn single_sector_matches_full_spin_space() {
    let h = chain(4, 1.0, &[0.4, -0.6, 0.0, 0.9]);
    for model in [NoiseModel::dephasing(0.5), NoiseModel::hopping(0.7), NoiseModel::from_rates(0.3, 0.4)] {
        let full = FullSpaceLindblad::new(&h, &model).unwrap();
        let rho0 = DensityMatrix::localized(4, 1).unwrap();
        let t = 2.0;
        let evolved = full.propagate(&full.embed(&rho0), t);
        assert!(full.leakage(&evolved) < 1e-12);
        let expected = full.restrict(&evolved);
        let rho = final_state(&rho0, &h, &model, t, 5e-4, &EvolveOptions::exact());
        assert!(rho.max_abs_diff(&expected) < 1e-8, "{model:?}");
    }
}

#[test]
fn uniform_energy_shift_leaves_populations() {
    let spec = ChainSpec::new(21, 1.0).with_disorder(1.0).with_dephasing(0.4);
    let disorder = sample_disorder(&spec, 2).unwrap();
    let model = NoiseModel::dephasing(0.4);
    let rho0 = DensityMatrix::localized(21, 10).unwrap();
    let a = build_hamiltonian(&spec, &disorder).unwrap();
    let b = build_hamiltonian(&spec, &disorder.shifted(3.5)).unwrap();
    let ra = final_state(&rho0, &a, &model, 4.0, 1e-3, &EvolveOptions::exact());
    let rb = final_state(&rho0, &b, &model, 4.0, 1e-3, &EvolveOptions::exact());
    // The shift cancels in the commutator up to rounding.
    assert!(ra.max_abs_diff(&rb) < 1e-9);
}

#[test]
fn rejects_mismatched_sizes() {
    let h = chain(3, 1.0, &[0.0; 3]);
    let rho0 = DensityMatrix::localized(4, 0).unwrap();
    let grid = TimeGrid::uniform(1.0, 0.01, 0.5).unwrap();
    let err = evolve_density_matrix(&rho0, &h, &NoiseModel::none(), &grid, &EvolveOptions::default());
    assert!(matches!(err, Err(Error::DimensionMismatch { expected: 3, found: 4 })));
    assert!(liouvillian_apply(&h, &NoiseModel::none(), &rho0).is_err());
}

#[test]
fn oracles_refuse_large_chains() {
    let h = chain(12, 1.0, &[0.0; 12]);
    assert!(matches!(
        dense_superoperator(&h, &NoiseModel::none()),
        Err(Error::TooLarge { .. })
    ));
    assert!(matches!(
        FullSpaceLindblad::new(&h, &NoiseModel::none()),
        Err(Error::TooLarge { .. })
    ));
}

#[test]
fn noise_model_validation() {
    assert!(NoiseModel::new(NoiseKind::OnsiteDephasing, -1.0, 0.0).is_err());
    assert!(NoiseModel::new(NoiseKind::IncoherentHopping, 0.0, f64::NAN).is_err());
    assert!(NoiseModel::new(NoiseKind::Both, 1.0, 1.0).is_ok());
    let clean = DisorderRealization::clean(3);
    assert_eq!(clean.energies, vec![0.0; 3]);
}

#[test]
fn invariant_checks_catch_bad_states() {
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 0)] = c(1.5, 0.0);
    m[(1, 1)] = c(-0.5, 0.0);
    let rho = DensityMatrix::from_matrix(&m).unwrap();
    assert!(matches!(
        rho.check(0.0, true),
        Err(Error::InvariantViolation { quantity: "positivity", .. })
    ));
    m[(0, 0)] = c(0.9, 0.0);
    m[(1, 1)] = c(0.0, 0.0);
    let rho = DensityMatrix::from_matrix(&m).unwrap();
    assert!(matches!(
        rho.check(0.0, true),
        Err(Error::InvariantViolation { quantity: "trace", .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evolution_preserves_density_matrix(
        energies in proptest::collection::vec(-2.0f64..2.0, 6),
        gamma in 0.0f64..2.0,
        big_gamma in 0.0f64..2.0,
        start in 0usize..6,
    ) {
        let h = chain(6, 1.0, &energies);
        let model = NoiseModel::from_rates(gamma, big_gamma);
        let rho0 = DensityMatrix::localized(6, start).unwrap();
        let grid = TimeGrid::uniform(3.0, 5e-3, 0.5).unwrap();
        let run = evolve_density_matrix(&rho0, &h, &model, &grid, &EvolveOptions::default()).unwrap();
        prop_assert!(run.stats.max_trace_error < 1e-12);
        prop_assert!(run.stats.max_hermiticity_error < 1e-14);
        prop_assert!(run.stats.min_eigenvalue > -1e-10);
    }

    #[test]
    fn generator_is_trace_free_and_hermitian(
        salt in 1u64..1000,
        gamma in 0.0f64..3.0,
        big_gamma in 0.0f64..3.0,
    ) {
        let h = chain(5, 1.0, &[0.1, 0.7, -0.4, 0.0, 0.3]);
        let rho = mixed_state(5, salt);
        let d = liouvillian_apply(&h, &NoiseModel::from_rates(gamma, big_gamma), &rho).unwrap();
        prop_assert!(d.trace().norm() < 1e-13);
        prop_assert!((&d - d.adjoint()).camax() < 1e-13);
    }
}
