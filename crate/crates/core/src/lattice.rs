//! Chain definition, static on-site disorder and the single-excitation
//! Hamiltonian.
//!
//! With one excitation on an `N`-site chain the dynamics is confined to the
//! `N`-dimensional sector spanned by `|j⟩` (site `j` up, all others down).
//! In that sector the Hamiltonian is a real symmetric tridiagonal matrix
//!
//! ```text
//! H|j⟩ = E_j |j⟩ + g |j−1⟩ + g |j+1⟩
//! ```
//!
//! with hard-wall (open) ends.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Static problem definition. Rates are in units of energy with `ħ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    /// Coherent nearest-neighbour coupling.
    pub g: f64,
    /// Standard deviation of the on-site energies.
    pub delta: f64,
    /// On-site dephasing rate.
    pub gamma: f64,
    /// Incoherent hopping rate per directed neighbour pair.
    pub big_gamma: f64,
    /// Site of the initial excitation; `None` means the centre site.
    #[serde(default)]
    pub initial_site: Option<usize>,
}

impl ChainSpec {
    /// A clean, noiseless chain with the excitation in the centre.
    pub fn new(n_sites: usize, g: f64) -> Self {
        Self {
            n_sites,
            g,
            delta: 0.0,
            gamma: 0.0,
            big_gamma: 0.0,
            initial_site: None,
        }
    }

    pub fn with_disorder(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_dephasing(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_hopping(mut self, big_gamma: f64) -> Self {
        self.big_gamma = big_gamma;
        self
    }

    pub fn with_initial_site(mut self, site: usize) -> Self {
        self.initial_site = Some(site);
        self
    }

    /// `(N − 1) / 2`, i.e. site 100 of 201 and site 0 of 2.
    pub fn center_site(&self) -> usize {
        (self.n_sites.saturating_sub(1)) / 2
    }

    pub fn start_site(&self) -> usize {
        self.initial_site.unwrap_or_else(|| self.center_site())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_sites < 2 {
            return bad(format!("need at least 2 sites, got {}", self.n_sites));
        }
        if !(self.g > 0.0) || !self.g.is_finite() {
            return bad(format!("coupling g must be positive, got {}", self.g));
        }
        for (name, value) in [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("big_gamma", self.big_gamma),
        ] {
            if !(value >= 0.0) || !value.is_finite() {
                return bad(format!("{name} must be non-negative, got {value}"));
            }
        }
        if self.start_site() >= self.n_sites {
            return bad(format!(
                "initial site {} outside chain of {} sites",
                self.start_site(),
                self.n_sites
            ));
        }
        Ok(())
    }
}

/// One sample of the static on-site energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub energies: Vec<f64>,
    pub seed: u64,
}

impl DisorderRealization {
    /// Energies all zero; used for clean chains.
    pub fn clean(n_sites: usize) -> Self {
        Self {
            energies: vec![0.0; n_sites],
            seed: 0,
        }
    }

    /// A copy with a constant added to every energy.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            energies: self.energies.iter().map(|e| e + offset).collect(),
            seed: self.seed,
        }
    }
}

/// Draws `E_j = Δ·z_j` with `z_j` i.i.d. standard normal.
///
/// The same `(spec, seed)` always produces the same energies, and chains that
/// differ only in `Δ` share the underlying `z_j`.
pub fn sample_disorder(spec: &ChainSpec, seed: u64) -> Result<DisorderRealization> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let energies = (0..spec.n_sites)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            spec.delta * z
        })
        .collect();
    Ok(DisorderRealization { energies, seed })
}

/// Real symmetric tridiagonal Hamiltonian of the single-excitation sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianMatrix {
    pub diagonal: Vec<f64>,
    pub off_diagonal: Vec<f64>,
}

impl HamiltonianMatrix {
    pub fn from_parts(diagonal: Vec<f64>, off_diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 sites, got {}",
                diagonal.len()
            )));
        }
        if off_diagonal.len() + 1 != diagonal.len() {
            return Err(Error::DimensionMismatch {
                expected: diagonal.len() - 1,
                found: off_diagonal.len(),
            });
        }
        Ok(Self {
            diagonal,
            off_diagonal,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.diagonal.len()
    }

    /// Element `(j, k)`.
    pub fn element(&self, j: usize, k: usize) -> f64 {
        match j.abs_diff(k) {
            0 => self.diagonal[j],
            1 => self.off_diagonal[j.min(k)],
            _ => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_sites();
        DMatrix::from_fn(n, n, |j, k| self.element(j, k))
    }

    pub fn to_dense_complex(&self) -> DMatrix<Complex64> {
        self.to_dense().map(|x| Complex64::new(x, 0.0))
    }

    /// `out = H·psi`.
    pub fn apply(&self, psi: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_sites();
        debug_assert_eq!(psi.len(), n);
        debug_assert_eq!(out.len(), n);
        for j in 0..n {
            let mut acc = psi[j] * self.diagonal[j];
            if j > 0 {
                acc += psi[j - 1] * self.off_diagonal[j - 1];
            }
            if j + 1 < n {
                acc += psi[j + 1] * self.off_diagonal[j];
            }
            out[j] = acc;
        }
    }

    /// Ascending eigenvalues from dense diagonalisation.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self.to_dense().symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

pub fn build_hamiltonian(
    spec: &ChainSpec,
    disorder: &DisorderRealization,
) -> Result<HamiltonianMatrix> {
    spec.validate()?;
    if disorder.energies.len() != spec.n_sites {
        return Err(Error::DimensionMismatch {
            expected: spec.n_sites,
            found: disorder.energies.len(),
        });
    }
    HamiltonianMatrix::from_parts(disorder.energies.clone(), vec![spec.g; spec.n_sites - 1])
}

/// Instantaneous squared Rabi amplitude between sites `j` and `k` whose
/// energies are shifted by the noise values `eps_j`, `eps_k`:
/// `g² / (g² + (E_j − E_k + ε_j − ε_k)²)`.
pub fn rabi_amplitude_sq(g: f64, e_j: f64, e_k: f64, eps_j: f64, eps_k: f64) -> f64 {
    let detuning = e_j - e_k + eps_j - eps_k;
    let g2 = g * g;
    g2 / (g2 + detuning * detuning)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> ChainSpec {
        ChainSpec::new(n, 1.0)
    }

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(spec(1).validate().is_err());
        assert!(ChainSpec::new(5, 0.0).validate().is_err());
        assert!(spec(5).with_disorder(-1.0).validate().is_err());
        assert!(spec(5).with_dephasing(f64::NAN).validate().is_err());
        assert!(spec(5).with_initial_site(5).validate().is_err());
        assert!(spec(5).with_initial_site(4).validate().is_ok());
    }

    #[test]
    fn centre_site_convention() {
        assert_eq!(spec(201).start_site(), 100);
        assert_eq!(spec(81).start_site(), 40);
        assert_eq!(spec(2).start_site(), 0);
    }

    #[test]
    fn zero_width_disorder_is_exactly_zero() {
        for seed in [0, 1, 0xdead_beef] {
            let d = sample_disorder(&spec(50), seed).unwrap();
            assert!(d.energies.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn disorder_is_deterministic_and_seed_dependent() {
        let s = spec(100).with_disorder(1.0);
        let a = sample_disorder(&s, 7).unwrap();
        let b = sample_disorder(&s, 7).unwrap();
        let c = sample_disorder(&s, 8).unwrap();
        assert_eq!(a.energies.len(), 100);
        assert!(a.energies.iter().zip(&b.energies).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a.energies, c.energies);
    }

    #[test]
    fn disorder_statistics_large_chain() {
        let n = 10_000;
        let d = sample_disorder(&spec(n).with_disorder(1.0), 2024).unwrap();
        let mean = d.energies.iter().sum::<f64>() / n as f64;
        let var = d.energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn disorder_width_scales_shared_normals() {
        let a = sample_disorder(&spec(20).with_disorder(1.0), 3).unwrap();
        let b = sample_disorder(&spec(20).with_disorder(10.0), 3).unwrap();
        for (x, y) in a.energies.iter().zip(&b.energies) {
            assert!((10.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn two_site_hamiltonian() {
        let h = build_hamiltonian(&spec(2), &DisorderRealization::clean(2)).unwrap();
        let dense = h.to_dense();
        assert_eq!(dense, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn hamiltonian_dimension_mismatch() {
        let err = build_hamiltonian(&spec(4), &DisorderRealization::clean(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 4, found: 3 });
    }

    #[test]
    fn three_site_eigenvalues_match_characteristic_polynomial() {
        // Oracle: roots of det(H − λ) for the 3×3 tridiagonal matrix,
        // found by bisection on sign changes of the cubic.
        let (a, b, c, g) = (0.3, -1.1, 0.7, 0.8);
        let h = HamiltonianMatrix::from_parts(vec![a, b, c], vec![g, g]).unwrap();
        let det = |l: f64| (a - l) * ((b - l) * (c - l) - g * g) - g * g * (c - l);
        let mut roots = Vec::new();
        let (lo, hi, steps) = (-5.0, 5.0, 10_000);
        for i in 0..steps {
            let x0 = lo + (hi - lo) * i as f64 / steps as f64;
            let x1 = lo + (hi - lo) * (i + 1) as f64 / steps as f64;
            if det(x0).signum() != det(x1).signum() {
                let (mut l, mut r) = (x0, x1);
                for _ in 0..200 {
                    let m = 0.5 * (l + r);
                    if det(l).signum() == det(m).signum() {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                roots.push(0.5 * (l + r));
            }
        }
        assert_eq!(roots.len(), 3);
        for (x, y) in h.eigenvalues().iter().zip(&roots) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn clean_chain_spectrum_inside_band() {
        let h = build_hamiltonian(&spec(201), &DisorderRealization::clean(201)).unwrap();
        let values = h.eigenvalues();
        assert!(values.iter().all(|&e| e.abs() <= 2.0 + 1e-12));
        // Open chain: E_k = 2g cos(kπ/(N+1)).
        for (i, e) in values.iter().enumerate() {
            let k = 201 - i;
            let exact = 2.0 * (k as f64 * std::f64::consts::PI / 202.0).cos();
            assert!((e - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_matches_dense_product() {
        let h = HamiltonianMatrix::from_parts(vec![0.1, 0.2, -0.3, 0.4], vec![1.0, 0.5, 2.0]).unwrap();
        let psi: Vec<Complex64> = (0..4).map(|j| Complex64::new(j as f64, 1.0 - j as f64)).collect();
        let mut out = vec![Complex64::default(); 4];
        h.apply(&psi, &mut out);
        let dense = h.to_dense_complex() * nalgebra::DVector::from_vec(psi);
        for (x, y) in out.iter().zip(dense.iter()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn rabi_amplitude_examples() {
        assert_eq!(rabi_amplitude_sq(1.0, 0.0, 0.0, 0.0, 0.0), 1.0);
        assert_eq!(rabi_amplitude_sq(1.0, 1.0, 0.0, 0.0, 0.0), 0.5);
        assert!((rabi_amplitude_sq(1.0, 10.0, 0.0, 0.0, 0.0) - 1.0 / 101.0).abs() < 1e-15);
        // Noise shifts enter only through the total detuning.
        assert_eq!(rabi_amplitude_sq(1.0, 10.0, 0.0, -10.0, 0.0), 1.0);
        assert!((rabi_amplitude_sq(1.0, 10.0, 0.0, 10.0, 0.0) - 1.0 / 401.0).abs() < 1e-15);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hamiltonian_is_symmetric_tridiagonal(
                n in 2usize..40, delta in 0.0f64..10.0, seed in any::<u64>()
            ) {
                let spec = ChainSpec::new(n, 1.0).with_disorder(delta);
                let d = sample_disorder(&spec, seed).unwrap();
                let h = build_hamiltonian(&spec, &d).unwrap().to_dense();
                for j in 0..n {
                    for k in 0..n {
                        prop_assert_eq!(h[(j, k)], h[(k, j)]);
                        if j.abs_diff(k) > 1 {
                            prop_assert_eq!(h[(j, k)], 0.0);
                        }
                    }
                }
            }

            #[test]
            fn rabi_amplitude_decreases_with_detuning(
                g in 0.01f64..10.0, d1 in 0.0f64..50.0, extra in 1e-6f64..50.0
            ) {
                let a1 = rabi_amplitude_sq(g, d1, 0.0, 0.0, 0.0);
                let a2 = rabi_amplitude_sq(g, d1 + extra, 0.0, 0.0, 0.0);
                prop_assert!(a2 < a1);
                prop_assert!(a1 <= 1.0 && a1 > 0.0);
                prop_assert_eq!(rabi_amplitude_sq(g, -d1, 0.0, 0.0, 0.0), a1);
                if d1 > 0.0 {
                    prop_assert!(a1 < 1.0);
                }
            }
        }
    }
}
