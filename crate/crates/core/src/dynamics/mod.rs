//! Density-matrix evolution for on-site dephasing and incoherent hopping.
//!
//! The generator is
//!
//! ```text
//! dρ/dt = −i[H, ρ] + γ Σ_j D[σz_j]ρ + Γ Σ_{j→k} D[σ⁻_j σ⁺_k]ρ
//! D[A]ρ = AρA† − ½A†Aρ − ½ρA†A
//! ```
//!
//! where the hopping sum runs over both directions of every bond. Only the
//! single-excitation sector is stored; [`oracle`] holds dense cross-checks,
//! including one on the full `2^N` spin space.

mod kernel;
pub mod oracle;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;
use crate::lattice::{ChainSpec, HamiltonianMatrix};
use crate::trajectories::PureState;
use crate::{Error, Result};

use kernel::{Generator, Region, Rk4};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// `N×N` density matrix in the site basis, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|site⟩⟨site|`.
    pub fn localized(n_sites: usize, site: usize) -> Result<Self> {
        if site >= n_sites {
            return Err(Error::InvalidSpec(format!(
                "site {site} outside chain of {n_sites} sites"
            )));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); n_sites * n_sites];
        data[site * n_sites + site] = Complex64::new(1.0, 0.0);
        Ok(Self { n: n_sites, data })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &PureState) -> Self {
        let c = psi.amplitudes();
        let n = c.len();
        let mut data = Vec::with_capacity(n * n);
        for m in 0..n {
            for k in 0..n {
                data.push(c[m] * c[k].conj());
            }
        }
        Self { n, data }
    }

    pub fn from_matrix(matrix: &DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let n = matrix.nrows();
        let data = (0..n * n).map(|idx| matrix[(idx / n, idx % n)]).collect();
        Ok(Self { n, data })
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn get(&self, m: usize, k: usize) -> Complex64 {
        self.data[m * self.n + k]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Populations `ρ_jj`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.get(j, j).re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|j| self.get(j, j)).sum()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in 0..self.n {
            for k in m..self.n {
                worst = worst.max((self.get(m, k) - self.get(k, m).conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_matrix();
        let hermitian = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        hermitian
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Checks Hermiticity, unit trace and (optionally) positivity.
    pub fn check(&self, time: f64, positivity: bool) -> Result<InvariantStats> {
        let mut stats = InvariantStats::default();
        stats.record(self, positivity);
        stats.enforce(time)?;
        Ok(stats)
    }
}

/// Which dissipators are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    OnsiteDephasing,
    IncoherentHopping,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// On-site dephasing rate `γ`.
    pub gamma: f64,
    /// Incoherent hopping rate `Γ` per directed bond.
    pub big_gamma: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self::from_rates(0.0, 0.0)
    }

    pub fn dephasing(gamma: f64) -> Self {
        Self::from_rates(gamma, 0.0)
    }

    pub fn hopping(big_gamma: f64) -> Self {
        Self::from_rates(0.0, big_gamma)
    }

    /// Model whose kind is inferred from which rates are nonzero.
    pub fn from_rates(gamma: f64, big_gamma: f64) -> Self {
        let kind = match (gamma > 0.0, big_gamma > 0.0) {
            (false, false) => NoiseKind::None,
            (true, false) => NoiseKind::OnsiteDephasing,
            (false, true) => NoiseKind::IncoherentHopping,
            (true, true) => NoiseKind::Both,
        };
        Self {
            kind,
            gamma,
            big_gamma,
        }
    }

    pub fn from_spec(spec: &ChainSpec) -> Self {
        Self::from_rates(spec.gamma, spec.big_gamma)
    }

    /// Explicit kind; fails unless it matches the nonzero rates.
    pub fn new(kind: NoiseKind, gamma: f64, big_gamma: f64) -> Result<Self> {
        let model = Self {
            kind,
            gamma,
            big_gamma,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.big_gamma >= 0.0)
            || !self.gamma.is_finite()
            || !self.big_gamma.is_finite()
        {
            return Err(Error::InvalidNoise(format!(
                "rates must be finite and non-negative (gamma = {}, big_gamma = {})",
                self.gamma, self.big_gamma
            )));
        }
        let inferred = Self::from_rates(self.gamma, self.big_gamma).kind;
        if inferred != self.kind {
            return Err(Error::InvalidNoise(format!(
                "kind {:?} inconsistent with rates (gamma = {}, big_gamma = {})",
                self.kind, self.gamma, self.big_gamma
            )));
        }
        Ok(())
    }
}

/// Worst invariant values seen over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantStats {
    pub samples: usize,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    /// `+∞` when positivity was never checked.
    pub min_eigenvalue: f64,
    /// `|trace drift| / t` at the last sample.
    pub max_trace_drift_rate: f64,
}

impl Default for InvariantStats {
    fn default() -> Self {
        Self {
            samples: 0,
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_trace_drift_rate: 0.0,
        }
    }
}

impl InvariantStats {
    fn record(&mut self, rho: &DensityMatrix, positivity: bool) {
        self.samples += 1;
        self.max_trace_error = self.max_trace_error.max((rho.trace() - 1.0).norm());
        self.max_hermiticity_error = self.max_hermiticity_error.max(rho.hermiticity_error());
        if positivity {
            self.min_eigenvalue = self.min_eigenvalue.min(rho.min_eigenvalue());
        }
    }

    fn enforce(&self, time: f64) -> Result<()> {
        let fail = |quantity, value, tolerance| {
            Err(Error::InvariantViolation {
                quantity,
                time,
                value,
                tolerance,
            })
        };
        if !(self.max_trace_error <= TRACE_TOL) {
            return fail("trace", self.max_trace_error, TRACE_TOL);
        }
        if !(self.max_hermiticity_error <= HERMITICITY_TOL) {
            return fail("hermiticity", self.max_hermiticity_error, HERMITICITY_TOL);
        }
        if !(self.min_eigenvalue >= -POSITIVITY_TOL) {
            return fail("positivity", -self.min_eigenvalue, POSITIVITY_TOL);
        }
        Ok(())
    }

    /// Combines the worst values of two runs.
    pub fn merge(&self, other: &Self) -> Self {
        Self {
            samples: self.samples + other.samples,
            max_trace_error: self.max_trace_error.max(other.max_trace_error),
            max_hermiticity_error: self.max_hermiticity_error.max(other.max_hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
            max_trace_drift_rate: self.max_trace_drift_rate.max(other.max_trace_drift_rate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Entries of `ρ` below this magnitude at the edge of the active region
    /// are treated as zero. `0.0` integrates the exact support.
    pub support_tol: f64,
    /// Positivity is checked at every sample for chains up to this size.
    pub positivity_max_sites: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            support_tol: 1e-15,
            positivity_max_sites: 30,
        }
    }
}

impl EvolveOptions {
    pub fn exact() -> Self {
        Self {
            support_tol: 0.0,
            ..Self::default()
        }
    }
}

/// Sampled density matrices of one run.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub stats: InvariantStats,
    pub spec: Option<ChainSpec>,
    pub disorder_seed: Option<u64>,
}

/// `dρ/dt` from the closed-form single-excitation generator.
pub fn liouvillian_apply(
    h: &HamiltonianMatrix,
    model: &NoiseModel,
    rho: &DensityMatrix,
) -> Result<DMatrix<Complex64>> {
    let n = h.n_sites();
    if rho.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.n_sites(),
        });
    }
    model.validate()?;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    Generator::new(h, model).apply(rho.as_slice(), &mut out, &Region::full(n));
    Ok(DMatrix::from_row_slice(n, n, &out))
}

/// Integrates from `rho0` over `grid`, calling `observe` at every sample
/// time. Invariants are enforced at each sample.
pub fn evolve_observed<F>(
    rho0: &DensityMatrix,
    h: &HamiltonianMatrix,
    model: &NoiseModel,
    grid: &TimeGrid,
    options: &EvolveOptions,
    mut observe: F,
) -> Result<InvariantStats>
where
    F: FnMut(f64, &DensityMatrix),
{
    let n = h.n_sites();
    if rho0.n_sites() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho0.n_sites(),
        });
    }
    model.validate()?;
    let positivity = n <= options.positivity_max_sites;

    let mut rho = rho0.clone();
    let region = Region::covering(rho.as_slice(), n)
        .ok_or_else(|| Error::InvalidSpec("initial density matrix is zero".into()))?;
    let mut rk4 = Rk4::new(Generator::new(h, model), region, options.support_tol);

    let mut stats = InvariantStats::default();
    let trace0 = rho.trace();
    let mut sample_at = |t: f64, rho: &DensityMatrix, stats: &mut InvariantStats| -> Result<()> {
        stats.record(rho, positivity);
        if t > 0.0 {
            let drift = (rho.trace() - trace0).norm() / t;
            stats.max_trace_drift_rate = stats.max_trace_drift_rate.max(drift);
        }
        stats.enforce(t)?;
        observe(t, rho);
        Ok(())
    };

    let mut t = 0.0;
    let mut stops = grid.samples().iter().copied().peekable();
    if stops.peek() == Some(&0.0) {
        sample_at(0.0, &rho, &mut stats)?;
        stops.next();
    }
    let final_stop = grid.t_final();
    loop {
        let (stop, is_sample) = match stops.peek() {
            Some(&s) => (s, true),
            None if t < final_stop => (final_stop, false),
            None => break,
        };
        let (next, landed) = grid.next_time(t, stop);
        rk4.step(&mut rho.data, next - t);
        t = next;
        if landed {
            if is_sample {
                sample_at(t, &rho, &mut stats)?;
                stops.next();
            } else {
                break;
            }
        }
    }
    log::trace!("final active region {:?}", rk4.region());
    Ok(stats)
}

/// Integrates and stores the full density matrix at every sample time.
pub fn evolve_density_matrix(
    rho0: &DensityMatrix,
    h: &HamiltonianMatrix,
    model: &NoiseModel,
    grid: &TimeGrid,
    options: &EvolveOptions,
) -> Result<DensityTrajectory> {
    let mut times = Vec::with_capacity(grid.samples().len());
    let mut states = Vec::with_capacity(grid.samples().len());
    let stats = evolve_observed(rho0, h, model, grid, options, |t, rho| {
        times.push(t);
        states.push(rho.clone());
    })?;
    Ok(DensityTrajectory {
        times,
        states,
        stats,
        spec: None,
        disorder_seed: None,
    })
}

#[cfg(test)]
mod tests;
