//! Brute-force references for the single-excitation generator.
//!
//! [`dense_superoperator`] assembles the vectorised Lindbladian from the
//! generic dissipator formula with explicit jump-operator matrices, so it
//! shares nothing with the element-wise rules of the main integrator.
//! [`FullSpaceLindblad`] goes further and works on all `2^N` spin
//! configurations, with operators built from tensor products of single-site
//! Pauli matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::lattice::HamiltonianMatrix;
use crate::{Error, Result};

use super::{DensityMatrix, NoiseModel};

pub const DENSE_LIMIT: usize = 8;
pub const FULL_SPACE_LIMIT: usize = 8;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `vec(AXB) = (Bᵀ ⊗ A) vec(X)` contribution of `L ρ L†` and the
/// anticommutator with `L†L`.
fn dissipator_superoperator(l: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = l.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let ldl = l.adjoint() * l;
    l.conjugate().kronecker(l)
        - id.kronecker(&ldl) * c(0.5)
        - ldl.transpose().kronecker(&id) * c(0.5)
}

/// Jump operators of the model restricted to the single-excitation sector,
/// each paired with its rate.
pub fn single_sector_jumps(n: usize, model: &NoiseModel) -> Vec<(f64, DMatrix<Complex64>)> {
    let mut jumps = Vec::new();
    if model.gamma > 0.0 {
        for j in 0..n {
            // σz_j is +1 on the occupied site and −1 elsewhere.
            let sz = DMatrix::from_fn(n, n, |a, b| match (a == b, a == j) {
                (true, true) => c(1.0),
                (true, false) => c(-1.0),
                _ => c(0.0),
            });
            jumps.push((model.gamma, sz));
        }
    }
    if model.big_gamma > 0.0 {
        for j in 0..n - 1 {
            for (from, to) in [(j, j + 1), (j + 1, j)] {
                let mut hop = DMatrix::zeros(n, n);
                hop[(to, from)] = c(1.0);
                jumps.push((model.big_gamma, hop));
            }
        }
    }
    jumps
}

/// `S` with `d vec(ρ)/dt = S vec(ρ)`, column-stacking convention.
pub fn dense_superoperator(h: &HamiltonianMatrix, model: &NoiseModel) -> Result<DMatrix<Complex64>> {
    let n = h.n_sites();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            n_sites: n,
            limit: DENSE_LIMIT,
        });
    }
    model.validate()?;
    let hm = h.to_dense_complex();
    let id = DMatrix::<Complex64>::identity(n, n);
    let mut s = (id.kronecker(&hm) - hm.transpose().kronecker(&id)) * Complex64::new(0.0, -1.0);
    for (rate, l) in single_sector_jumps(n, model) {
        s += dissipator_superoperator(&l) * c(rate);
    }
    Ok(s)
}

/// Column-stacked vector of `ρ`.
pub fn vectorize(rho: &DensityMatrix) -> nalgebra::DVector<Complex64> {
    let m = rho.to_matrix();
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &nalgebra::DVector<Complex64>, n: usize) -> DensityMatrix {
    let m = DMatrix::from_column_slice(n, n, v.as_slice());
    DensityMatrix::from_matrix(&m).expect("square by construction")
}

/// `exp(S t) vec(ρ)` by dense matrix exponential.
pub fn propagate_dense(s: &DMatrix<Complex64>, rho: &DensityMatrix, t: f64) -> DensityMatrix {
    let propagator = (s * c(t)).exp();
    unvectorize(&(propagator * vectorize(rho)), rho.n_sites())
}

/// Sparse operator on the `2^N` spin space, one list of `(column, value)`
/// per row.
#[derive(Debug, Clone)]
struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseOp {
    fn zero(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    fn identity(dim: usize) -> Self {
        Self {
            dim,
            rows: (0..dim).map(|r| vec![(r, c(1.0))]).collect(),
        }
    }

    /// `A ⊗ B` with `A` acting on the higher bits.
    fn kron(&self, other: &Self) -> Self {
        let dim = self.dim * other.dim;
        let mut rows = vec![Vec::new(); dim];
        for (ra, row_a) in self.rows.iter().enumerate() {
            for (rb, row_b) in other.rows.iter().enumerate() {
                let row = &mut rows[ra * other.dim + rb];
                for &(ca, va) in row_a {
                    for &(cb, vb) in row_b {
                        row.push((ca * other.dim + cb, va * vb));
                    }
                }
            }
        }
        Self { dim, rows }
    }

    /// A 2×2 single-site operator embedded at `site`; bit `site` of a basis
    /// index is that site's occupation.
    fn on_site(n_sites: usize, site: usize, local: [[f64; 2]; 2]) -> Self {
        let mut single = Self::zero(2);
        for (r, row) in local.iter().enumerate() {
            for (col, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    single.rows[r].push((col, c(v)));
                }
            }
        }
        let pad = Self::identity(2);
        let mut op = Self::identity(1);
        for s in (0..n_sites).rev() {
            op = op.kron(if s == site { &single } else { &pad });
        }
        op
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            let mut acc = vec![c(0.0); self.dim];
            let mut touched = vec![false; self.dim];
            for &(k, v) in row {
                for &(col, w) in &other.rows[k] {
                    acc[col] += v * w;
                    touched[col] = true;
                }
            }
            out.rows[r] = (0..self.dim)
                .filter(|&col| touched[col] && acc[col] != c(0.0))
                .map(|col| (col, acc[col]))
                .collect();
        }
        out
    }

    fn scale(mut self, a: Complex64) -> Self {
        for row in &mut self.rows {
            for entry in row.iter_mut() {
                entry.1 *= a;
            }
        }
        self
    }

    fn add(&self, other: &Self) -> Self {
        let mut dense = vec![vec![c(0.0); self.dim]; self.dim];
        for op in [self, other] {
            for (r, row) in op.rows.iter().enumerate() {
                for &(col, v) in row {
                    dense[r][col] += v;
                }
            }
        }
        Self {
            dim: self.dim,
            rows: dense
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .enumerate()
                        .filter(|(_, v)| *v != c(0.0))
                        .collect()
                })
                .collect(),
        }
    }

    fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(col, v) in row {
                out.rows[col].push((r, v.conj()));
            }
        }
        out
    }

    /// `self · X` for dense `X`.
    fn left_mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                for col in 0..self.dim {
                    out[(r, col)] += v * x[(k, col)];
                }
            }
        }
        out
    }

    /// `X · self` for dense `X`.
    fn right_mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (k, row) in self.rows.iter().enumerate() {
            for &(col, v) in row {
                for r in 0..self.dim {
                    out[(r, col)] += x[(r, k)] * v;
                }
            }
        }
        out
    }

    fn one_norm_bound(&self) -> f64 {
        let mut col_sums = vec![0.0; self.dim];
        for row in &self.rows {
            for &(col, v) in row {
                col_sums[col] += v.norm();
            }
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }
}

const SIGMA_Z: [[f64; 2]; 2] = [[-1.0, 0.0], [0.0, 1.0]];
const SIGMA_PLUS: [[f64; 2]; 2] = [[0.0, 0.0], [1.0, 0.0]];
const SIGMA_MINUS: [[f64; 2]; 2] = [[0.0, 1.0], [0.0, 0.0]];

struct FullJump {
    rate: f64,
    op: SparseOp,
    adjoint: SparseOp,
    /// `L†L`
    number: SparseOp,
}

/// Lindblad evolution on the full `2^N`-dimensional spin space.
///
/// The Hamiltonian is `Σ_i (E_i/2) σz_i + Σ_j g_j (σ⁻_j σ⁺_{j+1} + σ⁻_{j+1} σ⁺_j)`,
/// which on the single-excitation sector equals the tridiagonal matrix up to
/// the constant `−Σ_i E_i / 2`.
pub struct FullSpaceLindblad {
    n_sites: usize,
    dim: usize,
    hamiltonian: SparseOp,
    jumps: Vec<FullJump>,
}

impl FullSpaceLindblad {
    pub fn new(h: &HamiltonianMatrix, model: &NoiseModel) -> Result<Self> {
        let n = h.n_sites();
        if n > FULL_SPACE_LIMIT {
            return Err(Error::TooLarge {
                n_sites: n,
                limit: FULL_SPACE_LIMIT,
            });
        }
        model.validate()?;
        let dim = 1usize << n;
        let sz: Vec<SparseOp> = (0..n).map(|j| SparseOp::on_site(n, j, SIGMA_Z)).collect();
        let sp: Vec<SparseOp> = (0..n).map(|j| SparseOp::on_site(n, j, SIGMA_PLUS)).collect();
        let sm: Vec<SparseOp> = (0..n).map(|j| SparseOp::on_site(n, j, SIGMA_MINUS)).collect();

        let mut hamiltonian = SparseOp::zero(dim);
        for j in 0..n {
            hamiltonian = hamiltonian.add(&sz[j].clone().scale(c(0.5 * h.diagonal[j])));
        }
        for j in 0..n - 1 {
            let g = c(h.off_diagonal[j]);
            let forward = sm[j].mul(&sp[j + 1]);
            let backward = sm[j + 1].mul(&sp[j]);
            hamiltonian = hamiltonian.add(&forward.add(&backward).scale(g));
        }

        let mut jumps = Vec::new();
        let mut push = |rate: f64, op: SparseOp| {
            let adjoint = op.adjoint();
            let number = adjoint.mul(&op);
            jumps.push(FullJump {
                rate,
                op,
                adjoint,
                number,
            });
        };
        if model.gamma > 0.0 {
            for op in &sz {
                push(model.gamma, op.clone());
            }
        }
        if model.big_gamma > 0.0 {
            for j in 0..n - 1 {
                // σ⁻_j σ⁺_k moves the excitation from j to k.
                push(model.big_gamma, sm[j].mul(&sp[j + 1]));
                push(model.big_gamma, sm[j + 1].mul(&sp[j]));
            }
        }
        Ok(Self {
            n_sites: n,
            dim,
            hamiltonian,
            jumps,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = (self.hamiltonian.left_mul(rho) - self.hamiltonian.right_mul(rho))
            * Complex64::new(0.0, -1.0);
        for jump in &self.jumps {
            let sandwich = jump.adjoint.right_mul(&jump.op.left_mul(rho));
            let anti = jump.number.left_mul(rho) + jump.number.right_mul(rho);
            out += (sandwich - anti * c(0.5)) * c(jump.rate);
        }
        out
    }

    fn norm_bound(&self) -> f64 {
        let mut bound = 2.0 * self.hamiltonian.one_norm_bound();
        for jump in &self.jumps {
            let l = jump.op.one_norm_bound();
            bound += jump.rate * (l * l + jump.number.one_norm_bound());
        }
        bound.max(1.0)
    }

    /// `exp(𝓛 t) ρ` by a Taylor series on sub-steps with `‖𝓛‖·h ≤ 1`.
    pub fn propagate(&self, rho: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
        let substeps = (t * self.norm_bound()).ceil().max(1.0) as usize;
        let h = t / substeps as f64;
        let mut state = rho.clone();
        for _ in 0..substeps {
            let mut term = state.clone();
            let mut sum = state.clone();
            for k in 1..60 {
                term = self.apply(&term) * c(h / k as f64);
                sum += &term;
                if term.camax() < 1e-18 * sum.camax().max(1e-300) {
                    break;
                }
            }
            state = sum;
        }
        state
    }

    fn single_index(site: usize) -> usize {
        1 << site
    }

    /// Embeds a single-excitation density matrix into the full space.
    pub fn embed(&self, rho: &DensityMatrix) -> DMatrix<Complex64> {
        let mut full = DMatrix::zeros(self.dim, self.dim);
        for m in 0..self.n_sites {
            for k in 0..self.n_sites {
                full[(Self::single_index(m), Self::single_index(k))] = rho.get(m, k);
            }
        }
        full
    }

    /// The single-excitation block of a full-space density matrix.
    pub fn restrict(&self, full: &DMatrix<Complex64>) -> DensityMatrix {
        let n = self.n_sites;
        let m = DMatrix::from_fn(n, n, |a, b| full[(Self::single_index(a), Self::single_index(b))]);
        DensityMatrix::from_matrix(&m).expect("square by construction")
    }

    /// Largest entry of `full` outside the single-excitation block.
    pub fn leakage(&self, full: &DMatrix<Complex64>) -> f64 {
        let single = |i: usize| i.count_ones() == 1;
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for col in 0..self.dim {
                if !(single(r) && single(col)) {
                    worst = worst.max(full[(r, col)].norm());
                }
            }
        }
        worst
    }
}
