//! Closed-form single-excitation Liouvillian and the RK4 integrator.
//!
//! In the site basis the two dissipators reduce to element-wise rules:
//!
//! - on-site dephasing, `γ·D[σz_j]` summed over sites: every coherence
//!   `ρ_mk` with `m ≠ k` decays at `4γ`; populations are untouched.
//! - incoherent hopping, `Γ·D[σ⁻_j σ⁺_k]` over both directions of every
//!   bond: population flows `Γ·ρ_jj` along each directed bond, and `ρ_mk`
//!   decays at `Γ/2` per bond leaving `m` and per bond leaving `k`.
//!
//! The integrator only touches an active region of the matrix: a window of
//! sites `lo..=hi` and a band `|m − k| ≤ band`. Entries outside the region
//! are held at exactly zero. After each step the outer layers of the region
//! are inspected and the region grows when they carry weight above the
//! support tolerance. One RK4 step spreads support by at most four sites,
//! so with a zero tolerance the result equals a full-matrix integration.

use num_complex::Complex64;

use crate::lattice::HamiltonianMatrix;

use super::NoiseModel;

/// Width of the edge layer inspected after every step.
const GUARD: usize = 4;
/// Sites added to the region when its edge layer carries weight.
const GROW: usize = 8;

/// Per-element coefficients of the Liouvillian.
pub(crate) struct Generator {
    n: usize,
    diagonal: Vec<f64>,
    off_diagonal: Vec<f64>,
    /// `4γ`, applied to coherences only.
    coherence_decay: f64,
    /// `Γ/2 · (number of bonds leaving site j)`.
    hop_decay: Vec<f64>,
    /// `hop_decay[k] + 4γ`.
    column_decay: Vec<f64>,
    big_gamma: f64,
    zero_row: Vec<Complex64>,
}

impl Generator {
    pub(crate) fn new(h: &HamiltonianMatrix, model: &NoiseModel) -> Self {
        let n = h.n_sites();
        let hop_decay: Vec<f64> = (0..n)
            .map(|j| {
                let degree = usize::from(j > 0) + usize::from(j + 1 < n);
                0.5 * model.big_gamma * degree as f64
            })
            .collect();
        let coherence_decay = 4.0 * model.gamma;
        Self {
            n,
            diagonal: h.diagonal.clone(),
            off_diagonal: h.off_diagonal.clone(),
            coherence_decay,
            column_decay: hop_decay.iter().map(|d| d + coherence_decay).collect(),
            hop_decay,
            big_gamma: model.big_gamma,
            zero_row: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    /// Writes `dρ/dt` into `out` for every element of `region`.
    ///
    /// `rho` must be zero outside `region`; `out` is not touched outside it.
    pub(crate) fn apply(&self, rho: &[Complex64], out: &mut [Complex64], region: &Region) {
        let n = self.n;
        let od = &self.off_diagonal;
        let bond = |j: usize| if j + 1 < n { od[j] } else { 0.0 };
        for m in region.lo..=region.hi {
            let (k0, k1) = region.columns(m);
            if k0 > k1 {
                continue;
            }
            let row = &rho[m * n..(m + 1) * n];
            let (up, g_up) = if m > 0 {
                (&rho[(m - 1) * n..m * n], od[m - 1])
            } else {
                (&self.zero_row[..], 0.0)
            };
            let (down, g_down) = if m + 1 < n {
                (&rho[(m + 1) * n..(m + 2) * n], od[m])
            } else {
                (&self.zero_row[..], 0.0)
            };
            let d_m = self.diagonal[m];
            let decay_m = self.hop_decay[m];
            let out_row = &mut out[m * n..(m + 1) * n];

            // (Hρ − ρH)_mk, with the column neighbours of the two end
            // columns handled outside the unchecked loop.
            let element = |k: usize, left: Complex64, right: Complex64| {
                let r = row[k];
                let comm = r * (d_m - self.diagonal[k]) + up[k] * g_up + down[k] * g_down
                    - left
                    - right;
                Complex64::new(comm.im, -comm.re) - r * (decay_m + self.column_decay[k])
            };
            let inner_lo = k0.max(1);
            let inner_hi = k1.min(n.saturating_sub(2));
            if k0 == 0 {
                out_row[0] = element(0, Complex64::new(0.0, 0.0), row[1.min(n - 1)] * bond(0));
            }
            for k in inner_lo..=inner_hi {
                out_row[k] = element(k, row[k - 1] * od[k - 1], row[k + 1] * od[k]);
            }
            if k1 == n - 1 && n > 1 {
                out_row[n - 1] = element(n - 1, row[n - 2] * od[n - 2], Complex64::new(0.0, 0.0));
            }
            if k0 <= m && m <= k1 {
                out_row[m] += row[m] * self.coherence_decay;
                if self.big_gamma != 0.0 {
                    let mut gain = 0.0;
                    if m > 0 {
                        gain += up[m - 1].re;
                    }
                    if m + 1 < n {
                        gain += down[m + 1].re;
                    }
                    out_row[m] += self.big_gamma * gain;
                }
            }
        }
    }
}

/// Active part of the matrix: rows and columns `lo..=hi`, `|m − k| ≤ band`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Region {
    pub lo: usize,
    pub hi: usize,
    pub band: usize,
}

impl Region {
    pub(crate) fn full(n: usize) -> Self {
        Self {
            lo: 0,
            hi: n - 1,
            band: n - 1,
        }
    }

    /// Smallest region holding every nonzero entry of `rho`, padded by [`GROW`].
    pub(crate) fn covering(rho: &[Complex64], n: usize) -> Option<Self> {
        let mut lo = usize::MAX;
        let mut hi = 0;
        let mut band = 0;
        for m in 0..n {
            for k in 0..n {
                if rho[m * n + k] != Complex64::new(0.0, 0.0) {
                    lo = lo.min(m).min(k);
                    hi = hi.max(m).max(k);
                    band = band.max(m.abs_diff(k));
                }
            }
        }
        (lo != usize::MAX).then(|| {
            Self {
                lo: lo.saturating_sub(GROW),
                hi: (hi + GROW).min(n - 1),
                band: (band + GROW).min(n - 1),
            }
        })
    }

    fn columns(&self, m: usize) -> (usize, usize) {
        (
            self.lo.max(m.saturating_sub(self.band)),
            self.hi.min(m + self.band),
        )
    }

    pub(crate) fn is_full(&self, n: usize) -> bool {
        self.lo == 0 && self.hi == n - 1 && self.band == n - 1
    }

    pub(crate) fn for_each_row(&self, mut f: impl FnMut(usize, usize, usize)) {
        for m in self.lo..=self.hi {
            let (k0, k1) = self.columns(m);
            if k0 <= k1 {
                f(m, k0, k1);
            }
        }
    }

    /// Grows the region where its edge layer holds entries with `|ρ| > tol`.
    fn expand(&mut self, rho: &[Complex64], n: usize, tol: f64) {
        let tol_sq = tol * tol;
        let check_lo = self.lo > 0;
        let check_hi = self.hi + 1 < n;
        let check_band = self.band + 1 < n;
        let lo_edge = self.lo + GUARD;
        let hi_edge = self.hi.saturating_sub(GUARD);
        let band_edge = self.band.saturating_sub(GUARD);
        let (mut grow_lo, mut grow_hi, mut grow_band) = (false, false, false);
        let mut scan = |m: usize, from: usize, to: usize| {
            for k in from..=to {
                if rho[m * n + k].norm_sqr() > tol_sq {
                    grow_lo |= check_lo && (m < lo_edge || k < lo_edge);
                    grow_hi |= check_hi && (m > hi_edge || k > hi_edge);
                    grow_band |= check_band && m.abs_diff(k) > band_edge;
                }
            }
        };
        self.for_each_row(|m, k0, k1| {
            if (check_lo && m < lo_edge) || (check_hi && m > hi_edge) {
                scan(m, k0, k1);
                return;
            }
            if check_lo && k0 < lo_edge {
                scan(m, k0, k1.min(lo_edge - 1));
            }
            if check_hi && k1 > hi_edge {
                scan(m, k0.max(hi_edge + 1), k1);
            }
            if check_band {
                if m >= band_edge + 1 && k0 + band_edge < m {
                    scan(m, k0, (m - band_edge - 1).min(k1));
                }
                if m + band_edge + 1 <= k1 {
                    scan(m, (m + band_edge + 1).max(k0), k1);
                }
            }
        });
        if grow_lo {
            self.lo = self.lo.saturating_sub(GROW);
        }
        if grow_hi {
            self.hi = (self.hi + GROW).min(n - 1);
        }
        if grow_band {
            self.band = (self.band + GROW).min(n - 1);
        }
    }
}

/// Fixed-step RK4 over the active region.
pub(crate) struct Rk4 {
    generator: Generator,
    region: Region,
    support_tol: f64,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Rk4 {
    pub(crate) fn new(generator: Generator, region: Region, support_tol: f64) -> Self {
        let len = generator.n() * generator.n();
        let zeros = vec![Complex64::new(0.0, 0.0); len];
        Self {
            generator,
            region,
            support_tol,
            k1: zeros.clone(),
            k2: zeros.clone(),
            k3: zeros.clone(),
            k4: zeros.clone(),
            scratch: zeros,
        }
    }

    pub(crate) fn region(&self) -> Region {
        self.region
    }

    pub(crate) fn step(&mut self, rho: &mut [Complex64], h: f64) {
        let n = self.generator.n();
        let region = self.region;
        let half = 0.5 * h;

        self.generator.apply(rho, &mut self.k1, &region);
        axpy_region(&region, n, &mut self.scratch, rho, half, &self.k1);
        self.generator.apply(&self.scratch, &mut self.k2, &region);
        axpy_region(&region, n, &mut self.scratch, rho, half, &self.k2);
        self.generator.apply(&self.scratch, &mut self.k3, &region);
        axpy_region(&region, n, &mut self.scratch, rho, h, &self.k3);
        self.generator.apply(&self.scratch, &mut self.k4, &region);

        let sixth = h / 6.0;
        let (k1, k2, k3, k4) = (&self.k1, &self.k2, &self.k3, &self.k4);
        region.for_each_row(|m, c0, c1| {
            for idx in m * n + c0..=m * n + c1 {
                rho[idx] += (k1[idx] + (k2[idx] + k3[idx]) * 2.0 + k4[idx]) * sixth;
            }
        });

        if !self.region.is_full(n) {
            self.region.expand(rho, n, self.support_tol);
        }
    }
}

fn axpy_region(
    region: &Region,
    n: usize,
    dst: &mut [Complex64],
    base: &[Complex64],
    a: f64,
    x: &[Complex64],
) {
    region.for_each_row(|m, c0, c1| {
        for idx in m * n + c0..=m * n + c1 {
            dst[idx] = base[idx] + x[idx] * a;
        }
    });
}
