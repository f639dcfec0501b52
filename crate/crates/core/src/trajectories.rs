//! Pure-state jump unravelings of the two master equations.
//!
//! **On-site dephasing** is unraveled as random projective measurements of
//! `σz_k`. Events form a Poisson process of rate `2γ` on every site,
//! independent of the state. At an event on site `k` the excitation is
//! either *localized* on `k` (probability `|c_k|²`) or *excluded* from it
//! (amplitude `c_k` set to zero, state renormalised). A measurement rate of
//! `2γ` per site is what makes the ensemble average decay coherences at `4γ`,
//! matching `γ·D[σz]`.
//!
//! **Incoherent hopping** uses the standard Monte Carlo wave-function
//! scheme. The jump `j → k` fires at rate `Γ|c_j|²` for each directed bond,
//! the no-jump evolution is generated by `H − (i/2)Γ Σ_bonds |j⟩⟨j|`, and a
//! jump leaves the state exactly on `|k⟩`. Jump times are found by evolving
//! the unnormalised state until its squared norm falls to a uniform random
//! threshold, then bisecting inside the step. Note the rate is `Γ` per
//! directed bond, so a localized excitation in the bulk leaves its site at
//! total rate `2Γ`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::grid::TimeGrid;
use crate::lattice::HamiltonianMatrix;
use crate::seed::rng_from_seed;
use crate::{Error, Result};

/// Dephasing measurement events per site per unit `γ`.
pub const DEPHASING_EVENTS_PER_GAMMA: f64 = 2.0;

pub const NORM_TOL: f64 = 1e-10;

/// Below this squared norm an excluded state cannot be renormalised.
const ZERO_NORM_SQ: f64 = 1e-24;

/// Normalised single-excitation wave function `Σ_j c_j |j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn localized(n_sites: usize, site: usize) -> Result<Self> {
        if site >= n_sites {
            return Err(Error::InvalidSpec(format!(
                "site {site} outside chain of {n_sites} sites"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n_sites];
        amplitudes[site] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    /// `c_j = 1/√N`.
    pub fn uniform(n_sites: usize) -> Self {
        let a = Complex64::new(1.0 / (n_sites as f64).sqrt(), 0.0);
        Self {
            amplitudes: vec![a; n_sites],
        }
    }

    /// Normalises `amplitudes`; fails on a zero vector.
    pub fn from_amplitudes(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !(norm_sq > ZERO_NORM_SQ) || !norm_sq.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "cannot normalise state with squared norm {norm_sq:e}"
            )));
        }
        let scale = 1.0 / norm_sq.sqrt();
        amplitudes.iter_mut().for_each(|c| *c *= scale);
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    Localize,
    Exclude,
    Hop,
}

impl JumpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            JumpKind::Localize => "localize",
            JumpKind::Exclude => "exclude",
            JumpKind::Hop => "hop",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub kind: JumpKind,
    /// Measured site, or the source site of a hop.
    pub site: usize,
    /// Destination of a hop.
    pub target: Option<usize>,
}

/// Sampled site probabilities and jump log of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub events: Vec<JumpEvent>,
    pub seed: u64,
    /// Largest `|‖ψ‖² − 1|` of the normalised state at a sample.
    pub max_norm_error: f64,
}

/// RK4 for `dψ/dt = −i H_eff ψ` with tridiagonal `H_eff`.
struct Propagator {
    diagonal: Vec<Complex64>,
    off_diagonal: Vec<f64>,
    k: [Vec<Complex64>; 4],
    scratch: Vec<Complex64>,
}

impl Propagator {
    /// `loss[j]` enters as `−(i/2)·loss[j]` on the diagonal.
    fn new(h: &HamiltonianMatrix, loss: Option<&[f64]>) -> Self {
        let n = h.n_sites();
        let diagonal = (0..n)
            .map(|j| Complex64::new(h.diagonal[j], -0.5 * loss.map_or(0.0, |l| l[j])))
            .collect();
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        Self {
            diagonal,
            off_diagonal: h.off_diagonal.clone(),
            k: [zeros.clone(), zeros.clone(), zeros.clone(), zeros.clone()],
            scratch: zeros,
        }
    }

    fn derivative(diagonal: &[Complex64], off: &[f64], psi: &[Complex64], out: &mut [Complex64]) {
        let n = psi.len();
        let minus_i = Complex64::new(0.0, -1.0);
        for j in 0..n {
            let mut acc = psi[j] * diagonal[j];
            if j > 0 {
                acc += psi[j - 1] * off[j - 1];
            }
            if j + 1 < n {
                acc += psi[j + 1] * off[j];
            }
            out[j] = minus_i * acc;
        }
    }

    /// `out = ψ(t + h)` given `psi = ψ(t)`.
    fn step_into(&mut self, psi: &[Complex64], h: f64, out: &mut [Complex64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        let (d, off, s) = (&self.diagonal, &self.off_diagonal, &mut self.scratch);
        Self::derivative(d, off, psi, k1);
        for j in 0..psi.len() {
            s[j] = psi[j] + k1[j] * (0.5 * h);
        }
        Self::derivative(d, off, s, k2);
        for j in 0..psi.len() {
            s[j] = psi[j] + k2[j] * (0.5 * h);
        }
        Self::derivative(d, off, s, k3);
        for j in 0..psi.len() {
            s[j] = psi[j] + k3[j] * h;
        }
        Self::derivative(d, off, s, k4);
        for j in 0..psi.len() {
            out[j] = psi[j] + (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
        }
    }
}

fn norm_sqr(psi: &[Complex64]) -> f64 {
    psi.iter().map(|c| c.norm_sqr()).sum()
}

fn normalize(psi: &mut [Complex64]) -> f64 {
    let n2 = norm_sqr(psi);
    let scale = 1.0 / n2.sqrt();
    psi.iter_mut().for_each(|c| *c *= scale);
    n2
}

fn probabilities(psi: &[Complex64]) -> Vec<f64> {
    let n2 = norm_sqr(psi);
    psi.iter().map(|c| c.norm_sqr() / n2).collect()
}

fn basis_vector(psi: &mut [Complex64], site: usize) {
    psi.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
    psi[site] = Complex64::new(1.0, 0.0);
}

fn check_inputs(psi0: &PureState, h: &HamiltonianMatrix, rate: f64, name: &str) -> Result<()> {
    if psi0.n_sites() != h.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: h.n_sites(),
            found: psi0.n_sites(),
        });
    }
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::InvalidNoise(format!("{name} must be non-negative, got {rate}")));
    }
    Ok(())
}

/// Sampling bookkeeping shared by both engines.
struct Recorder<'a> {
    grid: &'a TimeGrid,
    next_sample: usize,
    record: TrajectoryRecord,
}

impl<'a> Recorder<'a> {
    fn new(grid: &'a TimeGrid, seed: u64) -> Self {
        Self {
            grid,
            next_sample: 0,
            record: TrajectoryRecord {
                times: Vec::with_capacity(grid.samples().len()),
                frames: Vec::with_capacity(grid.samples().len()),
                events: Vec::new(),
                seed,
                max_norm_error: 0.0,
            },
        }
    }

    /// Next time the integrator must land on: a sample, or `t_final`.
    fn next_stop(&self) -> Option<(f64, bool)> {
        match self.grid.samples().get(self.next_sample) {
            Some(&s) => Some((s, true)),
            None => {
                let done = self.record.times.last().copied().unwrap_or(0.0) >= self.grid.t_final();
                (!done).then_some((self.grid.t_final(), false))
            }
        }
    }

    fn sample(&mut self, t: f64, psi: &[Complex64], normalized: bool) -> Result<()> {
        if normalized {
            let err = (norm_sqr(psi) - 1.0).abs();
            self.record.max_norm_error = self.record.max_norm_error.max(err);
            if err > NORM_TOL {
                return Err(Error::InvariantViolation {
                    quantity: "state norm",
                    time: t,
                    value: err,
                    tolerance: NORM_TOL,
                });
            }
        }
        self.record.times.push(t);
        self.record.frames.push(probabilities(psi));
        self.next_sample += 1;
        Ok(())
    }
}

/// Projective (localize/exclude) unraveling of on-site dephasing.
pub fn run_dephasing_trajectory(
    psi0: &PureState,
    h: &HamiltonianMatrix,
    gamma: f64,
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectoryRecord> {
    dephasing_trajectory(psi0, h, gamma, grid, seed, |_, _| {})
}

fn dephasing_trajectory(
    psi0: &PureState,
    h: &HamiltonianMatrix,
    gamma: f64,
    grid: &TimeGrid,
    seed: u64,
    mut on_event: impl FnMut(&JumpEvent, &[Complex64]),
) -> Result<TrajectoryRecord> {
    check_inputs(psi0, h, gamma, "gamma")?;
    let n = h.n_sites();
    let mut rng = rng_from_seed(seed);
    let total_rate = DEPHASING_EVENTS_PER_GAMMA * gamma * n as f64;
    let waiting = (total_rate > 0.0)
        .then(|| Exp::new(total_rate).expect("positive rate"));
    let draw_wait = |rng: &mut ChaCha8Rng| waiting.map_or(f64::INFINITY, |w| w.sample(rng));

    let mut propagator = Propagator::new(h, None);
    let mut psi = psi0.amplitudes().to_vec();
    let mut next_psi = psi.clone();
    let mut recorder = Recorder::new(grid, seed);
    let mut t = 0.0;
    let mut next_event = draw_wait(&mut rng);

    if grid.samples()[0] == 0.0 {
        recorder.sample(0.0, &psi, true)?;
    }
    while let Some((stop, is_sample)) = recorder.next_stop() {
        let event_first = next_event < stop;
        let target = if event_first { next_event } else { stop };
        let (next, landed) = grid.next_time(t, target);
        propagator.step_into(&psi, next - t, &mut next_psi);
        std::mem::swap(&mut psi, &mut next_psi);
        normalize(&mut psi);
        t = next;
        if !landed {
            continue;
        }
        if event_first {
            let site = rng.random_range(0..n);
            let p_site = psi[site].norm_sqr();
            let kind = if rng.random::<f64>() < p_site {
                basis_vector(&mut psi, site);
                JumpKind::Localize
            } else {
                psi[site] = Complex64::new(0.0, 0.0);
                let remaining = norm_sqr(&psi);
                if remaining < ZERO_NORM_SQ {
                    return Err(Error::TrajectoryAborted {
                        time: t,
                        reason: format!(
                            "exclusion on site {site} left squared norm {remaining:e}"
                        ),
                    });
                }
                normalize(&mut psi);
                JumpKind::Exclude
            };
            let event = JumpEvent {
                time: t,
                kind,
                site,
                target: None,
            };
            on_event(&event, &psi);
            recorder.record.events.push(event);
            next_event = t + draw_wait(&mut rng);
        } else if is_sample {
            recorder.sample(t, &psi, true)?;
        } else {
            break;
        }
    }
    Ok(recorder.record)
}

/// Monte Carlo wave-function unraveling of incoherent hopping.
pub fn run_hopping_trajectory(
    psi0: &PureState,
    h: &HamiltonianMatrix,
    big_gamma: f64,
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectoryRecord> {
    hopping_trajectory(psi0, h, big_gamma, grid, seed, |_, _| {})
}

fn hopping_trajectory(
    psi0: &PureState,
    h: &HamiltonianMatrix,
    big_gamma: f64,
    grid: &TimeGrid,
    seed: u64,
    mut on_event: impl FnMut(&JumpEvent, &[Complex64]),
) -> Result<TrajectoryRecord> {
    check_inputs(psi0, h, big_gamma, "big_gamma")?;
    if big_gamma == 0.0 {
        // No channel can fire; this is plain unitary evolution.
        return dephasing_trajectory(psi0, h, 0.0, grid, seed, on_event);
    }
    let n = h.n_sites();
    let degree = |j: usize| usize::from(j > 0) + usize::from(j + 1 < n);
    let loss: Vec<f64> = (0..n).map(|j| big_gamma * degree(j) as f64).collect();
    let mut propagator = Propagator::new(h, Some(&loss));
    let mut rng = rng_from_seed(seed);

    let mut psi = psi0.amplitudes().to_vec();
    let mut trial = psi.clone();
    let mut recorder = Recorder::new(grid, seed);
    let mut t = 0.0;
    let mut threshold: f64 = rng.random();

    if grid.samples()[0] == 0.0 {
        let mut normalized = psi.clone();
        normalize(&mut normalized);
        recorder.sample(0.0, &normalized, true)?;
    }
    while let Some((stop, is_sample)) = recorder.next_stop() {
        let (next, landed) = grid.next_time(t, stop);
        let h_step = next - t;
        propagator.step_into(&psi, h_step, &mut trial);
        if norm_sqr(&trial) > threshold {
            std::mem::swap(&mut psi, &mut trial);
            t = next;
            if landed {
                if is_sample {
                    let mut normalized = psi.clone();
                    normalize(&mut normalized);
                    recorder.sample(t, &normalized, true)?;
                } else {
                    break;
                }
            }
            continue;
        }

        // The squared norm crosses the threshold inside this step.
        let (mut lo, mut hi) = (0.0, h_step);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            propagator.step_into(&psi, mid, &mut trial);
            if norm_sqr(&trial) > threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        propagator.step_into(&psi, hi, &mut trial);
        t += hi;
        std::mem::swap(&mut psi, &mut trial);

        // Channel j → k is chosen with weight |c_j|², one entry per bond direction.
        let weights: Vec<f64> = psi.iter().enumerate()
            .map(|(j, c)| c.norm_sqr() * degree(j) as f64)
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::TrajectoryAborted {
                time: t,
                reason: "jump triggered with zero total jump rate".into(),
            });
        }
        let mut u = rng.random::<f64>() * total;
        let mut from = n - 1;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                from = j;
                break;
            }
            u -= w;
        }
        let to = match (from > 0, from + 1 < n) {
            (true, true) => {
                if rng.random::<bool>() {
                    from + 1
                } else {
                    from - 1
                }
            }
            (true, false) => from - 1,
            (false, _) => from + 1,
        };
        basis_vector(&mut psi, to);
        let event = JumpEvent {
            time: t,
            kind: JumpKind::Hop,
            site: from,
            target: Some(to),
        };
        on_event(&event, &psi);
        recorder.record.events.push(event);
        threshold = rng.random();
    }
    Ok(recorder.record)
}

/// Running mean and standard error of site-probability frames.
#[derive(Debug, Clone, Default)]
pub struct FrameAccumulator {
    count: usize,
    sum: Vec<Vec<f64>>,
    sum_sq: Vec<Vec<f64>>,
}

impl FrameAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, frames: &[Vec<f64>]) {
        if self.count == 0 {
            self.sum = frames.iter().map(|f| vec![0.0; f.len()]).collect();
            self.sum_sq = self.sum.clone();
        }
        assert_eq!(frames.len(), self.sum.len(), "frame count mismatch");
        for ((s, s2), frame) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(frames) {
            for ((a, b), p) in s.iter_mut().zip(s2.iter_mut()).zip(frame) {
                *a += p;
                *b += p * p;
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> Vec<Vec<f64>> {
        let m = self.count as f64;
        self.sum.iter().map(|f| f.iter().map(|x| x / m).collect()).collect()
    }

    /// Standard error of the mean, `√(var/M)`, with the unbiased variance.
    pub fn standard_error(&self) -> Vec<Vec<f64>> {
        let m = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, s2)| {
                s.iter()
                    .zip(s2)
                    .map(|(a, b)| {
                        let mean = a / m;
                        let var = ((b / m - mean * mean) * m / (m - 1.0)).max(0.0);
                        (var / m).sqrt()
                    })
                    .collect()
            })
            .collect()
    }
}
