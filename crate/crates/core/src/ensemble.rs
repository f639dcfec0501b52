//! Disorder averaging and parameter sweeps.
//!
//! Every random stream is keyed by the master seed and by indices, never by
//! execution order: disorder realization `d` uses
//! `disorder_seed(master, d)` for every parameter point (so points sharing
//! `Δ` share energies), and trajectory `i` on realization `d` of a point uses
//! `trajectory_seed(master, point_key, d, i)`, where `point_key` hashes the
//! point's `(Δ, γ, Γ)`. Results are reduced in index order, so a sweep is
//! bit-reproducible regardless of thread count or grid ordering.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_observed, DensityMatrix, EvolveOptions, InvariantStats, NoiseModel};
use crate::grid::{default_dt, TimeGrid};
use crate::lattice::{build_hamiltonian, sample_disorder, ChainSpec};
use crate::observables::{
    boundary_mass, fit_power_law, FitWindow, MsdFit, MsdSeries, BOUNDARY_MARGIN,
    BOUNDARY_THRESHOLD,
};
use crate::seed::{disorder_seed, point_key, trajectory_seed};
use crate::trajectories::{
    run_dephasing_trajectory, run_hopping_trajectory, FrameAccumulator, PureState,
};
use crate::{Error, Result};

/// Largest fraction of failed realizations a point may have and stay valid.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub delta: f64,
    pub gamma: f64,
    pub big_gamma: f64,
}

impl GridPoint {
    pub fn new(delta: f64, gamma: f64, big_gamma: f64) -> Self {
        Self {
            delta,
            gamma,
            big_gamma,
        }
    }

    pub fn key(&self) -> u64 {
        point_key(self.delta, self.gamma, self.big_gamma)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Chain size, coupling and start site; its rates are overridden per point.
    pub base: ChainSpec,
    pub points: Vec<GridPoint>,
    #[serde(default = "defaults::n_disorder")]
    pub n_disorder: usize,
    /// Trajectories per realization; `0` integrates the master equation.
    #[serde(default)]
    pub n_trajectories: usize,
    #[serde(default = "defaults::t_final")]
    pub t_final: f64,
    /// Integration step; `None` uses `0.01 / max(g, γ, Γ, Δ, 1)` per point.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "defaults::sample_interval")]
    pub sample_interval: f64,
    /// Explicit sample times; replaces the uniform `sample_interval` grid.
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub fit_window: FitWindow,
    #[serde(default = "defaults::support_tol")]
    pub support_tol: f64,
}

mod defaults {
    pub fn n_disorder() -> usize {
        100
    }
    pub fn t_final() -> f64 {
        20.0
    }
    pub fn sample_interval() -> f64 {
        0.1
    }
    pub fn support_tol() -> f64 {
        crate::dynamics::EvolveOptions::default().support_tol
    }
}

impl SweepConfig {
    /// Defaults: 100 realizations, master equation, `gt = 20` sampled every 0.1.
    pub fn new(base: ChainSpec, points: Vec<GridPoint>) -> Self {
        Self {
            base,
            points,
            n_disorder: defaults::n_disorder(),
            n_trajectories: 0,
            t_final: defaults::t_final(),
            dt: None,
            sample_interval: defaults::sample_interval(),
            sample_times: None,
            master_seed: 0,
            fit_window: FitWindow::default(),
            support_tol: defaults::support_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSweep(msg));
        if self.points.is_empty() {
            return bad("grid is empty".into());
        }
        if self.n_disorder == 0 {
            return bad("n_disorder must be at least 1".into());
        }
        if !(self.t_final > 0.0) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        for p in &self.points {
            self.spec_for(p).validate()?;
        }
        Ok(())
    }

    pub fn spec_for(&self, point: &GridPoint) -> ChainSpec {
        ChainSpec {
            delta: point.delta,
            gamma: point.gamma,
            big_gamma: point.big_gamma,
            ..self.base.clone()
        }
    }

    pub fn grid_for(&self, point: &GridPoint) -> Result<TimeGrid> {
        let dt = self
            .dt
            .unwrap_or_else(|| default_dt(self.base.g, point.delta, point.gamma, point.big_gamma));
        match &self.sample_times {
            Some(times) => TimeGrid::new(self.t_final, dt, times.clone()),
            None => TimeGrid::uniform(self.t_final, dt, self.sample_interval),
        }
    }
}

/// Averaged outcome of one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: GridPoint,
    pub n_realizations: usize,
    pub n_failed: usize,
    /// Realizations left out of the MSD because the boundary guard tripped.
    pub n_flagged: usize,
    pub failures: Vec<String>,
    pub times: Vec<f64>,
    /// Site probabilities averaged over every realization that ran.
    pub frames: Vec<Vec<f64>>,
    pub msd: MsdSeries,
    pub fit: Option<MsdFit>,
    pub fit_error: Option<String>,
    /// At most 10% of realizations failed. Says nothing about the fit.
    pub valid: bool,
    pub max_boundary_mass: f64,
    /// Worst density-matrix invariants (master-equation runs).
    pub invariants: InvariantStats,
    /// Worst state-norm error (trajectory runs).
    pub max_norm_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
    pub elapsed_secs: Vec<f64>,
}

struct Realization {
    frames: Vec<Vec<f64>>,
    msd: Vec<f64>,
    max_boundary: f64,
    invariants: InvariantStats,
    max_norm_error: f64,
}

fn run_realization(
    config: &SweepConfig,
    point: &GridPoint,
    grid: &TimeGrid,
    disorder_index: usize,
) -> Result<Realization> {
    let spec = config.spec_for(point);
    let disorder = sample_disorder(&spec, disorder_seed(config.master_seed, disorder_index as u64))?;
    let h = build_hamiltonian(&spec, &disorder)?;
    let start = spec.start_site();

    let mut frames = Vec::with_capacity(grid.samples().len());
    let mut invariants = InvariantStats::default();
    let mut max_norm_error = 0.0f64;
    if config.n_trajectories == 0 {
        let rho0 = DensityMatrix::localized(spec.n_sites, start)?;
        let options = EvolveOptions {
            support_tol: config.support_tol,
            ..EvolveOptions::default()
        };
        invariants = evolve_observed(&rho0, &h, &NoiseModel::from_spec(&spec), grid, &options, |_, rho| {
            frames.push(rho.diagonal())
        })?;
    } else {
        if spec.gamma > 0.0 && spec.big_gamma > 0.0 {
            return Err(Error::InvalidSweep(
                "trajectories unravel one noise channel at a time".into(),
            ));
        }
        let psi0 = PureState::localized(spec.n_sites, start)?;
        let mut acc = FrameAccumulator::new();
        for i in 0..config.n_trajectories {
            let seed = trajectory_seed(config.master_seed, point.key(), disorder_index as u64, i as u64);
            let record = if spec.big_gamma > 0.0 {
                run_hopping_trajectory(&psi0, &h, spec.big_gamma, grid, seed)?
            } else {
                run_dephasing_trajectory(&psi0, &h, spec.gamma, grid, seed)?
            };
            max_norm_error = max_norm_error.max(record.max_norm_error);
            acc.add(&record.frames);
        }
        frames = acc.mean();
    }
    let msd = frames
        .iter()
        .map(|p| crate::observables::mean_square_displacement(p, start))
        .collect();
    let max_boundary = frames
        .iter()
        .map(|p| boundary_mass(p, BOUNDARY_MARGIN))
        .fold(0.0, f64::max);
    Ok(Realization {
        frames,
        msd,
        max_boundary,
        invariants,
        max_norm_error,
    })
}

/// Runs every disorder realization of one point and averages.
pub fn run_point(config: &SweepConfig, point: &GridPoint) -> Result<PointResult> {
    config.validate()?;
    let grid = config.grid_for(point)?;
    // A clean chain has one realization; the master equation is deterministic.
    let n_realizations = if point.delta == 0.0 && config.n_trajectories == 0 {
        1
    } else {
        config.n_disorder
    };

    let outcomes: Vec<Result<Realization>> = (0..n_realizations)
        .into_par_iter()
        .map(|d| run_realization(config, point, &grid, d))
        .collect();

    let times = grid.samples().to_vec();
    let n_sites = config.base.n_sites;
    let mut frame_sum = vec![vec![0.0; n_sites]; times.len()];
    let mut msd_sum = vec![0.0; times.len()];
    let mut failures = Vec::new();
    let mut n_flagged = 0;
    let mut n_used = 0;
    let mut n_ok = 0;
    let mut max_boundary_mass = 0.0f64;
    let mut invariants = InvariantStats::default();
    let mut max_norm_error = 0.0f64;
    for (d, outcome) in outcomes.into_iter().enumerate() {
        let r = match outcome {
            Ok(r) => r,
            Err(e) => {
                log::warn!("point {point:?}, realization {d}: {e}");
                failures.push(format!("realization {d}: {e}"));
                continue;
            }
        };
        max_boundary_mass = max_boundary_mass.max(r.max_boundary);
        invariants = invariants.merge(&r.invariants);
        max_norm_error = max_norm_error.max(r.max_norm_error);
        for (acc, frame) in frame_sum.iter_mut().zip(&r.frames) {
            for (a, p) in acc.iter_mut().zip(frame) {
                *a += p;
            }
        }
        n_ok += 1;
        if r.max_boundary > BOUNDARY_THRESHOLD {
            log::warn!(
                "point {point:?}, realization {d}: boundary mass {:.3e} exceeds {BOUNDARY_THRESHOLD:e}",
                r.max_boundary
            );
            n_flagged += 1;
            continue;
        }
        for (a, m) in msd_sum.iter_mut().zip(&r.msd) {
            *a += m;
        }
        n_used += 1;
    }

    let frame_scale = if n_ok > 0 { 1.0 / n_ok as f64 } else { 0.0 };
    let frames: Vec<Vec<f64>> = frame_sum
        .into_iter()
        .map(|f| f.into_iter().map(|p| p * frame_scale).collect())
        .collect();
    let msd_scale = if n_used > 0 { 1.0 / n_used as f64 } else { 0.0 };
    let msd = MsdSeries {
        times: times.clone(),
        msd: msd_sum.into_iter().map(|m| m * msd_scale).collect(),
        origin: config.base.start_site(),
    };
    let (fit, fit_error) = if n_used == 0 {
        (None, Some("every realization failed or reached the boundary".to_string()))
    } else {
        match fit_power_law(&msd, config.fit_window) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let failed_fraction = failures.len() as f64 / n_realizations as f64;
    let valid = n_ok > 0 && failed_fraction <= MAX_FAILED_FRACTION;
    Ok(PointResult {
        point: *point,
        n_realizations,
        n_failed: failures.len(),
        n_flagged,
        failures,
        times,
        frames,
        msd,
        fit,
        fit_error,
        valid,
        max_boundary_mass,
        invariants,
        max_norm_error,
    })
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut points = Vec::with_capacity(config.points.len());
    let mut elapsed_secs = Vec::with_capacity(config.points.len());
    for point in &config.points {
        let started = std::time::Instant::now();
        points.push(run_point(config, point)?);
        elapsed_secs.push(started.elapsed().as_secs_f64());
    }
    Ok(SweepResult {
        points,
        elapsed_secs,
    })
}

/// Qualitative transport regime of a fitted point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// No noise, wave-like spreading (`α ≥ 1.5`).
    Ballistic,
    /// No noise, spreading arrested by disorder.
    Localized,
    /// Noise increases the final MSD over the noiseless chain.
    Assisted,
    /// Noise decreases the final MSD over the noiseless chain.
    Suppressed,
    /// Strong dephasing (`γ > g`) with diffusive spreading.
    Zeno,
    /// Strong hopping (`Γ ≥ g`) with diffusive spreading.
    Classical,
}

/// Places `result` in the regime map, relative to the noiseless point at
/// the same `Δ`.
pub fn classify(result: &PointResult, noiseless: &PointResult, g: f64) -> Option<Regime> {
    let fit = result.fit?;
    let p = result.point;
    let diffusive = (fit.alpha - 1.0).abs() <= 0.25;
    let regime = if p.gamma == 0.0 && p.big_gamma == 0.0 {
        if fit.alpha >= 1.5 {
            Regime::Ballistic
        } else {
            Regime::Localized
        }
    } else if p.gamma == 0.0 && p.big_gamma >= g && diffusive {
        Regime::Classical
    } else if p.big_gamma == 0.0 && p.gamma > g && diffusive {
        Regime::Zeno
    } else if result.msd.msd.last()? > noiseless.msd.msd.last()? {
        Regime::Assisted
    } else {
        Regime::Suppressed
    };
    Some(regime)
}

/// The `(Δ, rate)` grid used for the heat-map panels: Δ ∈ {0, ½, 1, 10}
/// against rates {0, 0.1, 1, 10} of one noise family.
pub fn heatmap_grid(hopping: bool) -> Vec<GridPoint> {
    let mut points = Vec::new();
    for delta in [0.0, 0.5, 1.0, 10.0] {
        for rate in [0.0, 0.1, 1.0, 10.0] {
            points.push(if hopping {
                GridPoint::new(delta, 0.0, rate)
            } else {
                GridPoint::new(delta, rate, 0.0)
            });
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(points: Vec<GridPoint>) -> SweepConfig {
        SweepConfig {
            n_disorder: 4,
            t_final: 4.0,
            fit_window: FitWindow { t_min: 1.0, t_max: 4.0 },
            ..SweepConfig::new(ChainSpec::new(41, 1.0), points)
        }
    }

    #[test]
    fn config_validation() {
        assert!(small_config(vec![]).validate().is_err());
        let mut c = small_config(vec![GridPoint::new(1.0, 0.0, 0.0)]);
        c.n_disorder = 0;
        assert!(c.validate().is_err());
        let c = small_config(vec![GridPoint::new(-1.0, 0.0, 0.0)]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_point_sweep_equals_run_point() {
        let config = small_config(vec![GridPoint::new(1.0, 0.5, 0.0)]);
        let sweep = run_sweep(&config).unwrap();
        let direct = run_point(&config, &config.points[0]).unwrap();
        assert_eq!(sweep.points.len(), 1);
        assert_eq!(sweep.points[0], direct);
    }

    #[test]
    fn permuting_grid_keeps_point_results() {
        let a = GridPoint::new(1.0, 0.5, 0.0);
        let b = GridPoint::new(0.5, 0.0, 1.0);
        let mut config = small_config(vec![a, b]);
        config.n_trajectories = 3;
        let forward = run_sweep(&config).unwrap();
        config.points = vec![b, a];
        let backward = run_sweep(&config).unwrap();
        assert_eq!(forward.points[0], backward.points[1]);
        assert_eq!(forward.points[1], backward.points[0]);
    }

    #[test]
    fn averaged_frames_stay_normalized() {
        let config = small_config(vec![GridPoint::new(1.0, 0.0, 0.5)]);
        let r = run_point(&config, &config.points[0]).unwrap();
        assert!(r.valid);
        assert_eq!(r.n_realizations, 4);
        for f in &r.frames {
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn both_channels_need_master_equation() {
        let mut config = small_config(vec![GridPoint::new(0.0, 1.0, 1.0)]);
        config.n_trajectories = 2;
        let r = run_point(&config, &config.points[0]).unwrap();
        assert_eq!(r.n_failed, 4);
        assert!(!r.valid);
        config.n_trajectories = 0;
        assert!(run_point(&config, &config.points[0]).unwrap().valid);
    }

    #[test]
    fn boundary_guard_excludes_runs() {
        // Ballistic front reaches the ends of a short chain.
        let mut config = small_config(vec![GridPoint::new(0.0, 0.0, 0.0)]);
        config.base = ChainSpec::new(15, 1.0);
        // RK4 on a noiseless pure state needs a finer step to hold positivity.
        config.dt = Some(0.002);
        let r = run_point(&config, &config.points[0]).unwrap();
        assert_eq!(r.n_flagged, 1);
        assert!(r.max_boundary_mass > BOUNDARY_THRESHOLD);
        assert!(r.valid);
        assert!(r.fit.is_none());
        for f in &r.frames {
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
