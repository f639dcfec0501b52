//! Site probabilities, mean-square displacement and power-law fits.

use serde::{Deserialize, Serialize};

use crate::dynamics::DensityMatrix;
use crate::trajectories::PureState;
use crate::{Error, Result};

/// Total probability in the outer sites above which a run is flagged.
pub const BOUNDARY_THRESHOLD: f64 = 1e-3;
pub const BOUNDARY_MARGIN: usize = 5;

/// Minimum number of samples a fit window must contain.
pub const MIN_FIT_POINTS: usize = 10;

pub trait SiteProbabilities {
    fn site_probabilities(&self) -> Vec<f64>;
}

impl SiteProbabilities for PureState {
    fn site_probabilities(&self) -> Vec<f64> {
        self.amplitudes().iter().map(|c| c.norm_sqr()).collect()
    }
}

impl SiteProbabilities for DensityMatrix {
    fn site_probabilities(&self) -> Vec<f64> {
        self.diagonal()
    }
}

pub fn site_probabilities<S: SiteProbabilities + ?Sized>(state: &S) -> Vec<f64> {
    state.site_probabilities()
}

/// `Σ_k p_k (k − origin)²`, in sites².
pub fn mean_square_displacement(probs: &[f64], origin: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let d = k as f64 - origin as f64;
            p * d * d
        })
        .sum()
}

/// Probability held by the outermost `margin` sites at each end.
pub fn boundary_mass(probs: &[f64], margin: usize) -> f64 {
    let n = probs.len();
    if 2 * margin >= n {
        return probs.iter().sum();
    }
    probs[..margin].iter().sum::<f64>() + probs[n - margin..].iter().sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdSeries {
    pub times: Vec<f64>,
    pub msd: Vec<f64>,
    pub origin: usize,
}

impl MsdSeries {
    pub fn from_frames(times: &[f64], frames: &[Vec<f64>], origin: usize) -> Self {
        Self {
            times: times.to_vec(),
            msd: frames
                .iter()
                .map(|p| mean_square_displacement(p, origin))
                .collect(),
            origin,
        }
    }

    /// Value at the sample closest to `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.msd)
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|(_, m)| *m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for FitWindow {
    /// `gt ∈ [5, 20]`: past the coherent onset, up to the usual horizon.
    fn default() -> Self {
        Self {
            t_min: 5.0,
            t_max: 20.0,
        }
    }
}

/// `msd(t) ≈ c·t^α` over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdFit {
    pub c: f64,
    pub alpha: f64,
    pub window: FitWindow,
    pub rms_log_residual: f64,
    pub n_points: usize,
}

impl MsdFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        self.c * t.powf(self.alpha)
    }
}

/// Least squares on `(ln t, ln msd)` over samples with `t_min ≤ t ≤ t_max`.
pub fn fit_power_law(series: &MsdSeries, window: FitWindow) -> Result<MsdFit> {
    if !(window.t_min > 0.0 && window.t_max > window.t_min) {
        return Err(Error::Fit(format!(
            "window [{}, {}] must satisfy 0 < t_min < t_max",
            window.t_min, window.t_max
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &m) in series.times.iter().zip(&series.msd) {
        if t < window.t_min || t > window.t_max {
            continue;
        }
        if !(m > 0.0) {
            return Err(Error::Fit(format!("non-positive msd {m} at t = {t}")));
        }
        xs.push(t.ln());
        ys.push(m.ln());
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} samples in window, need at least {MIN_FIT_POINTS}",
            xs.len()
        )));
    }
    let k = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let alpha = sxy / sxx;
    let intercept = y_mean - alpha * x_mean;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - alpha * x).powi(2))
        .sum();
    Ok(MsdFit {
        c: intercept.exp(),
        alpha,
        window,
        rms_log_residual: (rss / k).sqrt(),
        n_points: xs.len(),
    })
}
