//! Shared time grid for master-equation runs and trajectories.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance (in units of `dt`) for snapping a step onto a stop time.
const SNAP: f64 = 1e-9;

/// Integration step and sample times, all in units of `1/g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    dt: f64,
    samples: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_final: f64, dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidGrid(format!("t_final must be positive, got {t_final}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::InvalidGrid("no sample times".into()));
        }
        if samples[0] < 0.0 || *samples.last().unwrap() > t_final * (1.0 + 1e-12) {
            return Err(Error::InvalidGrid(format!(
                "sample times must lie in [0, {t_final}]"
            )));
        }
        if samples.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("sample times must be strictly increasing".into()));
        }
        Ok(Self {
            t_final,
            dt,
            samples,
        })
    }

    /// Samples at `0, interval, 2·interval, …, t_final`.
    pub fn uniform(t_final: f64, dt: f64, interval: f64) -> Result<Self> {
        if !(interval > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "sample interval must be positive, got {interval}"
            )));
        }
        let count = (t_final / interval).round() as usize;
        if ((count as f64) * interval - t_final).abs() > 1e-9 * t_final.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "t_final {t_final} is not a multiple of the sample interval {interval}"
            )));
        }
        let mut samples: Vec<f64> = (0..=count).map(|k| k as f64 * interval).collect();
        *samples.last_mut().unwrap() = t_final;
        Self::new(t_final, dt, samples)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.t_final, dt, self.samples.clone())
    }

    /// The time to integrate to from `t`, and whether it lands exactly on `stop`.
    pub(crate) fn next_time(&self, t: f64, stop: f64) -> (f64, bool) {
        let candidate = t + self.dt;
        if candidate >= stop - SNAP * self.dt {
            (stop, true)
        } else {
            (candidate, false)
        }
    }
}

/// Default step bound `0.01 / max(g, γ, Γ, Δ, 1)`.
pub fn default_dt(g: f64, delta: f64, gamma: f64, big_gamma: f64) -> f64 {
    0.01 / [g, gamma, big_gamma, delta, 1.0]
        .into_iter()
        .fold(f64::MIN, f64::max)
}
