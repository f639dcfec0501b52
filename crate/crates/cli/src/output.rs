//! CSV writers and the run manifest.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chain_transport::ensemble::GridPoint;
use chain_transport::observables::{MsdFit, MsdSeries};
use chain_transport::trajectories::JumpEvent;
use serde::Serialize;

use crate::config::{Preset, RunConfig};

/// Nine significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn point_label(p: &GridPoint) -> String {
    format!("delta{}_gamma{}_Gamma{}", p.delta, p.gamma, p.big_gamma)
}

fn writer(path: &Path) -> anyhow::Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// `t,site_0,…,site_{N−1}`, one row per sample.
pub fn write_frames(path: &Path, times: &[f64], frames: &[Vec<f64>]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    let n = frames.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|j| format!("site_{j}")));
    w.write_record(&header)?;
    for (t, frame) in times.iter().zip(frames) {
        let row = std::iter::once(num(*t)).chain(frame.iter().map(|p| num(*p)));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// `t,kind,site_or_pair`; hops are written as `from->to`.
pub fn write_events(path: &Path, events: &[JumpEvent]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "kind", "site_or_pair"])?;
    for e in events {
        let site = match e.target {
            Some(to) => format!("{}->{to}", e.site),
            None => e.site.to_string(),
        };
        w.write_record([num(e.time), e.kind.as_str().to_string(), site])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_msd(path: &Path, series: &MsdSeries) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "msd"])?;
    for (t, m) in series.times.iter().zip(&series.msd) {
        w.write_record([num(*t), num(*m)])?;
    }
    w.flush()?;
    Ok(())
}

pub struct FitRow {
    pub point: GridPoint,
    pub fit: Option<MsdFit>,
    pub valid: bool,
}

/// `delta,gamma,big_gamma,c,alpha,rms_log_residual,valid`; missing fits
/// are written as `nan`.
pub fn write_fits(path: &Path, rows: &[FitRow]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["delta", "gamma", "big_gamma", "c", "alpha", "rms_log_residual", "valid"])?;
    for r in rows {
        let (c, alpha, rms) = r
            .fit
            .map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.c, f.alpha, f.rms_log_residual));
        w.write_record([
            num(r.point.delta),
            num(r.point.gamma),
            num(r.point.big_gamma),
            num(c),
            num(alpha),
            num(rms),
            r.valid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<GridPoint>,
    pub valid: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(flatten)]
    pub details: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub preset: Option<Preset>,
    pub config: RunConfig,
    pub master_seed: u64,
    pub started_unix_secs: u64,
    pub wall_clock_secs: f64,
    pub threads: usize,
    pub valid: bool,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(format!("{}_manifest.json", self.command));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chain_transport::trajectories::JumpKind;

    #[test]
    fn number_format_has_nine_significant_digits() {
        assert_eq!(num(1.0), "1.00000000e0");
        assert_eq!(num(0.123456789123), "1.23456789e-1");
        assert_eq!(point_label(&GridPoint::new(0.5, 0.0, 10.0)), "delta0.5_gamma0_Gamma10");
    }

    #[test]
    fn csv_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let frames = dir.path().join("f.csv");
        write_frames(&frames, &[0.0, 0.5], &[vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        let text = std::fs::read_to_string(&frames).unwrap();
        assert_eq!(
            text,
            "t,site_0,site_1\n0.00000000e0,1.00000000e0,0.00000000e0\n5.00000000e-1,2.50000000e-1,7.50000000e-1\n"
        );
        let events = dir.path().join("e.csv");
        write_events(
            &events,
            &[
                JumpEvent { time: 1.0, kind: JumpKind::Hop, site: 3, target: Some(4) },
                JumpEvent { time: 2.0, kind: JumpKind::Exclude, site: 7, target: None },
            ],
        )
        .unwrap();
        let text = std::fs::read_to_string(&events).unwrap();
        assert_eq!(text, "t,kind,site_or_pair\n1.00000000e0,hop,3->4\n2.00000000e0,exclude,7\n");
    }
}
