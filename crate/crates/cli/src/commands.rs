//! The simulation subcommands.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use chain_transport::ensemble::{run_point, GridPoint, PointResult};
use chain_transport::lattice::{build_hamiltonian, rabi_amplitude_sq, sample_disorder};
use chain_transport::observables::{
    boundary_mass, fit_power_law, MsdFit, MsdSeries, BOUNDARY_MARGIN, BOUNDARY_THRESHOLD,
};
use chain_transport::seed::{disorder_seed, trajectory_seed};
use chain_transport::trajectories::{run_dephasing_trajectory, run_hopping_trajectory, PureState};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{RunArgs, RunConfig};
use crate::output::{
    point_label, write_events, write_fits, write_frames, write_msd, FitRow, OutputEntry, RunManifest,
};

fn details(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn point_warnings(r: &PointResult) -> Vec<String> {
    let mut warnings = r.failures.clone();
    if r.n_flagged > 0 {
        warnings.push(format!(
            "{} of {} realizations put more than {BOUNDARY_THRESHOLD:e} probability within {BOUNDARY_MARGIN} sites of an end (max {:.3e}); excluded from the MSD",
            r.n_flagged, r.n_realizations, r.max_boundary_mass
        ));
    }
    warnings
}

fn point_details(r: &PointResult) -> Map<String, Value> {
    details(json!({
        "n_realizations": r.n_realizations,
        "n_failed": r.n_failed,
        "n_flagged": r.n_flagged,
        "max_boundary_mass": r.max_boundary_mass,
        "invariants": r.invariants,
        "max_norm_error": r.max_norm_error,
    }))
}

fn run_points(config: &RunConfig) -> anyhow::Result<Vec<PointResult>> {
    let sweep = config.sweep_config();
    let results: Vec<_> = sweep
        .points
        .par_iter()
        .map(|p| run_point(&sweep, p))
        .collect();
    Ok(results.into_iter().collect::<Result<_, _>>()?)
}

struct Run {
    started: Instant,
    started_unix_secs: u64,
}

impl Run {
    fn start() -> Self {
        Self {
            started: Instant::now(),
            started_unix_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    fn finish(
        self,
        command: &'static str,
        args: &RunArgs,
        config: RunConfig,
        outputs: Vec<OutputEntry>,
    ) -> anyhow::Result<bool> {
        for entry in &outputs {
            for w in &entry.warnings {
                log::warn!("{}: {w}", entry.path.display());
            }
        }
        let valid = outputs.iter().all(|o| o.valid);
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            preset: args.preset,
            master_seed: config.master_seed,
            config,
            started_unix_secs: self.started_unix_secs,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            valid,
            outputs,
        };
        let path = manifest.write(&args.out_dir)?;
        println!("wrote {}", path.display());
        Ok(valid)
    }
}

fn prepare(args: &RunArgs, command: &str) -> anyhow::Result<RunConfig> {
    let config = args.resolve(command)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    Ok(config)
}

/// Disorder-averaged master-equation frames, one CSV per grid point.
pub fn evolve(args: &RunArgs) -> anyhow::Result<bool> {
    let run = Run::start();
    let mut config = prepare(args, "evolve")?;
    config.n_trajectories = 0;
    let results = run_points(&config)?;
    let mut outputs = Vec::new();
    for r in &results {
        let path = args.out_dir.join(format!("frames_{}.csv", point_label(&r.point)));
        write_frames(&path, &r.times, &r.frames)?;
        outputs.push(OutputEntry {
            path,
            kind: "frames",
            point: Some(r.point),
            valid: r.valid,
            warnings: point_warnings(r),
            details: point_details(r),
        });
    }
    run.finish("evolve", args, config, outputs)
}

/// Single trajectories with their jump records.
pub fn trajectory(args: &RunArgs) -> anyhow::Result<bool> {
    let run = Run::start();
    let config = prepare(args, "trajectory")?;
    let sweep = config.sweep_config();
    let mut outputs = Vec::new();
    for point in &sweep.points {
        let spec = sweep.spec_for(point);
        let label = point_label(point);
        let grid = sweep.grid_for(point)?;
        let disorder = sample_disorder(&spec, disorder_seed(config.master_seed, config.disorder_index))?;
        let h = build_hamiltonian(&spec, &disorder)?;
        let psi0 = PureState::localized(spec.n_sites, spec.start_site())?;
        let runs: Vec<_> = (0..config.n_trajectories as u64)
            .into_par_iter()
            .map(|i| {
                let seed = trajectory_seed(config.master_seed, point.key(), config.disorder_index, i);
                let record = if spec.gamma > 0.0 && spec.big_gamma > 0.0 {
                    Err(anyhow::anyhow!("trajectories unravel one noise channel at a time"))
                } else if spec.big_gamma > 0.0 {
                    run_hopping_trajectory(&psi0, &h, spec.big_gamma, &grid, seed).map_err(Into::into)
                } else {
                    run_dephasing_trajectory(&psi0, &h, spec.gamma, &grid, seed).map_err(Into::into)
                };
                (i, seed, record)
            })
            .collect();
        for (i, seed, record) in runs {
            let frames_path = args.out_dir.join(format!("traj_{label}_{i}.csv"));
            let events_path = args.out_dir.join(format!("traj_{label}_{i}_events.csv"));
            let record = match record {
                Ok(r) => r,
                Err(e) => {
                    outputs.push(OutputEntry {
                        path: frames_path,
                        kind: "trajectory",
                        point: Some(*point),
                        valid: false,
                        warnings: vec![e.to_string()],
                        details: details(json!({ "seed": seed, "index": i })),
                    });
                    continue;
                }
            };
            write_frames(&frames_path, &record.times, &record.frames)?;
            write_events(&events_path, &record.events)?;
            let boundary = record
                .frames
                .iter()
                .map(|p| boundary_mass(p, BOUNDARY_MARGIN))
                .fold(0.0, f64::max);
            let mut warnings = Vec::new();
            if boundary > BOUNDARY_THRESHOLD {
                warnings.push(format!(
                    "probability within {BOUNDARY_MARGIN} sites of an end reached {boundary:.3e}"
                ));
            }
            outputs.push(OutputEntry {
                path: frames_path,
                kind: "trajectory",
                point: Some(*point),
                valid: true,
                warnings,
                details: details(json!({
                    "index": i,
                    "seed": seed,
                    "events_path": events_path,
                    "n_events": record.events.len(),
                    "max_boundary_mass": boundary,
                    "max_norm_error": record.max_norm_error,
                })),
            });
        }
    }
    run.finish("trajectory", args, config, outputs)
}

/// Power-law fits over the grid, plus the averaged MSD of every point.
pub fn sweep(args: &RunArgs, synthetic: Option<(f64, f64)>) -> anyhow::Result<bool> {
    let run = Run::start();
    let mut config = prepare(args, "sweep")?;
    if synthetic.is_some() {
        config.synthetic = synthetic;
    }
    let sweep = config.sweep_config();
    let mut outputs = Vec::new();
    let mut rows = Vec::new();
    let mut write_point = |point: GridPoint,
                           series: &MsdSeries,
                           fit: Result<MsdFit, String>,
                           entry_valid: bool,
                           warnings,
                           extra| {
        let path = args.out_dir.join(format!("msd_{}.csv", point_label(&point)));
        write_msd(&path, series)?;
        let mut warnings: Vec<String> = warnings;
        if let Err(e) = &fit {
            warnings.push(format!("fit failed: {e}"));
        }
        let valid = entry_valid && fit.is_ok();
        rows.push(FitRow {
            point,
            fit: fit.ok(),
            valid,
        });
        outputs.push(OutputEntry {
            path,
            kind: "msd",
            point: Some(point),
            valid,
            warnings,
            details: extra,
        });
        anyhow::Ok(())
    };
    match config.synthetic {
        Some((c, alpha)) => {
            for point in &sweep.points {
                let times = sweep.grid_for(point)?.samples().to_vec();
                let msd = times.iter().map(|t| c * t.powf(alpha)).collect();
                let series = MsdSeries {
                    times,
                    msd,
                    origin: sweep.base.start_site(),
                };
                let fit = fit_power_law(&series, sweep.fit_window).map_err(|e| e.to_string());
                write_point(*point, &series, fit, true, vec![], details(json!({ "synthetic": [c, alpha] })))?;
            }
        }
        None => {
            for r in run_points(&config)? {
                let fit = r
                    .fit
                    .ok_or_else(|| r.fit_error.clone().unwrap_or_else(|| "no fit".to_string()));
                write_point(r.point, &r.msd, fit, r.valid, point_warnings(&r), point_details(&r))?;
            }
        }
    }
    let fits_path = args.out_dir.join("fits.csv");
    write_fits(&fits_path, &rows)?;
    outputs.push(OutputEntry {
        path: fits_path,
        kind: "fits",
        point: None,
        valid: true,
        warnings: vec![],
        details: Map::new(),
    });
    run.finish("sweep", args, config, outputs)
}

#[derive(Debug, Clone, clap::Args)]
pub struct RabiArgs {
    #[arg(long, default_value_t = 1.0)]
    pub g: f64,
    /// Total detuning `E_j − E_k + ε_j − ε_k`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub detuning: Vec<f64>,
    /// Static energy difference `E_j − E_k`.
    #[arg(long = "Ediff", allow_hyphen_values = true)]
    pub ediff: Option<f64>,
    /// Fluctuation size; reports the `Ediff ± eps` pair.
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Sweep `eps` as `start,stop,count` and print a table.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub eps_sweep: Option<Vec<f64>>,
}

/// Prints squared Rabi amplitudes.
pub fn rabi(args: &RabiArgs, out: &mut impl std::io::Write) -> anyhow::Result<()> {
    let a2 = |d: f64| rabi_amplitude_sq(args.g, d, 0.0, 0.0, 0.0);
    for &d in &args.detuning {
        writeln!(out, "A2(detuning={d}) = {:.9}", a2(d))?;
    }
    if let Some(e) = args.ediff {
        if let Some(eps) = args.eps {
            writeln!(out, "A2(Ediff-eps) = {:.9}", a2(e - eps))?;
            writeln!(out, "A2(Ediff+eps) = {:.9}", a2(e + eps))?;
        }
        if let Some(sweep) = &args.eps_sweep {
            let [start, stop, count] = sweep.as_slice() else {
                anyhow::bail!("--eps-sweep takes start,stop,count");
            };
            let count = *count as usize;
            anyhow::ensure!(count >= 2, "--eps-sweep needs a count of at least 2");
            writeln!(out, "eps,a2_minus,a2_plus,a2_mean,a2_static")?;
            for i in 0..count {
                let eps = start + (stop - start) * i as f64 / (count - 1) as f64;
                let (m, p) = (a2(e - eps), a2(e + eps));
                writeln!(out, "{eps},{m:.9},{p:.9},{:.9},{:.9}", 0.5 * (m + p), a2(e))?;
            }
        }
    } else if args.eps.is_some() || args.eps_sweep.is_some() {
        anyhow::bail!("--eps and --eps-sweep need --Ediff");
    }
    if args.detuning.is_empty() && args.ediff.is_none() {
        anyhow::bail!("give --detuning or --Ediff");
    }
    Ok(())
}

