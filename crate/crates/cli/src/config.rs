//! Run configuration: presets, JSON files and command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chain_transport::ensemble::{GridPoint, SweepConfig};
use chain_transport::lattice::ChainSpec;
use chain_transport::observables::FitWindow;
use clap::Args;
use serde::{Deserialize, Serialize};

/// Everything needed to reproduce a run. Stored verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_sites: usize,
    pub g: f64,
    pub initial_site: Option<usize>,
    /// Explicit grid. When absent, the product of the three lists is used.
    pub points: Option<Vec<GridPoint>>,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub big_gammas: Vec<f64>,
    pub n_disorder: usize,
    /// Master-equation runs use 0; the trajectory command runs this many per point.
    pub n_trajectories: usize,
    /// Disorder realization used by the trajectory command.
    pub disorder_index: u64,
    pub t_final: f64,
    pub dt: Option<f64>,
    pub sample_interval: f64,
    pub sample_times: Option<Vec<f64>>,
    pub master_seed: u64,
    pub fit_window: FitWindow,
    pub support_tol: f64,
    /// Replace simulated MSD by `c·t^α` (sweep only).
    pub synthetic: Option<(f64, f64)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sweep = SweepConfig::new(ChainSpec::new(201, 1.0), vec![]);
        Self {
            n_sites: 201,
            g: 1.0,
            initial_site: None,
            points: None,
            deltas: vec![0.0],
            gammas: vec![0.0],
            big_gammas: vec![0.0],
            n_disorder: sweep.n_disorder,
            n_trajectories: 0,
            disorder_index: 0,
            t_final: sweep.t_final,
            dt: None,
            sample_interval: sweep.sample_interval,
            sample_times: None,
            master_seed: 0,
            fit_window: sweep.fit_window,
            support_tol: sweep.support_tol,
            synthetic: None,
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Vec<GridPoint> {
        if let Some(points) = &self.points {
            return points.clone();
        }
        let mut points = Vec::new();
        for &delta in &self.deltas {
            for &gamma in &self.gammas {
                for &big_gamma in &self.big_gammas {
                    points.push(GridPoint::new(delta, gamma, big_gamma));
                }
            }
        }
        points
    }

    /// Freezes the grid into an explicit point list.
    pub fn resolved(mut self) -> Self {
        self.points = Some(self.grid());
        self.deltas.clear();
        self.gammas.clear();
        self.big_gammas.clear();
        self
    }

    pub fn base_spec(&self) -> ChainSpec {
        ChainSpec {
            initial_site: self.initial_site,
            ..ChainSpec::new(self.n_sites, self.g)
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            n_disorder: self.n_disorder,
            n_trajectories: self.n_trajectories,
            t_final: self.t_final,
            dt: self.dt,
            sample_interval: self.sample_interval,
            sample_times: self.sample_times.clone(),
            master_seed: self.master_seed,
            fit_window: self.fit_window,
            support_tol: self.support_tol,
            ..SweepConfig::new(self.base_spec(), self.grid())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig3a,
    Fig3b,
    Fig3c,
    Fig4a,
    Fig4b,
    Fig4c,
    Fig5,
    Fig6,
}

impl Preset {
    /// The command a preset is meant for.
    pub fn command(self) -> &'static str {
        match self {
            Preset::Fig3a | Preset::Fig3b | Preset::Fig3c => "evolve",
            Preset::Fig4a | Preset::Fig4b | Preset::Fig4c | Preset::Fig6 => "trajectory",
            Preset::Fig5 => "sweep",
        }
    }

    pub fn config(self) -> RunConfig {
        const DISORDER_ROWS: [f64; 4] = [0.0, 0.5, 1.0, 10.0];
        const RATES: [f64; 3] = [0.1, 1.0, 10.0];
        let base = RunConfig {
            deltas: DISORDER_ROWS.to_vec(),
            ..RunConfig::default()
        };
        let trajectories = RunConfig {
            n_sites: 81,
            n_trajectories: 1,
            ..base.clone()
        };
        match self {
            Preset::Fig3a => base,
            Preset::Fig3b => RunConfig {
                gammas: RATES.to_vec(),
                ..base
            },
            Preset::Fig3c => RunConfig {
                big_gammas: RATES.to_vec(),
                ..base
            },
            Preset::Fig4a => trajectories,
            Preset::Fig4b => RunConfig {
                gammas: RATES.to_vec(),
                ..trajectories
            },
            Preset::Fig4c => RunConfig {
                big_gammas: RATES.to_vec(),
                ..trajectories
            },
            Preset::Fig5 => {
                let mut points = Vec::new();
                for delta in [0.0, 0.5, 1.0, 2.0, 10.0] {
                    for rate in RATES {
                        points.push(GridPoint::new(delta, rate, 0.0));
                    }
                    for rate in RATES {
                        points.push(GridPoint::new(delta, 0.0, rate));
                    }
                }
                RunConfig {
                    points: Some(points),
                    ..base
                }
            }
            Preset::Fig6 => RunConfig {
                deltas: vec![1.0],
                gammas: vec![1.0],
                n_trajectories: 10,
                ..trajectories
            },
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect()
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    match parse_list(s)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(format!("expected two comma-separated numbers, got '{s}'")),
    }
}

/// Options shared by the simulation commands. Later sources win:
/// preset, then `--config` or `--from-manifest`, then individual flags.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// JSON file with any subset of the configuration keys.
    #[arg(long, value_name = "FILE", conflicts_with = "from_manifest")]
    pub config: Option<PathBuf>,
    /// Rerun the configuration stored in a manifest.
    #[arg(long, value_name = "FILE")]
    pub from_manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "CHAIN_TRANSPORT_OUT_DIR", default_value = "output")]
    pub out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,

    /// Chain length (default 201).
    #[arg(long)]
    pub n_sites: Option<usize>,
    /// Coherent coupling (default 1).
    #[arg(long)]
    pub g: Option<f64>,
    /// Site of the initial excitation (default: centre).
    #[arg(long)]
    pub initial_site: Option<usize>,
    /// Disorder strengths, comma separated.
    #[arg(long, value_parser = parse_list)]
    pub delta: Option<FloatList>,
    /// On-site dephasing rates, comma separated.
    #[arg(long, value_parser = parse_list)]
    pub gamma: Option<FloatList>,
    /// Incoherent hopping rates, comma separated.
    #[arg(long, value_parser = parse_list)]
    pub big_gamma: Option<FloatList>,
    /// Disorder realizations per point.
    #[arg(long)]
    pub n_disorder: Option<usize>,
    /// Trajectories per point; 0 solves the master equation.
    #[arg(long)]
    pub n_trajectories: Option<usize>,
    /// Disorder realization used by `trajectory`.
    #[arg(long)]
    pub disorder_index: Option<u64>,
    /// Final time in units of 1/g.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Integration step (default 0.01 / max(g, γ, Γ, Δ, 1)).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Spacing of stored frames.
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Explicit sample times, comma separated.
    #[arg(long, value_parser = parse_list)]
    pub times: Option<FloatList>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fit window `t_min,t_max`.
    #[arg(long, value_parser = parse_pair)]
    pub fit_window: Option<(f64, f64)>,
    /// Truncation tolerance for the active region; 0 integrates the full matrix.
    #[arg(long)]
    pub support_tol: Option<f64>,
}

/// Aliased so clap parses a comma list as one value instead of repeated flags.
type FloatList = Vec<f64>;

/// Manifest fields needed to rerun.
#[derive(Deserialize)]
struct StoredRun {
    command: String,
    config: RunConfig,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl RunArgs {
    pub fn resolve(&self, command: &str) -> anyhow::Result<RunConfig> {
        let mut config = match self.preset {
            Some(p) => {
                if p.command() != command {
                    bail!(
                        "preset {p:?} is for the `{}` command, not `{command}`",
                        p.command()
                    );
                }
                p.config()
            }
            None if command == "trajectory" => RunConfig {
                n_trajectories: 1,
                ..RunConfig::default()
            },
            None => RunConfig::default(),
        };
        if let Some(path) = &self.config {
            config = read_json(path)?;
        }
        if let Some(path) = &self.from_manifest {
            let stored: StoredRun = read_json(path)?;
            if stored.command != command {
                bail!(
                    "manifest {} records a `{}` run, not `{command}`",
                    path.display(),
                    stored.command
                );
            }
            config = stored.config;
        }

        let lists_given = self.delta.is_some() || self.gamma.is_some() || self.big_gamma.is_some();
        if lists_given && config.points.is_some() {
            let grid = config.grid();
            config.points = None;
            config.deltas = unique(grid.iter().map(|p| p.delta));
            config.gammas = unique(grid.iter().map(|p| p.gamma));
            config.big_gammas = unique(grid.iter().map(|p| p.big_gamma));
        }
        macro_rules! set {
            ($field:ident, $flag:expr) => {
                if let Some(v) = $flag.clone() {
                    config.$field = v;
                }
            };
        }
        set!(n_sites, self.n_sites);
        set!(g, self.g);
        set!(deltas, self.delta);
        set!(gammas, self.gamma);
        set!(big_gammas, self.big_gamma);
        set!(n_disorder, self.n_disorder);
        set!(n_trajectories, self.n_trajectories);
        set!(disorder_index, self.disorder_index);
        set!(t_final, self.t_final);
        set!(sample_interval, self.sample_interval);
        set!(master_seed, self.seed);
        set!(support_tol, self.support_tol);
        if self.initial_site.is_some() {
            config.initial_site = self.initial_site;
        }
        if self.dt.is_some() {
            config.dt = self.dt;
        }
        if self.times.is_some() {
            config.sample_times = self.times.clone();
        }
        if let Some((t_min, t_max)) = self.fit_window {
            config.fit_window = FitWindow { t_min, t_max };
        }
        if command == "trajectory" && config.n_trajectories == 0 {
            bail!("the trajectory command needs n_trajectories ≥ 1");
        }
        let config = config.resolved();
        config.sweep_config().validate()?;
        Ok(config)
    }
}

fn unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}
