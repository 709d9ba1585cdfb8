//! `manetsim`: run one scenario, the full grid, or write a synthetic clip.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 simulation error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use manetsim_core::experiment::{grid_cells, run_grid, GridSpec};
use manetsim_core::scenario::{
    run_scenario_with, ConfigError, Mobility, Protocol, RunError, RunOptions, ScenarioConfig,
};
use manetsim_core::video::synth::synth_sequence;
use manetsim_core::video::{load_yuv, store_yuv, YuvError, YuvSequence};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "manetsim", version, about = "Video streaming over simulated MANETs (AODV/DSDV)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a single scenario and write its artifacts to --out.
    Run(RunArgs),
    /// Run every grid cell (and the mobility cells) in parallel.
    Grid(GridArgs),
    /// Write the synthetic test clip as raw I420.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file in `key = value` form.
    #[arg(long, env = "MANETSIM_CONFIG")]
    config: Option<PathBuf>,
    /// Raw I420 source clip. Without it a synthetic clip is generated.
    #[arg(long, env = "MANETSIM_YUV")]
    yuv: Option<PathBuf>,
    /// Frame width of --yuv, or of the synthetic clip.
    #[arg(long, env = "MANETSIM_WIDTH")]
    width: Option<usize>,
    #[arg(long, env = "MANETSIM_HEIGHT")]
    height: Option<usize>,
    /// Frames to stream (overrides n_frames from the config).
    #[arg(long, env = "MANETSIM_FRAMES")]
    frames: Option<usize>,
    #[arg(long, env = "MANETSIM_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "MANETSIM_OUT")]
    out: PathBuf,
    /// Moving-average window for the smoothed series.
    #[arg(long, env = "MANETSIM_WINDOW", default_value_t = 100)]
    window: usize,
    /// Minimum decodable ratio for a run to count as extractable.
    #[arg(long, env = "MANETSIM_THETA", default_value_t = 0.05)]
    theta: f64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, env = "MANETSIM_PROTOCOL")]
    protocol: Option<Protocol>,
    #[arg(long, env = "MANETSIM_NODES")]
    nodes: Option<usize>,
    #[arg(long, env = "MANETSIM_SPACING")]
    spacing: Option<f64>,
    /// static, outward or inward.
    #[arg(long, env = "MANETSIM_MOBILITY")]
    mobility: Option<Mobility>,
    /// Also write the full event log (events.log).
    #[arg(long)]
    event_log: bool,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "MANETSIM_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Skip the mobility cells.
    #[arg(long)]
    static_only: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    frames: usize,
    #[arg(long, default_value_t = SYNTH_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = SYNTH_HEIGHT)]
    height: usize,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Yuv(#[from] YuvError),
    #[error("simulation: {0}")]
    Sim(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Yuv(YuvError::BadDimensions { .. }) => 1,
            CliError::Io { .. } | CliError::Yuv(_) => 2,
            CliError::Sim(_) => 3,
        }
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            other => CliError::Sim(other.to_string()),
        }
    }
}

const SYNTH_WIDTH: usize = 176;
const SYNTH_HEIGHT: usize = 144;

fn load_config(common: &Common) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ScenarioConfig::parse(&fs::read_to_string(p).map_err(CliError::io(p))?)?,
        None => ScenarioConfig::default(),
    };
    if let Some(f) = common.frames {
        cfg.n_frames = f;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if !(common.theta.is_finite() && (0.0..=1.0).contains(&common.theta)) {
        return Err(CliError::Config(format!("theta {} is outside [0, 1]", common.theta)));
    }
    if common.window == 0 {
        return Err(CliError::Config("window must be at least 1".into()));
    }
    Ok(cfg)
}

fn load_source(common: &Common, n_frames: usize) -> Result<YuvSequence, CliError> {
    match &common.yuv {
        Some(p) => {
            let (Some(w), Some(h)) = (common.width, common.height) else {
                return Err(CliError::Config("--yuv needs --width and --height".into()));
            };
            let mut seq = load_yuv(p, w, h)?;
            if seq.len() < n_frames {
                return Err(CliError::Config(format!("{} has {} frames, need {n_frames}", p.display(), seq.len())));
            }
            seq.truncate(n_frames);
            Ok(seq)
        }
        None => {
            Ok(synth_sequence(n_frames, common.width.unwrap_or(SYNTH_WIDTH), common.height.unwrap_or(SYNTH_HEIGHT))?)
        }
    }
}

fn options(common: &Common, event_log: bool) -> RunOptions {
    RunOptions { theta: common.theta, event_log, ..RunOptions::default() }
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.common)?;
    if let Some(p) = a.protocol {
        cfg.protocol = p;
    }
    if let Some(n) = a.nodes {
        cfg.n_nodes = n;
    }
    if let Some(d) = a.spacing {
        cfg.spacing = d;
    }
    if let Some(m) = a.mobility {
        cfg.mobility = m;
        if let Some((d0, _)) = m.span() {
            cfg.spacing = d0;
        }
    }
    cfg.validate()?;
    let src = load_source(&a.common, cfg.n_frames)?;
    let t = Instant::now();
    let r = run_scenario_with(&cfg, &src, &options(&a.common, a.event_log))?;
    r.write_outputs(&a.common.out, a.common.window).map_err(CliError::io(&a.common.out))?;
    print!("{}", r.summary());
    eprintln!("wrote {} in {:.2?}", a.common.out.display(), t.elapsed());
    Ok(())
}

fn cmd_grid(a: GridArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.common)?;
    cfg.validate()?;
    let src = load_source(&a.common, cfg.n_frames)?;
    let spec = GridSpec {
        cells: grid_cells(!a.static_only),
        options: options(&a.common, false),
        window: a.common.window,
        jobs: a.jobs,
        ..GridSpec::new(cfg)
    };
    let t = Instant::now();
    let report = run_grid(&spec, &src, Some(&a.common.out)).map_err(|e| CliError::Sim(e.to_string()))?;
    print!("{}", report.extractability_tsv());
    let failed: Vec<String> = report.failures().map(|r| r.cell.label()).collect();
    eprintln!("{} cells in {:.2?}, results in {}", report.results.len(), t.elapsed(), a.common.out.display());
    if !failed.is_empty() {
        return Err(CliError::Sim(format!("{} cell(s) failed: {}", failed.len(), failed.join(", "))));
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let seq = synth_sequence(a.frames, a.width, a.height)?;
    store_yuv(&seq, &a.out)?;
    eprintln!("wrote {} frames of {}x{} to {}", a.frames, a.width, a.height, a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
