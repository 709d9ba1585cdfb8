//! The density/sparsity grid: every protocol over every (N, D) cell plus the
//! two mobility runs, executed in parallel with per-cell derived seeds.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::scenario::{run_scenario_with, Mobility, Protocol, RunOptions, RunResult, ScenarioConfig};
use crate::sim::derive_seed;
use crate::video::metrics::{mean, moving_average};
use crate::video::YuvSequence;

pub const GRID_NODES: [usize; 7] = [4, 9, 16, 25, 36, 49, 64];
pub const GRID_SPACINGS: [f64; 4] = [20.0, 50.0, 100.0, 150.0];
pub const PROTOCOLS: [Protocol; 2] = [Protocol::Aodv, Protocol::Dsdv];
pub const MOBILITY_NODES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub protocol: Protocol,
    pub n_nodes: usize,
    pub spacing: f64,
    pub mobility: Mobility,
}

impl Cell {
    pub fn fixed(protocol: Protocol, n_nodes: usize, spacing: f64) -> Self {
        Cell { protocol, n_nodes, spacing, mobility: Mobility::Static }
    }

    pub fn mobile(protocol: Protocol, n_nodes: usize, mobility: Mobility) -> Self {
        let spacing = mobility.span().map_or(0.0, |s| s.0);
        Cell { protocol, n_nodes, spacing, mobility }
    }

    /// Directory name and seed label, e.g. `aodv_n25_d100` or `dsdv_n25_inward`.
    pub fn label(&self) -> String {
        let p = self.protocol.as_str().to_ascii_lowercase();
        if self.mobility.is_static() {
            format!("{p}_n{}_d{}", self.n_nodes, self.spacing)
        } else {
            format!("{p}_n{}_{}", self.n_nodes, self.mobility.as_str())
        }
    }

    pub fn config(&self, base: &ScenarioConfig) -> ScenarioConfig {
        ScenarioConfig {
            protocol: self.protocol,
            n_nodes: self.n_nodes,
            spacing: self.spacing,
            mobility: self.mobility,
            seed: derive_seed(base.seed, &self.label()),
            ..base.clone()
        }
    }
}

/// The 56 static cells, followed by the mobility cells when requested.
pub fn grid_cells(with_mobility: bool) -> Vec<Cell> {
    let mut cells = Vec::new();
    for p in PROTOCOLS {
        for n in GRID_NODES {
            for d in GRID_SPACINGS {
                cells.push(Cell::fixed(p, n, d));
            }
        }
    }
    if with_mobility {
        for p in PROTOCOLS {
            cells.push(Cell::mobile(p, MOBILITY_NODES, Mobility::OUTWARD));
            cells.push(Cell::mobile(p, MOBILITY_NODES, Mobility::INWARD));
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub seed: u64,
    pub decodable_ratio: f64,
    pub extractable: bool,
    pub mean_psnr_db: f64,
    pub mean_abs_jitter_s: Option<f64>,
    pub loss_rate: f64,
    pub first_frame_s: Option<f64>,
    /// Mean of the smoothed PSNR over the first and last quarter of frames.
    pub psnr_q1_db: f64,
    pub psnr_q4_db: f64,
    /// Stored routing sequence numbers that would have gone backwards.
    pub seq_regressions: u64,
}

impl CellSummary {
    pub fn from_run(r: &RunResult, window: usize) -> Self {
        let smooth = moving_average(&r.metrics.psnr_db, window);
        let q = smooth.len() / 4;
        CellSummary {
            seed: r.config.seed,
            decodable_ratio: r.metrics.decodable_ratio,
            extractable: r.metrics.extractable,
            mean_psnr_db: r.metrics.mean_psnr(),
            mean_abs_jitter_s: r.metrics.mean_abs_jitter(),
            loss_rate: r.metrics.loss_rate,
            first_frame_s: r.first_frame_s,
            psnr_q1_db: mean(&smooth[..q]),
            psnr_q4_db: mean(&smooth[smooth.len() - q..]),
            seq_regressions: r.net.seq_regressions,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: Result<CellSummary, String>,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub base: ScenarioConfig,
    pub cells: Vec<Cell>,
    pub options: RunOptions,
    /// Moving-average window for the smoothed series.
    pub window: usize,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl GridSpec {
    pub fn new(base: ScenarioConfig) -> Self {
        GridSpec { base, cells: grid_cells(true), options: RunOptions::default(), window: 100, jobs: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub results: Vec<CellResult>,
}

/// Runs every cell. Per-cell failures are recorded in the report rather than
/// aborting the grid. With `out_dir`, each cell's artifacts go to
/// `out_dir/<label>/` and the two summary tables to `out_dir`.
pub fn run_grid(spec: &GridSpec, source: &YuvSequence, out_dir: Option<&Path>) -> Result<GridReport, GridError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.jobs).build()?;
    let results: Vec<CellResult> = pool.install(|| {
        spec.cells
            .par_iter()
            .map(|cell| {
                let cfg = cell.config(&spec.base);
                let outcome = run_scenario_with(&cfg, source, &spec.options).map_err(|e| e.to_string()).and_then(|r| {
                    if let Some(dir) = out_dir {
                        r.write_outputs(&dir.join(cell.label()), spec.window).map_err(|e| e.to_string())?;
                    }
                    Ok(CellSummary::from_run(&r, spec.window))
                });
                CellResult { cell: *cell, outcome }
            })
            .collect()
    });
    let report = GridReport { results };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("extractability.tsv"), report.extractability_tsv())?;
        fs::write(dir.join("comparison.csv"), report.comparison_csv())?;
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl GridReport {
    pub fn find(&self, protocol: Protocol, n_nodes: usize, spacing: f64) -> Option<&CellResult> {
        self.results.iter().find(|r| {
            r.cell.mobility.is_static()
                && r.cell.protocol == protocol
                && r.cell.n_nodes == n_nodes
                && r.cell.spacing == spacing
        })
    }

    pub fn find_mobile(&self, protocol: Protocol, mobility: &str) -> Option<&CellResult> {
        self.results.iter().find(|r| r.cell.protocol == protocol && r.cell.mobility.as_str() == mobility)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.results.iter().filter(|r| r.outcome.is_err())
    }

    /// Y/N extractability per (N, D, protocol), with the decodable ratio in
    /// parentheses. One row per N, one column per (D, protocol).
    pub fn extractability_tsv(&self) -> String {
        let mut s = String::from("N");
        for d in GRID_SPACINGS {
            for p in PROTOCOLS {
                let _ = write!(s, "\tD={d} {p}");
            }
        }
        s.push('\n');
        for n in GRID_NODES {
            let _ = write!(s, "{n}");
            for d in GRID_SPACINGS {
                for p in PROTOCOLS {
                    let cell = match self.find(p, n, d).map(|r| &r.outcome) {
                        Some(Ok(c)) => format!("{} ({:.3})", if c.extractable { "Y" } else { "N" }, c.decodable_ratio),
                        Some(Err(_)) => "ERR".to_string(),
                        None => "-".to_string(),
                    };
                    let _ = write!(s, "\t{cell}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn comparison_csv(&self) -> String {
        let mut s = String::from(
            "label,protocol,n_nodes,spacing,mobility,seed,decodable_ratio,extractable,mean_psnr_db,\
             mean_abs_jitter_s,loss_rate,first_frame_s,psnr_q1_db,psnr_q4_db,seq_regressions,error\n",
        );
        for r in &self.results {
            let c = &r.cell;
            let _ = write!(s, "{},{},{},{},{},", c.label(), c.protocol, c.n_nodes, c.spacing, c.mobility.as_str());
            match &r.outcome {
                Ok(m) => {
                    let _ = writeln!(
                        s,
                        "{},{:.6},{},{:.6},{},{:.6},{},{:.6},{:.6},{},",
                        m.seed,
                        m.decodable_ratio,
                        if m.extractable { "Y" } else { "N" },
                        m.mean_psnr_db,
                        opt(m.mean_abs_jitter_s),
                        m.loss_rate,
                        opt(m.first_frame_s),
                        m.psnr_q1_db,
                        m.psnr_q4_db,
                        m.seq_regressions,
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, ",,,,,,,,,,\"{}\"", e.replace('"', "'"));
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::synth::synth_sequence;

    #[test]
    fn grid_has_56_static_and_4_mobile_cells() {
        let cells = grid_cells(true);
        assert_eq!(cells.len(), 60);
        assert_eq!(cells.iter().filter(|c| c.mobility.is_static()).count(), 56);
        let labels: std::collections::HashSet<String> = cells.iter().map(Cell::label).collect();
        assert_eq!(labels.len(), 60);
        assert_eq!(Cell::fixed(Protocol::Aodv, 25, 100.0).label(), "aodv_n25_d100");
        assert_eq!(Cell::mobile(Protocol::Dsdv, 25, Mobility::INWARD).label(), "dsdv_n25_inward");
    }

    #[test]
    fn cell_seeds_differ_and_follow_base() {
        let base = ScenarioConfig::default();
        let a = Cell::fixed(Protocol::Aodv, 4, 20.0).config(&base);
        let b = Cell::fixed(Protocol::Aodv, 4, 50.0).config(&base);
        assert_ne!(a.seed, b.seed);
        let c = Cell::fixed(Protocol::Aodv, 4, 20.0).config(&ScenarioConfig { seed: 2, ..base });
        assert_ne!(a.seed, c.seed);
    }

    #[test]
    fn failed_cell_is_recorded() {
        let src = synth_sequence(30, 32, 32).unwrap();
        let base = ScenarioConfig { n_frames: 30, ..Default::default() };
        let spec = GridSpec {
            cells: vec![Cell::fixed(Protocol::Aodv, 4, 20.0), Cell::fixed(Protocol::Aodv, 5, 20.0)],
            jobs: 2,
            ..GridSpec::new(base)
        };
        let dir = tempfile::tempdir().unwrap();
        let rep = run_grid(&spec, &src, Some(dir.path())).unwrap();
        assert!(rep.results[0].outcome.is_ok());
        assert!(rep.results[1].outcome.is_err());
        assert_eq!(rep.failures().count(), 1);
        assert!(dir.path().join("aodv_n4_d20/summary.txt").exists());
        let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        let tsv = fs::read_to_string(dir.path().join("extractability.tsv")).unwrap();
        assert!(tsv.lines().nth(1).unwrap().starts_with("4\tY (1.000)"));
    }
}
