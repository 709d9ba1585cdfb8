//! Deterministic discrete-event simulator for video streaming over mobile
//! ad-hoc networks, with AODV and DSDV routing and PSNR-based evaluation.

pub mod aodv;
pub mod dsdv;
pub mod experiment;
pub mod mac;
pub mod packet;
pub mod phy;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod video;

pub type NodeId = usize;

pub use experiment::{run_grid, Cell, GridReport, GridSpec};
pub use scenario::{
    run_scenario, run_scenario_with, Mobility, Protocol, RunError, RunOptions, RunResult, ScenarioConfig,
};
pub use sim::{derive_seed, RngStream, SimTime};
pub use video::{Concealment, YuvSequence};
