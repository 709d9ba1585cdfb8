pub mod config;
pub mod net;
pub mod run;
pub mod topology;

pub use config::{ConfigError, Mobility, Protocol, ScenarioConfig};
pub use net::{NetOutcome, Network};
pub use run::{run_scenario, run_scenario_with, RunError, RunOptions, RunResult};
pub use topology::{matrix_topology, MobilityPlan};
