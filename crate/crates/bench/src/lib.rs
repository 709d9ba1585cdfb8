//! Shared fixtures for the benchmarks.

use manetsim_core::scenario::{Protocol, ScenarioConfig};
use manetsim_core::video::synth::synth_sequence;
use manetsim_core::YuvSequence;

pub fn qcif_clip(frames: usize) -> YuvSequence {
    synth_sequence(frames, 176, 144).expect("even dimensions")
}

pub fn small_scenario(protocol: Protocol, n_nodes: usize, spacing: f64, frames: usize) -> ScenarioConfig {
    ScenarioConfig { protocol, n_nodes, spacing, n_frames: frames, ..Default::default() }
}
