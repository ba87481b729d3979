//! Shared inputs for the benchmarks.

use fwelnet::sim::{generate, SimInstance};
use fwelnet::{Setting, SimConfig};

/// Training data and feature information from one simulated run.
pub fn instance(setting: Setting, run: u64) -> SimInstance {
    let cfg = SimConfig {
        n_test: 10,
        ..SimConfig::new(setting)
    };
    generate(&cfg, run).expect("default simulation settings are valid")
}
