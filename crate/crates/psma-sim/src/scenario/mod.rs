//! Scenario generation: declarative network configuration, topology,
//! channel realizations and codebook structures.
//!
//! Everything here is a pure function of `(config, seed)`, so repeated runs
//! with the same inputs reproduce the same network byte for byte.

mod channel;
mod codebook;
mod config;
mod topology;

pub use channel::{sample_channels, ChannelRealization};
pub use codebook::{build_codebook_structure, CodebookStructure, EtaPolicy};
pub use config::{load_scenario, parse_scenario_str, ScenarioConfig, Scheme};
pub use topology::{build_topology, Topology};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive a decorrelated RNG for one generator stage.
///
/// Each stage (topology, fading, ...) gets its own stream so adding draws to
/// one stage never shifts another stage's output.
pub(crate) fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stage))
}
