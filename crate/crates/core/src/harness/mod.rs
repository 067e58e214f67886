//! Scenario loading, the episode loop, and trace output.

pub mod config;
pub mod consistency;
pub mod episode;
pub mod frames;
pub mod trace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{load_scenario, parse_scenario, FilterKind, ScenarioConfig, ScenarioError};
pub use episode::{run_episode, run_episode_with, Episode, FrameView, Summary, TraceRecord};
pub use trace::{format_g9, write_trace_csv, TRACE_COLUMNS};

/// Independent random streams derived from one seed, so that enabling one
/// noise source does not shift the draws of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    SensorNoise = 1,
    Detection = 2,
    MonteCarlo = 3,
}

pub fn substream(seed: u64, stream: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
