//! Decentralised multi-agent search-and-track simulation.
//!
//! A team of mobile agents with footprint-limited range/bearing sensors
//! searches a square area for an unknown, time-varying number of moving
//! targets, and tracks the ones it finds. Each agent keeps a particle PHD
//! filter over true targets and a decaying search grid over the area,
//! plans search walks (cooperatively when in communication range), picks
//! tracking moves by expected information gain, and resolves redundant
//! tracking through an overlap score.

pub mod config;
pub mod error;
pub mod metrics;
pub mod overlap;
pub mod phd;
pub mod planner;
pub mod presets;
pub mod search;
pub mod sim;
pub mod track;
pub mod world;

pub use config::{load_config, save_config, ScenarioConfig};
pub use error::{Error, Result};
pub use presets::{list_presets, run_experiment, Preset, RunOptions};
