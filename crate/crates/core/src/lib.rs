//! Deterministic procedural urban-scene streams.
//!
//! A stream is generated tile by tile from a seeded scene model, driven by a
//! camera vehicle, rendered in software into color, semantic, depth and
//! normal buffers, and cut into single-object classification patches.

pub mod assets;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod extract;
pub mod geometry;
pub mod model;
pub mod output;
pub mod presets;
pub mod render;
pub mod rng;
pub mod stream;
pub mod tiles;
pub mod transforms;

pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_TREE: u8 = 1;
pub const LABEL_LAMP: u8 = 2;
pub const LABEL_HUMAN: u8 = 3;
pub const LABEL_VEHICLE: u8 = 4;
pub const LABEL_SKY: u8 = 255;

pub use config::{parse_config, StreamConfig};
pub use error::{ConfigError, StreamError};
pub use presets::{build_preset, Preset, Split};
pub use stream::{run_stream, RunOptions, RunSummary};
