//! File formats, configuration, overlay rendering and the `cuboid` command
//! line around [`cuboid_core`].

pub mod cli;
pub mod config;
pub mod label;
pub mod render;
pub mod report;
pub mod scene_io;

pub use config::PipelineConfig;
pub use label::Label3D;
pub use scene_io::{load_scene, LoadedScene};
