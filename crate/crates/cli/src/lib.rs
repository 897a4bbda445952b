//! File formats and command implementations behind the `irisnp` binary.
//!
//! All documents are line oriented with a versioned header and `#` comments:
//! scenes ([`scene_file`]), regions ([`region_file`]) and seed lists
//! ([`seeds`]). [`commands`] runs the region tools on parsed inputs and
//! [`plot`] renders configuration-space slices as SVG.

pub mod commands;
pub mod error;
pub mod plot;
pub mod region_file;
pub mod scene_file;
pub mod seeds;
mod text;

pub use error::{CliError, Result};
pub use region_file::{parse_region, write_region, RegionFile};
pub use scene_file::{parse_scene, SceneFile};

use std::path::Path;

pub fn load_scene(path: &Path) -> Result<SceneFile> {
    parse_scene(&path.display().to_string(), &error::read_file(path)?)
}

pub fn load_region(path: &Path) -> Result<RegionFile> {
    parse_region(&path.display().to_string(), &error::read_file(path)?)
}

pub fn save_region(path: &Path, region: &RegionFile) -> Result<()> {
    error::write_file(path, &write_region(region))
}

pub fn save_text(path: &Path, text: &str) -> Result<()> {
    error::write_file(path, text)
}

pub fn load_seeds(path: &Path, dim: usize) -> Result<Vec<irisnp::DVector<f64>>> {
    seeds::parse_seeds(&path.display().to_string(), &error::read_file(path)?, dim)
}
