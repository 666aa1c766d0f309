//! Procedural extended targets, trajectories and per-frame voxel snapshots.

mod material;
mod motion;
mod snapshot;
mod target;

pub use material::{Material, MaterialTable, PartTag};
pub use motion::{animate, ScenarioConfig, ScenarioSampler};
pub use snapshot::{LatticeFrame, ScattererSnapshot};
pub use target::{build_target, BodyParams, GeometryParams, TargetClass, TargetModel, TemplateVoxel, Wheel};

/// Voxel side must not exceed this fraction of the shortest wavelength.
pub const MAX_PITCH_PER_WAVELENGTH: f64 = 1.0 / 8.0;
