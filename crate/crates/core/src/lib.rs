//! Full-wave near-field MIMO-OFDM channel simulator.
//!
//! The crate generates extended-target echo tensors for a cross-shaped
//! transmit/receive array by solving a discretized volume integral equation
//! per (frame, subcarrier), then turns the resulting channel tensors into
//! classifier-facing features and a reproducible on-disk dataset.
//!
//! Module map:
//!
//! - [`em`]: free-space Green's functions and dipole fields.
//! - [`array`]: transmit/receive aperture geometry.
//! - [`scene`]: procedural vehicle models, materials, trajectories and voxel snapshots.
//! - [`solver`]: dense and FFT-accelerated VIE solvers for the total-field transfer matrices.
//! - [`channel`]: channel matrices, noise calibration and dwell tensors.
//! - [`features`]: subcarrier selection, real/imag stacking, normalization and 4-D FFT maps.
//! - [`dataset`]: binary sample format, manifest, stratified splits and dataset generation.
//! - [`config`]: the experiment configuration file schema.
//! - [`validate`] / [`bench`]: physics validation suite and solver timing table.
//!
//! All quantities are SI. The time convention is `e^{+jωt}`, so outgoing
//! waves carry `e^{-jk0R}`.

pub mod array;
pub mod bench;
pub mod channel;
pub mod config;
pub mod dataset;
pub mod em;
mod error;
pub mod features;
mod fft;
mod par;
pub mod scene;
pub mod solver;
pub mod validate;

pub use error::{Error, Result};
pub use num_complex::Complex64;
