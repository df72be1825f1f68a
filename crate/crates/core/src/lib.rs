//! Spherical view transforms for equirectangular (ERP) panoramas.
//!
//! The crate covers four areas:
//!
//! * [`geometry`] and [`mobius`]: ERP pixels, the unit sphere and the extended
//!   complex plane, plus Möbius rotations and zooms acting on them.
//! * [`remap`] and [`viewport`]: dense backward-warp fields for whole-panorama
//!   view transforms and gnomonic viewport extraction.
//! * [`stats`] and [`metrics`]: per-mask 360° statistics and salient object
//!   detection scores.
//! * [`fusion`]: view-transformer branches over feature grids with
//!   sample-adaptive weighted concatenation.
//!
//! The [`cli`] module is the batch front end used by the `sphereview` binary.

pub mod cli;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod mobius;
pub mod remap;
pub mod stats;
pub mod viewport;

pub use error::{Error, Result};
pub use geometry::{GridDims, PixelCoord, PlanePoint, SphericalPoint, UnitVector3};
pub use mobius::MobiusTransform;
pub use remap::{ErpImage, FeatureGrid, Grid, Interpolation, RemapField};
