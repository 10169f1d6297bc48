//! Volumetric preprocessing and evaluation for chest-CT classification.
//!
//! The crate covers everything around the model itself:
//!
//! * [`slices`] loads per-slice image stacks into dense [`volume::Volume`]s,
//! * [`lungseg`] segments the lungs so scans can be cropped to the region
//!   that matters, and [`resample`] resizes crops onto standard grids,
//! * [`cvol`] persists volumes in a simple binary format,
//! * [`loss`] implements the focal plus earth-mover training objective with
//!   analytic gradients, [`augment`] the training-time transforms,
//! * [`manifest`], [`folds`], and [`metrics`] handle dataset bookkeeping,
//!   stratified cross-validation splits, and macro-F1 scoring,
//! * [`phantom`] generates synthetic scans for tests and benchmarks.
//!
//! Heavy per-voxel work is data-parallel when the `rayon` feature (on by
//! default) is enabled; results are identical with or without it.

pub mod augment;
pub mod cvol;
mod error;
pub mod folds;
pub mod loss;
pub mod lungseg;
pub mod manifest;
pub mod metrics;
pub mod phantom;
pub mod resample;
pub mod slices;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{HuWindow, Volume};
