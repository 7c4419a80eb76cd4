//! Volumetric toolkit for clinically guided myocardial scar synthesis.
//!
//! - [`volume`], [`nrrd`], [`preprocess`]: voxel grids, file IO and
//!   normalisation.
//! - [`register`]: mutual-information rigid registration, symmetric-forces
//!   demons and warping.
//! - [`atlas`]: AHA 17-segment partition, adjacency and bull's-eye reports.
//! - [`maskgen`]: atlas-guided scar mask generation.
//! - [`diffusion`]: DDPM schedule, masked noise loss and the
//!   background-preserving inpainting sampler.
//! - [`metrics`]: overlap metrics, segmentation losses and volume statistics.
//! - [`phantom`]: synthetic test anatomy.

pub mod atlas;
pub mod diffusion;
pub mod error;
pub mod filter;
pub mod maskgen;
pub mod metrics;
pub mod nrrd;
pub mod phantom;
pub mod preprocess;
pub mod register;
pub mod rng;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{Geometry, Grid, LabelVolume, Mask3, Orientation, Volume3, Voxel};
