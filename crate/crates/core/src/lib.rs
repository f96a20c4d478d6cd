//! Contour-regularized segmentation losses for voxel volumes.
//!
//! The crate is organised bottom-up:
//!
//! * [`volume`]: geometry, scalar and label volumes, raw file I/O and
//!   percentile clipping.
//! * [`morphology`]: windowed max/min pooling (naive and separable O(N)) and
//!   the contour operator `max - min` over a cubic window.
//! * [`losses`]: softmax, soft Dice, cross-entropy, contour regularization and
//!   their weighted sum, all with analytic gradients, plus a central-difference
//!   gradient checker.
//! * [`metrics`]: DSC, Hausdorff, average Hausdorff and connected components.
//! * [`experiment`]: synthetic phantoms and the outlier-suppression study.
//! * [`bench`]: wall-clock comparison of the max-pool kernels.
//!
//! Data-parallel loops run on rayon when the `parallel` feature (default) is
//! enabled and fall back to sequential iteration otherwise. Results are
//! identical either way.

pub mod bench;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod morphology;
mod grid;
mod par;
pub mod volume;

pub use error::{Error, Result};
pub use par::current_num_threads;
