//! Desk-scale outlier-suppression experiment.
//!
//! A free per-voxel logit field is fitted by gradient descent to phantom
//! labels that contain isolated false-tumor speckles. Comparing the fitted
//! tumor masks with and without the contour term shows whether the term
//! removes those isolated components.

mod optimize;
mod phantom;
mod study;

pub use optimize::{optimize_logits, OptimizerConfig, DEFAULT_LEARNING_RATE};
pub use phantom::{make_phantom, Phantom, PhantomSpec};
pub use study::{
    run_outlier_study, run_study, trace_converged, AlphaSummary, RunStatus, StudyReport, StudyRow, Targets,
    DSC_TOLERANCE,
};
