//! Core algorithms for exposing face-swap imagery through inconsistent head poses.
//!
//! A head pose is estimated twice from 68-point facial landmarks: once from the
//! whole face and once from the central face region only. Face swaps replace the
//! central region, so the two estimates drift apart; the difference is turned into
//! a feature vector and classified with an RBF-kernel SVM.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! tool and any parallelism live in the `headpose` companion crate.
//!
//! Module map:
//!
//! - [`geometry`]: points, intrinsics, rotations, projection.
//! - [`pnp`]: Levenberg-Marquardt perspective-n-point solver.
//! - [`face_model`]: the canonical 68-point face and landmark index sets.
//! - [`features`]: dual pose estimation, the six feature variants, standardization.
//! - [`svm`]: SMO-trained soft-margin SVM and cross-validated grid search.
//! - [`classifier`]: a trained SVM bundled with its feature variant and standardization.
//! - [`eval`]: AUROC, ROC curves, per-video aggregation, cosine-distance histograms.
//! - [`synth`]: seeded synthetic landmark datasets and the end-to-end experiment.
//! - [`seed`]: named sub-seeds.

#![no_std]
// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod eval;
pub mod face_model;
pub mod features;
pub mod geometry;
mod linalg;
pub mod pnp;
pub mod seed;
pub mod svm;
pub mod synth;

pub use classifier::HeadPoseClassifier;
pub use face_model::{CanonicalFaceModel, LandmarkIndexSet};
pub use features::{DualPose, FaceObservation, FeatureVariant, FeatureVector, Label};
pub use geometry::{CameraIntrinsics, ImagePoint, Pose, RodriguesVector, Rotation, WorldPoint};
pub use pnp::{solve_pnp, PnpSolution};
