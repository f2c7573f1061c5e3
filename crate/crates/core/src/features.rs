//! Dual head-pose estimation and the pose-difference feature variants.

use crate::face_model::{
    central_indices, whole_face_indices, CanonicalFaceModel, LandmarkIndexSet, NUM_LANDMARKS,
};
use crate::geometry::{head_orientation, CameraIntrinsics, GeometryError, ImagePoint, Pose};
use crate::pnp::{default_initial_pose, solve_pnp, PnpError};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use thiserror::Error;

/// Floor applied to every standard deviation.
pub const EPS_STD: f64 = 1e-12;

/// Landmark sets whose image-space extent is below this (pixels) are degenerate.
const MIN_LANDMARK_EXTENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Real,
    Fake,
    Unknown,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Fake => "fake",
            Label::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "real" => Ok(Label::Real),
            "fake" => Ok(Label::Fake),
            "unknown" => Ok(Label::Unknown),
            other => Err(FeatureError::UnknownLabel(other.into())),
        }
    }
}

/// Which landmark subset a pose was estimated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Whole,
    Central,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Whole => "whole-face",
            Region::Central => "central",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseFailure {
    #[error(transparent)]
    Pnp(#[from] PnpError),
    #[error("solver did not converge (rms {rms} px after {iterations} iterations)")]
    NotConverged { rms: f64, iterations: usize },
    #[error("landmarks collapse to a single point")]
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("observation {id}: {reason}")]
    InvalidObservation { id: String, reason: String },
    #[error("observation {id}: {region} pose estimation failed: {source}")]
    Pose {
        id: String,
        region: Region,
        source: PoseFailure,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("unknown feature variant {0:?}")]
    UnknownVariant(String),
    #[error("standardization needs at least one feature vector")]
    EmptyFeatures,
    #[error("mixed feature variants ({0} and {1})")]
    MixedVariants(FeatureVariant, FeatureVariant),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid standardization statistics: {0}")]
    InvalidStats(&'static str),
}

/// One face: 68 landmarks (index `k` holds landmark `k + 1`) plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceObservation {
    pub id: String,
    pub video_id: Option<String>,
    pub label: Label,
    pub image_width: u32,
    pub image_height: u32,
    pub landmarks: Vec<ImagePoint>,
}

impl FaceObservation {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let invalid = |reason: String| FeatureError::InvalidObservation {
            id: self.id.clone(),
            reason,
        };
        if self.landmarks.len() != NUM_LANDMARKS {
            return Err(invalid(alloc::format!(
                "expected {NUM_LANDMARKS} landmarks, got {}",
                self.landmarks.len()
            )));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(invalid("image dimensions must be positive".into()));
        }
        if let Some(i) = self.landmarks.iter().position(|p| !p.is_finite()) {
            return Err(invalid(alloc::format!("landmark {} is not finite", i + 1)));
        }
        Ok(())
    }

    pub fn select(&self, idx: &LandmarkIndexSet) -> Vec<ImagePoint> {
        idx.indices()
            .iter()
            .map(|&i| self.landmarks[i - 1])
            .collect()
    }
}

/// Head poses from the whole face (`R_a`, `t_a`) and the central region (`R_c`, `t_c`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPose {
    pub whole: Pose,
    pub central: Pose,
    pub whole_rms: f64,
    pub central_rms: f64,
}

impl DualPose {
    /// Cosine distance between the two head orientation vectors.
    pub fn orientation_distance(&self) -> f64 {
        // rows of rotation matrices are unit vectors, never zero
        crate::geometry::cosine_distance(
            &head_orientation(&self.whole.rotation),
            &head_orientation(&self.central.rotation),
        )
        .unwrap_or(0.0)
    }
}

/// Focal length equal to the image width, principal point at the image center.
pub fn default_intrinsics(width: u32, height: u32) -> Result<CameraIntrinsics, GeometryError> {
    let (w, h) = (width as f64, height as f64);
    CameraIntrinsics::new(w, w, w / 2.0, h / 2.0)
}

/// Estimates the whole-face pose, then the central-region pose warm-started from it.
pub fn estimate_dual_pose(
    obs: &FaceObservation,
    model: &CanonicalFaceModel,
) -> Result<DualPose, FeatureError> {
    obs.validate()?;
    let cam = default_intrinsics(obs.image_width, obs.image_height)?;
    let fail = |region, source| FeatureError::Pose {
        id: obs.id.clone(),
        region,
        source,
    };

    let whole_idx = whole_face_indices();
    let world = model.select(&whole_idx);
    let image = obs.select(&whole_idx);
    let init = default_initial_pose(&world, &image, &cam);
    let (whole, whole_rms) =
        solve_region(&world, &image, &cam, &init).map_err(|e| fail(Region::Whole, e))?;

    let central_idx = central_indices();
    let world = model.select(&central_idx);
    let image = obs.select(&central_idx);
    let (central, central_rms) =
        solve_region(&world, &image, &cam, &whole).map_err(|e| fail(Region::Central, e))?;

    Ok(DualPose {
        whole,
        central,
        whole_rms,
        central_rms,
    })
}

fn solve_region(
    world: &[crate::geometry::WorldPoint],
    image: &[ImagePoint],
    cam: &CameraIntrinsics,
    init: &Pose,
) -> Result<(Pose, f64), PoseFailure> {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in image {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    }
    if (hi[0] - lo[0]).max(hi[1] - lo[1]) < MIN_LANDMARK_EXTENT {
        return Err(PoseFailure::Degenerate);
    }
    let sol = solve_pnp(world, image, cam, init)?;
    if !sol.converged || !sol.final_rms_reprojection_error.is_finite() {
        return Err(PoseFailure::NotConverged {
            rms: sol.final_rms_reprojection_error,
            iterations: sol.iterations,
        });
    }
    Ok((sol.pose, sol.final_rms_reprojection_error))
}

/// The six pose-difference feature variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureVariant {
    /// `v_a - v_c`, head orientation difference.
    V,
    /// `r_a - r_c`, Rodrigues vector difference.
    RVec,
    /// `R_a - R_c`, flattened row-major.
    RMat,
    VT,
    RVecT,
    RMatT,
}

impl FeatureVariant {
    pub const ALL: [FeatureVariant; 6] = [
        FeatureVariant::V,
        FeatureVariant::RVec,
        FeatureVariant::RMat,
        FeatureVariant::VT,
        FeatureVariant::RVecT,
        FeatureVariant::RMatT,
    ];

    pub fn dimension(&self) -> usize {
        match self {
            FeatureVariant::V | FeatureVariant::RVec => 3,
            FeatureVariant::RMat => 9,
            FeatureVariant::VT | FeatureVariant::RVecT => 6,
            FeatureVariant::RMatT => 12,
        }
    }

    pub fn includes_translation(&self) -> bool {
        matches!(
            self,
            FeatureVariant::VT | FeatureVariant::RVecT | FeatureVariant::RMatT
        )
    }

    /// The rotation-only variant this one extends.
    pub fn base(&self) -> FeatureVariant {
        match self {
            FeatureVariant::VT => FeatureVariant::V,
            FeatureVariant::RVecT => FeatureVariant::RVec,
            FeatureVariant::RMatT => FeatureVariant::RMat,
            other => *other,
        }
    }

    pub fn with_translation(&self) -> FeatureVariant {
        match self {
            FeatureVariant::V => FeatureVariant::VT,
            FeatureVariant::RVec => FeatureVariant::RVecT,
            FeatureVariant::RMat => FeatureVariant::RMatT,
            other => *other,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureVariant::V => "V",
            FeatureVariant::RVec => "R_VEC",
            FeatureVariant::RMat => "R_MAT",
            FeatureVariant::VT => "V_T",
            FeatureVariant::RVecT => "RVEC_T",
            FeatureVariant::RMatT => "RMAT_T",
        }
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureVariant {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FeatureError::UnknownVariant(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub variant: FeatureVariant,
    pub values: Vec<f64>,
    pub id: String,
    pub video_id: Option<String>,
    pub label: Label,
}

/// Raw (unstandardized) feature values for `variant`.
pub fn feature_values(dp: &DualPose, variant: FeatureVariant) -> Vec<f64> {
    let mut out = Vec::with_capacity(variant.dimension());
    match variant.base() {
        FeatureVariant::V => {
            let (a, c) = (
                head_orientation(&dp.whole.rotation),
                head_orientation(&dp.central.rotation),
            );
            out.extend((0..3).map(|k| a[k] - c[k]));
        }
        FeatureVariant::RVec => {
            let (a, c) = (
                dp.whole.rotation.to_rodrigues().0,
                dp.central.rotation.to_rodrigues().0,
            );
            out.extend((0..3).map(|k| a[k] - c[k]));
        }
        _ => {
            let (a, c) = (dp.whole.rotation.flatten(), dp.central.rotation.flatten());
            out.extend((0..9).map(|k| a[k] - c[k]));
        }
    }
    if variant.includes_translation() {
        out.extend((0..3).map(|k| dp.whole.translation[k] - dp.central.translation[k]));
    }
    out
}

/// Feature vector for one observation's dual pose.
pub fn make_feature(
    obs: &FaceObservation,
    dp: &DualPose,
    variant: FeatureVariant,
) -> FeatureVector {
    FeatureVector {
        variant,
        values: feature_values(dp, variant),
        id: obs.id.clone(),
        video_id: obs.video_id.clone(),
        label: obs.label,
    }
}

/// Per-dimension mean and population standard deviation (floored at [`EPS_STD`]).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl StandardizationStats {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, FeatureError> {
        if mean.len() != std.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: mean.len(),
                got: std.len(),
            });
        }
        if mean.iter().chain(&std).any(|v| !v.is_finite()) {
            return Err(FeatureError::InvalidStats("non-finite value"));
        }
        if std.iter().any(|&s| s < EPS_STD) {
            return Err(FeatureError::InvalidStats("standard deviation below floor"));
        }
        Ok(Self { mean, std })
    }

    /// Mean 0, std 1: leaves values unchanged.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: alloc::vec![0.0; dim],
            std: alloc::vec![1.0; dim],
        }
    }

    /// Fits statistics over equal-length rows.
    pub fn fit_rows<'a>(
        rows: impl IntoIterator<Item = &'a [f64]> + Clone,
    ) -> Result<Self, FeatureError> {
        let mut iter = rows.clone().into_iter();
        let first = iter.next().ok_or(FeatureError::EmptyFeatures)?;
        let dim = first.len();
        let mut n = 0usize;
        let mut mean = alloc::vec![0.0; dim];
        for row in rows.clone() {
            if row.len() != dim {
                return Err(FeatureError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            n += 1;
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = alloc::vec![0.0; dim];
        for row in rows {
            for k in 0..dim {
                let d = row[k] - mean[k];
                var[k] += d * d;
            }
        }
        let std = var
            .iter()
            .map(|v| libm::sqrt(v / n as f64).max(EPS_STD))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check_dim(values.len())?;
        Ok(values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn invert(&self, values: &[f64]) -> Result<Vec<f64>, FeatureError> {
        self.check_dim(values.len())?;
        Ok(values
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }

    fn check_dim(&self, got: usize) -> Result<(), FeatureError> {
        if got != self.dimension() {
            return Err(FeatureError::DimensionMismatch {
                expected: self.dimension(),
                got,
            });
        }
        Ok(())
    }
}

/// Fits standardization over a nonempty set of same-variant features.
pub fn fit_standardization(
    features: &[FeatureVector],
) -> Result<StandardizationStats, FeatureError> {
    let first = features.first().ok_or(FeatureError::EmptyFeatures)?;
    if let Some(other) = features.iter().find(|f| f.variant != first.variant) {
        return Err(FeatureError::MixedVariants(first.variant, other.variant));
    }
    StandardizationStats::fit_rows(features.iter().map(|f| f.values.as_slice()))
}

pub fn apply_standardization(
    f: &FeatureVector,
    s: &StandardizationStats,
) -> Result<FeatureVector, FeatureError> {
    Ok(FeatureVector {
        values: s.apply(&f.values)?,
        ..f.clone()
    })
}
