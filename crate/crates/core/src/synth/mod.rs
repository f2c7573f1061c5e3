//! Synthetic landmark datasets with a known generating pose.
//!
//! Real faces are exact projections of the mean face plus isotropic jitter.
//! Fake video `k` follows the same poses as real video `k` with its own jitter,
//! and has its inner landmarks displaced, which is the net landmark-level effect
//! of splicing a synthesized face region into a frame.

mod experiment;

pub use experiment::{
    paper_scale_experiment, run_experiment, ExperimentOptions, ExperimentReport, VariantResult,
};

use crate::face_model::{
    central_indices, inner_face_indices, CanonicalFaceModel, LandmarkIndexSet,
};
use crate::features::{default_intrinsics, FaceObservation, Label};
use crate::geometry::{project, Pose, RodriguesVector};
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};
use core::fmt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Side length at which shift statistics are specified; shifts scale with `image_size / 64`.
pub const REFERENCE_SIZE: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(&'static str),
    #[error("generated face {0} projects behind the camera")]
    BehindCamera(alloc::string::String),
}

/// Landmarks displaced in fakes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRegion {
    /// The 21 central landmarks used for the central pose.
    Central21,
    /// All 51 inner landmarks (18-68).
    Central51,
}

impl ShiftRegion {
    pub fn indices(&self) -> LandmarkIndexSet {
        match self {
            ShiftRegion::Central21 => central_indices(),
            ShiftRegion::Central51 => inner_face_indices(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShiftRegion::Central21 => "central_21",
            ShiftRegion::Central51 => "central_51",
        }
    }
}

impl fmt::Display for ShiftRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for ShiftRegion {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "central_21" => Ok(ShiftRegion::Central21),
            "central_51" => Ok(ShiftRegion::Central51),
            _ => Err(SynthError::InvalidConfig(
                "shift_region must be central_21 or central_51",
            )),
        }
    }
}

/// Per-video head poses: a uniform base pose plus a linear drift across the video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseDistribution {
    /// Each Rodrigues component is uniform in `[-rotation[k], rotation[k]]` (radians).
    pub rotation: [f64; 3],
    /// Translation components are uniform in `[translation_min[k], translation_max[k]]` (model units).
    pub translation_min: [f64; 3],
    pub translation_max: [f64; 3],
    /// Total drift over one video; each component uniform in `[-d, d]`.
    pub drift_rotation: [f64; 3],
    pub drift_translation: [f64; 3],
}

impl Default for PoseDistribution {
    fn default() -> Self {
        Self {
            rotation: [0.3, 0.5, 0.15],
            translation_min: [-10.0, -10.0, 560.0],
            translation_max: [10.0, 10.0, 720.0],
            drift_rotation: [0.1, 0.15, 0.05],
            drift_translation: [5.0, 5.0, 20.0],
        }
    }
}

impl PoseDistribution {
    fn validate(&self) -> Result<(), SynthError> {
        let all = self
            .rotation
            .iter()
            .chain(&self.translation_min)
            .chain(&self.translation_max)
            .chain(&self.drift_rotation)
            .chain(&self.drift_translation);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(SynthError::InvalidConfig(
                "pose distribution must be finite",
            ));
        }
        if self
            .rotation
            .iter()
            .chain(&self.drift_rotation)
            .chain(&self.drift_translation)
            .any(|&v| v < 0.0)
        {
            return Err(SynthError::InvalidConfig(
                "pose ranges must be non-negative",
            ));
        }
        if (0..3).any(|k| self.translation_min[k] > self.translation_max[k]) {
            return Err(SynthError::InvalidConfig(
                "translation_min exceeds translation_max",
            ));
        }
        if self.translation_min[2] - self.drift_translation[2] <= 0.0 {
            return Err(SynthError::InvalidConfig("face depth must stay positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Number of real videos; real video `k` and fake video `k` share their poses.
    pub n_real: usize,
    pub n_fake: usize,
    pub frames_per_video: usize,
    /// The last `test_videos` videos of each class form the test split.
    pub test_videos: usize,
    pub pose_distribution: PoseDistribution,
    /// Square image side in pixels.
    pub image_size: u32,
    /// Shift magnitude statistics at the 64 px reference scale.
    pub shift_mean_px: f64,
    pub shift_std_px: f64,
    pub shift_region: ShiftRegion,
    pub landmark_jitter_px: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_real: 49,
            n_fake: 49,
            frames_per_video: 30,
            test_videos: 14,
            pose_distribution: PoseDistribution::default(),
            image_size: 256,
            shift_mean_px: 1.540,
            shift_std_px: 0.921,
            shift_region: ShiftRegion::Central21,
            landmark_jitter_px: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Same dataset shape with no landmark displacement in fakes.
    pub fn null(&self) -> Self {
        Self {
            shift_mean_px: 0.0,
            shift_std_px: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_real == 0 || self.n_fake == 0 || self.frames_per_video == 0 {
            return Err(SynthError::InvalidConfig(
                "video and frame counts must be positive",
            ));
        }
        if self.test_videos > self.n_real.min(self.n_fake) {
            return Err(SynthError::InvalidConfig(
                "test_videos exceeds the videos of a class",
            ));
        }
        if self.image_size == 0 {
            return Err(SynthError::InvalidConfig("image_size must be positive"));
        }
        if !(self.shift_mean_px.is_finite() && self.shift_mean_px >= 0.0) {
            return Err(SynthError::InvalidConfig(
                "shift_mean_px must be finite and non-negative",
            ));
        }
        if !(self.shift_std_px.is_finite() && self.shift_std_px >= 0.0) {
            return Err(SynthError::InvalidConfig(
                "shift_std_px must be finite and non-negative",
            ));
        }
        if !(self.landmark_jitter_px.is_finite() && self.landmark_jitter_px >= 0.0) {
            return Err(SynthError::InvalidConfig(
                "landmark_jitter_px must be finite and non-negative",
            ));
        }
        self.pose_distribution.validate()
    }

    pub fn shift_scale(&self) -> f64 {
        self.image_size as f64 / REFERENCE_SIZE
    }

    pub fn split_of(&self, label: Label, video: usize) -> Split {
        let n = if label == Label::Fake {
            self.n_fake
        } else {
            self.n_real
        };
        if video + self.test_videos >= n {
            Split::Test
        } else {
            Split::Train
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: Vec<FaceObservation>,
    pub test: Vec<FaceObservation>,
}

/// Stream ids: poses of video `k` (shared by both classes) use stream `k`, fake
/// shifts `SHIFT_STREAM + k`, jitter `JITTER_STREAM + 2k` (real) or `+ 2k + 1` (fake).
const SHIFT_STREAM: u64 = 1 << 40;
const JITTER_STREAM: u64 = 2 << 40;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One rendered video.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub label: Label,
    /// Index within its class; real and fake videos with the same index share poses.
    pub index: usize,
    pub split: Split,
    pub frames: Vec<FaceObservation>,
}

/// Every video: reals first, then fakes, each in index order.
pub fn generate_videos(
    config: &SynthConfig,
    model: &CanonicalFaceModel,
) -> Result<Vec<SynthVideo>, SynthError> {
    config.validate()?;
    let shift = ShiftMagnitude::new(config.shift_mean_px, config.shift_std_px);
    let region = config.shift_region.indices();
    let mut out = Vec::with_capacity(config.n_real + config.n_fake);
    for (label, count) in [(Label::Real, config.n_real), (Label::Fake, config.n_fake)] {
        for index in 0..count {
            out.push(SynthVideo {
                label,
                index,
                split: config.split_of(label, index),
                frames: render_video(config, model, &shift, &region, label, index)?,
            });
        }
    }
    Ok(out)
}

/// All frames of [`generate_videos`], flattened.
pub fn generate(
    config: &SynthConfig,
    model: &CanonicalFaceModel,
) -> Result<Vec<FaceObservation>, SynthError> {
    Ok(generate_videos(config, model)?
        .into_iter()
        .flat_map(|v| v.frames)
        .collect())
}

/// Frames partitioned by [`SynthConfig::split_of`]; a video never straddles splits.
pub fn generate_split(
    config: &SynthConfig,
    model: &CanonicalFaceModel,
) -> Result<SynthDataset, SynthError> {
    let mut data = SynthDataset {
        train: Vec::new(),
        test: Vec::new(),
    };
    for video in generate_videos(config, model)? {
        match video.split {
            Split::Train => data.train.extend(video.frames),
            Split::Test => data.test.extend(video.frames),
        }
    }
    Ok(data)
}

pub fn video_id(label: Label, video: usize) -> alloc::string::String {
    format!("{}-{video:03}", label.as_str())
}

fn render_video(
    config: &SynthConfig,
    model: &CanonicalFaceModel,
    shift: &ShiftMagnitude,
    region: &LandmarkIndexSet,
    label: Label,
    video: usize,
) -> Result<Vec<FaceObservation>, SynthError> {
    let size = config.image_size;
    let cam = default_intrinsics(size, size)
        .map_err(|_| SynthError::InvalidConfig("image_size must be positive"))?;
    let dist = &config.pose_distribution;
    let mut rng = stream(config.seed, video as u64);
    let mut shift_rng = stream(config.seed, SHIFT_STREAM + video as u64);
    let fake = u64::from(label == Label::Fake);
    let mut jitter_rng = stream(config.seed, JITTER_STREAM + 2 * video as u64 + fake);

    let uniform = |half: f64, rng: &mut ChaCha8Rng| {
        if half > 0.0 {
            rng.random_range(-half..=half)
        } else {
            0.0
        }
    };
    let mut base = [0.0; 6];
    let mut drift = [0.0; 6];
    for k in 0..3 {
        base[k] = uniform(dist.rotation[k], &mut rng);
        let (lo, hi) = (dist.translation_min[k], dist.translation_max[k]);
        base[3 + k] = if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        };
    }
    for k in 0..3 {
        drift[k] = uniform(dist.drift_rotation[k], &mut rng);
        drift[3 + k] = uniform(dist.drift_translation[k], &mut rng);
    }

    let vid = video_id(label, video);
    let jitter = config.landmark_jitter_px;
    let scale = config.shift_scale();
    let frames = config.frames_per_video;
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let s = if frames > 1 {
            f as f64 / (frames - 1) as f64 - 0.5
        } else {
            0.0
        };
        let p: [f64; 6] = core::array::from_fn(|k| base[k] + s * drift[k]);
        let pose = Pose::from_rodrigues(RodriguesVector([p[0], p[1], p[2]]), [p[3], p[4], p[5]]);
        let mut landmarks = Vec::with_capacity(model.points().len());
        for point in model.points() {
            let mut q =
                project(point, &pose, &cam).map_err(|_| SynthError::BehindCamera(vid.clone()))?;
            let (nx, ny): (f64, f64) = (
                StandardNormal.sample(&mut jitter_rng),
                StandardNormal.sample(&mut jitter_rng),
            );
            q.x += jitter * nx;
            q.y += jitter * ny;
            landmarks.push(q);
        }
        if label == Label::Fake {
            for &i in region.indices() {
                let magnitude = shift.sample(&mut shift_rng) * scale;
                let angle = shift_rng.random_range(0.0..2.0 * PI);
                landmarks[i - 1].x += magnitude * libm::cos(angle);
                landmarks[i - 1].y += magnitude * libm::sin(angle);
            }
        }
        out.push(FaceObservation {
            id: format!("{vid}-f{f:03}"),
            video_id: Some(vid.clone()),
            label,
            image_width: size,
            image_height: size,
            landmarks,
        });
    }
    Ok(out)
}

/// Normal truncated at zero whose *truncated* mean and std equal the targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftMagnitude {
    /// Parameters of the untruncated normal.
    pub mu: f64,
    pub sigma: f64,
}

impl ShiftMagnitude {
    /// Solves for the parent normal by fixed-point iteration on the truncated moments.
    ///
    /// Targets with `std > mean` are outside the family's reach when the mean
    /// is small; the iteration then stops at its last iterate.
    pub fn new(mean: f64, std: f64) -> Self {
        if std <= 0.0 || mean <= 0.0 {
            return Self {
                mu: mean,
                sigma: std.max(0.0),
            };
        }
        let (mut mu, mut sigma) = (mean, std);
        for _ in 0..200 {
            let alpha = -mu / sigma;
            let lambda = inverse_mills(alpha);
            let var_ratio = 1.0 + alpha * lambda - lambda * lambda;
            if !(var_ratio > 0.0) {
                break;
            }
            let next_sigma = std / libm::sqrt(var_ratio);
            let next_mu = mean - next_sigma * lambda;
            let done = (next_mu - mu).abs() < 1e-14 && (next_sigma - sigma).abs() < 1e-14;
            mu = next_mu;
            sigma = next_sigma;
            if done {
                break;
            }
        }
        Self { mu, sigma }
    }

    /// Mean and std of the truncated distribution.
    pub fn moments(&self) -> (f64, f64) {
        if self.sigma == 0.0 {
            return (self.mu.max(0.0), 0.0);
        }
        let alpha = -self.mu / self.sigma;
        let lambda = inverse_mills(alpha);
        let mean = self.mu + self.sigma * lambda;
        let var = self.sigma * self.sigma * (1.0 + alpha * lambda - lambda * lambda);
        (mean, libm::sqrt(var.max(0.0)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return self.mu.max(0.0);
        }
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let x = self.mu + self.sigma * z;
            if x >= 0.0 {
                return x;
            }
        }
    }
}

/// `phi(a) / (1 - Phi(a))`.
fn inverse_mills(a: f64) -> f64 {
    let pdf = libm::exp(-0.5 * a * a) / libm::sqrt(2.0 * PI);
    let tail = 0.5 * libm::erfc(a / SQRT_2);
    pdf / tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::estimate_dual_pose;

    fn small() -> SynthConfig {
        SynthConfig {
            n_real: 3,
            n_fake: 3,
            frames_per_video: 4,
            test_videos: 1,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn moments_match_targets() {
        let m = ShiftMagnitude::new(1.540, 0.921);
        let (mean, std) = m.moments();
        assert!(
            (mean - 1.540).abs() < 1e-10 && (std - 0.921).abs() < 1e-10,
            "{mean} {std}"
        );
        assert!(m.mu < 1.540);
    }

    #[test]
    fn sampled_shift_statistics() {
        let m = ShiftMagnitude::new(1.540, 0.921);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..200_000).map(|_| m.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let std =
            libm::sqrt(xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64);
        assert!(
            (mean - 1.540).abs() < 0.01 && (std - 0.921).abs() < 0.01,
            "{mean} {std}"
        );
        assert!(xs.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn null_perturbation_twins_are_identical() {
        let cfg = SynthConfig {
            landmark_jitter_px: 0.0,
            ..small().null()
        };
        let obs = generate(&cfg, &CanonicalFaceModel::mean_face()).unwrap();
        let per_class = cfg.n_real * cfg.frames_per_video;
        for k in 0..per_class {
            assert_eq!(obs[k].landmarks, obs[per_class + k].landmarks);
        }
    }

    #[test]
    fn contour_is_untouched_and_region_is_shifted() {
        let cfg = SynthConfig {
            landmark_jitter_px: 0.0,
            ..small()
        };
        let obs = generate(&cfg, &CanonicalFaceModel::mean_face()).unwrap();
        let per_class = cfg.n_real * cfg.frames_per_video;
        let region = cfg.shift_region.indices();
        for k in 0..per_class {
            let (r, f) = (&obs[k], &obs[per_class + k]);
            assert_eq!(r.label, Label::Real);
            assert_eq!(f.label, Label::Fake);
            for i in 1..=68 {
                let moved = r.landmarks[i - 1] != f.landmarks[i - 1];
                assert_eq!(moved, region.contains(i), "landmark {i}");
            }
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let model = CanonicalFaceModel::mean_face();
        let a = generate(&small(), &model).unwrap();
        assert_eq!(a, generate(&small(), &model).unwrap());
        let other = SynthConfig { seed: 1, ..small() };
        assert_ne!(a, generate(&other, &model).unwrap());
    }

    #[test]
    fn split_keeps_videos_together() {
        let cfg = small();
        let data = generate_split(&cfg, &CanonicalFaceModel::mean_face()).unwrap();
        assert_eq!(data.train.len(), 2 * 2 * 4);
        assert_eq!(data.test.len(), 2 * 4);
        for t in &data.test {
            assert!(data.train.iter().all(|o| o.video_id != t.video_id));
        }
        assert!(data
            .test
            .iter()
            .any(|o| o.video_id.as_deref() == Some("fake-002")));
    }

    #[test]
    fn generated_faces_yield_poses() {
        let cfg = SynthConfig {
            landmark_jitter_px: 0.0,
            ..small().null()
        };
        let model = CanonicalFaceModel::mean_face();
        for obs in generate(&cfg, &model).unwrap() {
            let dp = estimate_dual_pose(&obs, &model).unwrap();
            assert!(dp.orientation_distance() < 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig {
            n_real: 0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SynthConfig {
            test_videos: 4,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SynthConfig {
            landmark_jitter_px: -1.0,
            ..small()
        }
        .validate()
        .is_err());
        let mut pose = PoseDistribution::default();
        pose.translation_min[2] = 1.0;
        assert!(SynthConfig {
            pose_distribution: pose,
            ..small()
        }
        .validate()
        .is_err());
        assert_eq!(
            "central_51".parse::<ShiftRegion>().unwrap(),
            ShiftRegion::Central51
        );
    }
}
