//! Run configuration file (JSON). Every field is optional.

use anyhow::{bail, Context, Result};
use headpose_core::eval::{default_histogram_edges, Histogram};
use headpose_core::features::FeatureVariant;
use headpose_core::svm::{default_grid, SvmParams};
use headpose_core::synth::{PoseDistribution, ShiftRegion, SynthConfig};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub feature_variant: String,
    pub grid: Vec<GridPoint>,
    pub folds: usize,
    pub model_path: Option<PathBuf>,
    pub seed: u64,
    pub histogram_edges: Vec<f64>,
    /// Multiplier on `c` for the fake class.
    pub fake_weight: f64,
    pub synth: Option<SynthSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            feature_variant: FeatureVariant::RMatT.name().to_string(),
            grid: default_grid()
                .into_iter()
                .map(|p| GridPoint {
                    c: p.c,
                    gamma: p.gamma,
                })
                .collect(),
            folds: 5,
            model_path: None,
            seed: 0,
            histogram_edges: default_histogram_edges(),
            fake_weight: 1.0,
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self =
            serde_json::from_str(&text).with_context(|| format!("config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.variant()?;
        self.svm_grid()?;
        if self.folds < 2 {
            bail!("folds must be at least 2 (got {})", self.folds);
        }
        if !(self.fake_weight.is_finite() && self.fake_weight > 0.0) {
            bail!("fake_weight must be positive");
        }
        Histogram::new(self.histogram_edges.clone())?;
        if let Some(s) = &self.synth {
            s.region()?;
            s.to_config(self.seed).validate()?;
        }
        Ok(())
    }

    pub fn variant(&self) -> Result<FeatureVariant> {
        Ok(self.feature_variant.parse()?)
    }

    pub fn svm_grid(&self) -> Result<Vec<SvmParams>> {
        if self.grid.is_empty() {
            bail!("grid must not be empty");
        }
        self.grid
            .iter()
            .map(|p| Ok(SvmParams::new(p.c, p.gamma)?))
            .collect()
    }

    pub fn synth_config(&self, seed: u64) -> SynthConfig {
        self.synth.clone().unwrap_or_default().to_config(seed)
    }
}

/// [`SynthConfig`] minus the seed, which always comes from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub n_real: usize,
    pub n_fake: usize,
    pub frames_per_video: usize,
    pub test_videos: usize,
    pub image_size: u32,
    pub shift_mean_px: f64,
    pub shift_std_px: f64,
    /// `"central_21"` or `"central_51"`.
    pub shift_region: String,
    pub landmark_jitter_px: f64,
    pub pose_distribution: PoseSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSettings {
    pub rotation: [f64; 3],
    pub translation_min: [f64; 3],
    pub translation_max: [f64; 3],
    pub drift_rotation: [f64; 3],
    pub drift_translation: [f64; 3],
}

impl Default for PoseSettings {
    fn default() -> Self {
        let d = PoseDistribution::default();
        Self {
            rotation: d.rotation,
            translation_min: d.translation_min,
            translation_max: d.translation_max,
            drift_rotation: d.drift_rotation,
            drift_translation: d.drift_translation,
        }
    }
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self::from_config(&SynthConfig::default())
    }
}

impl SynthSettings {
    pub fn from_config(c: &SynthConfig) -> Self {
        let d = &c.pose_distribution;
        Self {
            n_real: c.n_real,
            n_fake: c.n_fake,
            frames_per_video: c.frames_per_video,
            test_videos: c.test_videos,
            image_size: c.image_size,
            shift_mean_px: c.shift_mean_px,
            shift_std_px: c.shift_std_px,
            shift_region: c.shift_region.name().to_string(),
            landmark_jitter_px: c.landmark_jitter_px,
            pose_distribution: PoseSettings {
                rotation: d.rotation,
                translation_min: d.translation_min,
                translation_max: d.translation_max,
                drift_rotation: d.drift_rotation,
                drift_translation: d.drift_translation,
            },
        }
    }

    /// Unknown shift regions fall back to the default; `validate` on [`RunConfig`] rejects them first.
    pub fn to_config(&self, seed: u64) -> SynthConfig {
        let p = &self.pose_distribution;
        SynthConfig {
            n_real: self.n_real,
            n_fake: self.n_fake,
            frames_per_video: self.frames_per_video,
            test_videos: self.test_videos,
            pose_distribution: PoseDistribution {
                rotation: p.rotation,
                translation_min: p.translation_min,
                translation_max: p.translation_max,
                drift_rotation: p.drift_rotation,
                drift_translation: p.drift_translation,
            },
            image_size: self.image_size,
            shift_mean_px: self.shift_mean_px,
            shift_std_px: self.shift_std_px,
            shift_region: self.shift_region.parse().unwrap_or(ShiftRegion::Central21),
            landmark_jitter_px: self.landmark_jitter_px,
            seed,
        }
    }

    pub fn region(&self) -> Result<ShiftRegion> {
        Ok(self.shift_region.parse()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.variant().unwrap(), FeatureVariant::RMatT);
        assert_eq!(c.svm_grid().unwrap().len(), 25);
        assert_eq!(c.folds, 5);
    }

    #[test]
    fn synth_settings_round_trip() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 3, "synth": {"n_real": 2, "test_videos": 1, "shift_region": "central_51"}}"#).unwrap();
        c.validate().unwrap();
        let s = c.synth_config(11);
        assert_eq!((s.n_real, s.n_fake, s.seed), (2, 49, 11));
        assert_eq!(s.shift_region, ShiftRegion::Central51);
        assert_eq!(SynthSettings::from_config(&s).to_config(11), s);
    }

    #[test]
    fn validation_errors() {
        for bad in [
            r#"{"folds": 1}"#,
            r#"{"feature_variant": "Q"}"#,
            r#"{"grid": []}"#,
            r#"{"grid": [{"c": -1, "gamma": 1}]}"#,
            r#"{"histogram_edges": [0.1, 0.0]}"#,
            r#"{"synth": {"n_real": 0}}"#,
        ] {
            let c: RunConfig = serde_json::from_str(bad).unwrap();
            assert!(c.validate().is_err(), "{bad}");
        }
        assert!(serde_json::from_str::<RunConfig>(r#"{"fold": 3}"#).is_err());
        let c = RunConfig {
            synth: Some(SynthSettings {
                shift_region: "cheeks".into(),
                ..SynthSettings::default()
            }),
            ..RunConfig::default()
        };
        assert!(c.synth.as_ref().unwrap().region().is_err());
    }
}
