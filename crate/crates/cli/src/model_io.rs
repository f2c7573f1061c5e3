//! Trained classifier files (JSON).

use anyhow::{bail, Context, Result};
use headpose_core::features::{FeatureVariant, StandardizationStats};
use headpose_core::svm::{SvmModel, SvmParams};
use headpose_core::HeadPoseClassifier;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub variant: String,
    pub params: ParamsFile,
    /// Multiplier on `c` for the fake class.
    pub fake_weight: f64,
    pub standardization: StatsFile,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`, one per support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub c: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ModelFile {
    pub fn from_classifier(clf: &HeadPoseClassifier) -> Self {
        let svm = clf.svm();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            variant: clf.variant().name().to_string(),
            params: ParamsFile {
                c: svm.params().c,
                gamma: svm.params().gamma,
            },
            fake_weight: svm.fake_weight(),
            standardization: StatsFile {
                mean: clf.standardization().mean().to_vec(),
                std: clf.standardization().std().to_vec(),
            },
            support_vectors: svm.support_vectors().to_vec(),
            dual_coefs: svm.dual_coefs().to_vec(),
            bias: svm.bias(),
        }
    }

    /// Rebuilds the classifier, re-checking every model invariant.
    pub fn into_classifier(self) -> Result<HeadPoseClassifier> {
        if self.format_version != MODEL_FORMAT_VERSION {
            bail!(
                "unsupported model format_version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            );
        }
        let variant: FeatureVariant = self.variant.parse()?;
        let stats = StandardizationStats::new(self.standardization.mean, self.standardization.std)?;
        let params = SvmParams::new(self.params.c, self.params.gamma)?;
        let svm = SvmModel::from_parts(
            self.support_vectors,
            self.dual_coefs,
            self.bias,
            params,
            self.fake_weight,
        )?;
        Ok(HeadPoseClassifier::new(variant, stats, svm)?)
    }
}

pub fn model_json(clf: &HeadPoseClassifier) -> String {
    let mut s = serde_json::to_string_pretty(&ModelFile::from_classifier(clf))
        .expect("models always serialize");
    s.push('\n');
    s
}

pub fn save_model(path: &Path, clf: &HeadPoseClassifier) -> Result<()> {
    fs::write(path, model_json(clf)).with_context(|| format!("writing {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<HeadPoseClassifier> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text)
        .with_context(|| format!("model schema in {}", path.display()))?;
    file.into_classifier()
        .with_context(|| format!("invalid model {}", path.display()))
}
