//! A trained detector: feature variant, training-split standardization and RBF SVM.

use crate::features::{
    fit_standardization, FeatureError, FeatureVariant, FeatureVector, Label, StandardizationStats,
};
use crate::svm::{GridSearch, GridSearchResult, LabeledSample, SvmError, SvmModel};
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error("feature {id} has variant {got}, classifier expects {expected}")]
    WrongVariant {
        id: String,
        expected: FeatureVariant,
        got: FeatureVariant,
    },
    #[error("training feature {0} is not labeled real or fake")]
    Unlabeled(String),
    #[error("standardization has dimension {stats}, svm expects {svm}")]
    Inconsistent { stats: usize, svm: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadPoseClassifier {
    variant: FeatureVariant,
    standardization: StandardizationStats,
    svm: SvmModel,
}

impl HeadPoseClassifier {
    pub fn new(
        variant: FeatureVariant,
        standardization: StandardizationStats,
        svm: SvmModel,
    ) -> Result<Self, ClassifierError> {
        let expected = variant.dimension();
        if standardization.dimension() != expected {
            return Err(FeatureError::DimensionMismatch {
                expected,
                got: standardization.dimension(),
            }
            .into());
        }
        if svm.dimension() != expected {
            return Err(ClassifierError::Inconsistent {
                stats: expected,
                svm: svm.dimension(),
            });
        }
        Ok(Self {
            variant,
            standardization,
            svm,
        })
    }

    /// Fits standardization on `train`, then grid-searches the SVM.
    ///
    /// Frames sharing a `video_id` are kept in the same CV fold.
    pub fn train(
        train: &[FeatureVector],
        search: &GridSearch,
    ) -> Result<(Self, GridSearchResult), ClassifierError> {
        let variant = match train.first() {
            Some(f) => f.variant,
            None => return Err(FeatureError::EmptyFeatures.into()),
        };
        let standardization = fit_standardization(train)?;
        let mut samples = Vec::with_capacity(train.len());
        for f in train {
            let fake = match f.label {
                Label::Fake => true,
                Label::Real => false,
                Label::Unknown => return Err(ClassifierError::Unlabeled(f.id.clone())),
            };
            samples.push(LabeledSample::new(standardization.apply(&f.values)?, fake));
        }
        let groups = video_groups(train);
        let result = search.run(&samples, Some(&groups))?;
        let classifier = Self::new(variant, standardization, result.model.clone())?;
        Ok((classifier, result))
    }

    pub fn variant(&self) -> FeatureVariant {
        self.variant
    }

    pub fn standardization(&self) -> &StandardizationStats {
        &self.standardization
    }

    pub fn svm(&self) -> &SvmModel {
        &self.svm
    }

    /// SVM decision value for raw (unstandardized) feature values; positive means fake.
    pub fn decision_score(&self, raw: &[f64]) -> Result<f64, ClassifierError> {
        let x = self.standardization.apply(raw)?;
        Ok(self.svm.decision_function(&x)?)
    }

    pub fn score(&self, feature: &FeatureVector) -> Result<f64, ClassifierError> {
        if feature.variant != self.variant {
            return Err(ClassifierError::WrongVariant {
                id: feature.id.clone(),
                expected: self.variant,
                got: feature.variant,
            });
        }
        self.decision_score(&feature.values)
    }
}

/// Group index per feature: one group per video, singleton groups for frames without one.
fn video_groups(features: &[FeatureVector]) -> Vec<usize> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut next = 0;
    features
        .iter()
        .map(|f| {
            let g = match &f.video_id {
                Some(v) => *ids.entry(v.as_str()).or_insert_with(|| {
                    next += 1;
                    next - 1
                }),
                None => {
                    next += 1;
                    next - 1
                }
            };
            g
        })
        .collect()
}
