//! Train/test runs over every feature variant on one synthetic dataset.

use super::{generate_split, SynthConfig, SynthError};
use crate::classifier::{ClassifierError, HeadPoseClassifier};
use crate::eval::{aggregate_by_video, auroc, EvalError, ScoredItem};
use crate::face_model::CanonicalFaceModel;
use crate::features::{
    estimate_dual_pose, make_feature, DualPose, FaceObservation, FeatureVariant,
};
use crate::svm::{default_grid, GridSearch, SvmParams};
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("the {0} split is empty after pose estimation")]
    EmptySplit(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub variants: Vec<FeatureVariant>,
    pub grid: Vec<SvmParams>,
    pub folds: usize,
    pub cv_seed: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            variants: FeatureVariant::ALL.to_vec(),
            grid: default_grid(),
            folds: 5,
            cv_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantResult {
    pub variant: FeatureVariant,
    pub params: SvmParams,
    pub cv_auroc: f64,
    pub frame_auroc: f64,
    pub video_auroc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub results: Vec<VariantResult>,
    pub train_frames: usize,
    pub test_frames: usize,
    /// Frames dropped because a pose could not be estimated.
    pub skipped: usize,
}

impl ExperimentReport {
    pub fn get(&self, variant: FeatureVariant) -> Option<&VariantResult> {
        self.results.iter().find(|r| r.variant == variant)
    }
}

/// All six variants with the default grid and 5-fold CV.
pub fn paper_scale_experiment(
    config: &SynthConfig,
    model: &CanonicalFaceModel,
) -> Result<ExperimentReport, ExperimentError> {
    run_experiment(
        config,
        model,
        &ExperimentOptions {
            cv_seed: config.seed,
            ..ExperimentOptions::default()
        },
    )
}

pub fn run_experiment(
    config: &SynthConfig,
    model: &CanonicalFaceModel,
    options: &ExperimentOptions,
) -> Result<ExperimentReport, ExperimentError> {
    let data = generate_split(config, model)?;
    let mut skipped = 0;
    // poses are shared by all variants
    let mut posed = |obs: Vec<FaceObservation>| -> Vec<(FaceObservation, DualPose)> {
        let mut out = Vec::with_capacity(obs.len());
        for o in obs {
            match estimate_dual_pose(&o, model) {
                Ok(dp) => out.push((o, dp)),
                Err(_) => skipped += 1,
            }
        }
        out
    };
    let train = posed(data.train);
    let test = posed(data.test);
    if train.is_empty() {
        return Err(ExperimentError::EmptySplit("train"));
    }
    if test.is_empty() {
        return Err(ExperimentError::EmptySplit("test"));
    }

    let search = GridSearch::new(options.grid.clone(), options.folds, options.cv_seed);
    let mut results = Vec::with_capacity(options.variants.len());
    for &variant in &options.variants {
        let train_features: Vec<_> = train
            .iter()
            .map(|(o, dp)| make_feature(o, dp, variant))
            .collect();
        let (clf, cv) = HeadPoseClassifier::train(&train_features, &search)?;
        let mut scored = Vec::with_capacity(test.len());
        for (o, dp) in &test {
            let score = clf.score(&make_feature(o, dp, variant))?;
            scored.push(ScoredItem {
                id: o.id.clone(),
                video_id: o.video_id.clone(),
                score,
                label: o.label,
            });
        }
        results.push(VariantResult {
            variant,
            params: cv.best,
            cv_auroc: cv.best_auroc,
            frame_auroc: auroc(&scored)?,
            video_auroc: auroc(&aggregate_by_video(&scored)?)?,
        });
    }
    Ok(ExperimentReport {
        results,
        train_frames: train.len(),
        test_frames: test.len(),
        skipped,
    })
}
