//! Larger central-landmark shifts never make fakes harder to detect.

use headpose_core::svm::SvmParams;
use headpose_core::synth::{run_experiment, ExperimentOptions, SynthConfig};
use headpose_core::{CanonicalFaceModel, FeatureVariant};

#[test]
fn frame_auroc_grows_with_shift_magnitude() {
    let model = CanonicalFaceModel::mean_face();
    let options = ExperimentOptions {
        variants: vec![FeatureVariant::RMatT],
        grid: vec![
            SvmParams {
                c: 1.0,
                gamma: 0.05,
            },
            SvmParams {
                c: 10.0,
                gamma: 0.01,
            },
        ],
        folds: 3,
        cv_seed: 1,
    };
    let mut aurocs = Vec::new();
    for mean in [0.0, 0.5, 1.0, 1.54, 3.0] {
        let config = SynthConfig {
            n_real: 16,
            n_fake: 16,
            frames_per_video: 10,
            test_videos: 6,
            shift_mean_px: mean,
            // same relative spread at every level
            shift_std_px: 0.921 * mean / 1.54,
            seed: 21,
            ..SynthConfig::default()
        };
        let report = run_experiment(&config, &model, &options).unwrap();
        aurocs.push(report.get(FeatureVariant::RMatT).unwrap().frame_auroc);
    }
    for w in aurocs.windows(2) {
        assert!(w[1] >= w[0] - 0.02, "{aurocs:?}");
    }
    assert!((aurocs[0] - 0.5).abs() <= 0.1, "{aurocs:?}");
    assert!(aurocs[4] > 0.9, "{aurocs:?}");
}
