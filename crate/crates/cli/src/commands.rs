//! Subcommand implementations.

use crate::cli::{
    Cli, Command, EvalArgs, FeaturesArgs, InputArgs, PoseArgs, ReportArgs, ReportFormat, SplitArg,
    SynthArgs, TrainArgs,
};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, ResultExt};
use crate::face_model_io::load_face_model;
use crate::landmarks::{read_landmark_file, write_landmark_file, RecordError};
use crate::manifest::{check_split_hygiene, DatasetManifest, ManifestEntry, ManifestLabel, Split};
use crate::model_io::{load_model, save_model};
use crate::report::{EvalReport, HistogramReport};
use headpose_core::eval::{aggregate_by_video, auroc, roc_curve, Histogram, ScoredItem};
use headpose_core::features::{estimate_dual_pose, make_feature, FeatureError};
use headpose_core::seed::sub_seed;
use headpose_core::svm::{GridSearch, TrainOptions};
use headpose_core::synth::{generate_videos, video_id};
use headpose_core::{
    CanonicalFaceModel, DualPose, FaceObservation, FeatureVariant, HeadPoseClassifier, Label, Pose,
};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// CV AUROC below this gets a warning: the classes are barely separable.
const WEAK_CV_AUROC: f64 = 0.6;

pub fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p).or_usage()?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(config.seed);
    match cli.command {
        Command::Pose(a) => cmd_pose(&a),
        Command::Features(a) => cmd_features(&a, &config),
        Command::Train(a) => cmd_train(&a, &config, seed),
        Command::Eval(a) => cmd_eval(&a, &config),
        Command::Synth(a) => cmd_synth(&a, &config, seed),
        Command::Report(a) => cmd_report(&a),
    }
}

/// Dual poses in input order, one worker thread per core.
pub fn estimate_poses(
    obs: &[FaceObservation],
    model: &CanonicalFaceModel,
) -> Vec<Result<DualPose, FeatureError>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    if workers <= 1 || obs.len() < 2 * workers {
        return obs.iter().map(|o| estimate_dual_pose(o, model)).collect();
    }
    let chunk = obs.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = obs
            .chunks(chunk)
            .map(|c| {
                s.spawn(move || {
                    c.iter()
                        .map(|o| estimate_dual_pose(o, model))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("pose worker panicked"))
            .collect()
    })
}

/// Poses for every observation; failures are logged and dropped.
fn posed(
    obs: Vec<FaceObservation>,
    model: &CanonicalFaceModel,
) -> (Vec<(FaceObservation, DualPose)>, usize) {
    let poses = estimate_poses(&obs, model);
    let mut out = Vec::with_capacity(obs.len());
    let mut failed = 0;
    for (o, p) in obs.into_iter().zip(poses) {
        match p {
            Ok(dp) => out.push((o, dp)),
            Err(e) => {
                warn!("{e}");
                failed += 1;
            }
        }
    }
    (out, failed)
}

fn log_rejected<'a>(rejected: impl IntoIterator<Item = (&'a Path, &'a RecordError)>) -> usize {
    let mut n = 0;
    for (path, err) in rejected {
        warn!("{}: {err}", path.display());
        n += 1;
    }
    n
}

/// Records from positional files or a whole manifest, plus the rejected count.
fn load_inputs(input: &InputArgs) -> CliResult<(Vec<FaceObservation>, usize)> {
    let mut observations = Vec::new();
    let mut rejected = 0;
    if let Some(path) = &input.manifest {
        let manifest = DatasetManifest::load(path).or_data()?;
        for split in [Split::Train, Split::Test] {
            let data = manifest.load_split(split).or_data()?;
            rejected += log_rejected(data.rejected.iter().map(|(p, e)| (p.as_path(), e)));
            observations.extend(data.observations);
        }
    } else {
        if input.inputs.is_empty() {
            return Err(CliError::usage("give landmark files or --manifest"));
        }
        for path in &input.inputs {
            let parsed = read_landmark_file(path).or_data()?;
            rejected += log_rejected(parsed.rejected.iter().map(|e| (path.as_path(), e)));
            observations.extend(parsed.observations);
        }
    }
    Ok((observations, rejected))
}

fn write_output(out: Option<&Path>, body: &str) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).or_data()?;
            }
            fs::write(path, body).or_data()
        }
        None => std::io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .or_internal(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub rodrigues: [f64; 3],
    pub translation: [f64; 3],
    pub rms_px: f64,
}

impl PoseEstimate {
    fn new(pose: &Pose, rms_px: f64) -> Self {
        Self {
            rotation: *pose.rotation.matrix(),
            rodrigues: pose.rotation.to_rodrigues().0,
            translation: pose.translation,
            rms_px,
        }
    }
}

/// One line of `pose` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub label: String,
    pub whole: PoseEstimate,
    pub central: PoseEstimate,
    pub cosine_distance: f64,
}

/// One line of `features` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub label: String,
    pub variant: String,
    pub values: Vec<f64>,
}

fn jsonl<T: Serialize>(rows: impl Iterator<Item = T>) -> String {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(&r).expect("records always serialize"));
        s.push('\n');
    }
    s
}

/// Posed records, rejected count, failed count.
type PosedInputs = (Vec<(FaceObservation, DualPose)>, usize, usize);

fn posed_inputs(input: &InputArgs) -> CliResult<PosedInputs> {
    let model = load_face_model(input.face_model.as_deref()).or_data()?;
    let (obs, rejected) = load_inputs(input)?;
    let total = obs.len() + rejected;
    let (ok, failed) = posed(obs, &model);
    if total > 0 && ok.is_empty() {
        return Err(CliError::data(format!("all {total} records failed")));
    }
    Ok((ok, rejected, failed))
}

pub fn cmd_pose(args: &PoseArgs) -> CliResult<()> {
    let (ok, rejected, failed) = posed_inputs(&args.input)?;
    let body = jsonl(ok.iter().map(|(o, dp)| PoseRecord {
        id: o.id.clone(),
        video_id: o.video_id.clone(),
        label: o.label.to_string(),
        whole: PoseEstimate::new(&dp.whole, dp.whole_rms),
        central: PoseEstimate::new(&dp.central, dp.central_rms),
        cosine_distance: dp.orientation_distance(),
    }));
    write_output(args.out.as_deref(), &body)?;
    info!(
        "{} poses written, {rejected} records rejected, {failed} pose failures",
        ok.len()
    );
    Ok(())
}

fn resolve_variant(flag: Option<&str>, config: &RunConfig) -> CliResult<FeatureVariant> {
    match flag {
        Some(v) => v.parse().or_usage(),
        None => config.variant().or_usage(),
    }
}

pub fn cmd_features(args: &FeaturesArgs, config: &RunConfig) -> CliResult<()> {
    let variant = resolve_variant(args.variant.as_deref(), config)?;
    let (ok, rejected, failed) = posed_inputs(&args.input)?;
    let body = jsonl(ok.iter().map(|(o, dp)| {
        let f = make_feature(o, dp, variant);
        FeatureRecord {
            id: f.id,
            video_id: f.video_id,
            label: f.label.to_string(),
            variant: variant.to_string(),
            values: f.values,
        }
    }));
    write_output(args.out.as_deref(), &body)?;
    info!(
        "{} feature vectors written, {rejected} records rejected, {failed} pose failures",
        ok.len()
    );
    Ok(())
}

fn model_path(flag: Option<&Path>, config: &RunConfig) -> CliResult<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| config.model_path.clone())
        .ok_or_else(|| {
            CliError::usage("no model path: pass --model or set model_path in the configuration")
        })
}

fn class_counts(obs: &[(FaceObservation, DualPose)]) -> (usize, usize) {
    let fake = obs.iter().filter(|(o, _)| o.label == Label::Fake).count();
    (obs.len() - fake, fake)
}

fn load_split(
    manifest: &DatasetManifest,
    split: Split,
) -> CliResult<(Vec<FaceObservation>, usize)> {
    let data = manifest.load_split(split).or_data()?;
    let rejected = log_rejected(data.rejected.iter().map(|(p, e)| (p.as_path(), e)));
    Ok((data.observations, rejected))
}

pub fn cmd_train(args: &TrainArgs, config: &RunConfig, seed: u64) -> CliResult<()> {
    let variant = resolve_variant(args.variant.as_deref(), config)?;
    let folds = args.folds.unwrap_or(config.folds);
    if folds < 2 {
        return Err(CliError::usage(format!(
            "folds must be at least 2 (got {folds})"
        )));
    }
    let grid = config.svm_grid().or_usage()?;
    let out = model_path(args.model.as_deref(), config)?;
    let face_model = load_face_model(args.face_model.as_deref()).or_data()?;

    let manifest = DatasetManifest::load(&args.manifest).or_data()?;
    let (obs, rejected) = load_split(&manifest, Split::Train)?;
    let (train, failed) = posed(obs, &face_model);
    let (real, fake) = class_counts(&train);
    if real == 0 || fake == 0 {
        return Err(CliError::data(format!(
            "training split needs both classes (got {real} real, {fake} fake)"
        )));
    }
    let features: Vec<_> = train
        .iter()
        .map(|(o, dp)| make_feature(o, dp, variant))
        .collect();
    let search = GridSearch {
        grid,
        folds,
        seed: sub_seed(seed, "cv"),
        train: TrainOptions {
            fake_weight: config.fake_weight,
            ..TrainOptions::default()
        },
    };
    let (clf, cv) = HeadPoseClassifier::train(&features, &search).or_data()?;
    save_model(&out, &clf).or_data()?;

    println!("variant   {variant}");
    println!(
        "frames    {} ({real} real, {fake} fake; {failed} skipped, {rejected} rejected)",
        train.len()
    );
    println!("c         {}", cv.best.c);
    println!("gamma     {}", cv.best.gamma);
    println!("cv_auroc  {:.4}", cv.best_auroc);
    println!("model     {}", out.display());
    if cv.best_auroc < WEAK_CV_AUROC {
        warn!(
            "cross-validated AUROC {:.3} is close to chance; the classes look indistinguishable",
            cv.best_auroc
        );
    }
    Ok(())
}

/// Scores, ROC and histogram for already-posed observations.
pub fn evaluate(
    clf: &HeadPoseClassifier,
    posed: &[(FaceObservation, DualPose)],
    edges: Vec<f64>,
    skipped: usize,
    rejected: usize,
) -> CliResult<EvalReport> {
    let mut scored = Vec::with_capacity(posed.len());
    let mut hist = Histogram::new(edges).or_usage()?;
    hist.skipped = skipped as u64;
    for (o, dp) in posed {
        let score = clf.score(&make_feature(o, dp, clf.variant())).or_data()?;
        scored.push(ScoredItem {
            id: o.id.clone(),
            video_id: o.video_id.clone(),
            score,
            label: o.label,
        });
        hist.add(dp.orientation_distance(), o.label);
    }
    let roc = roc_curve(&scored).or_data()?;
    let auroc_video = if scored.iter().all(|s| s.video_id.is_some()) {
        Some(auroc(&aggregate_by_video(&scored).or_data()?).or_data()?)
    } else {
        None
    };
    let videos: BTreeSet<&str> = scored
        .iter()
        .filter_map(|s| s.video_id.as_deref())
        .collect();
    let report = EvalReport {
        variant: clf.variant().to_string(),
        frames: scored.len(),
        videos: videos.len(),
        skipped,
        rejected,
        auroc_frame: auroc(&scored).or_data()?,
        auroc_video,
        roc_points: roc.points.iter().map(|&(f, t)| [f, t]).collect(),
        histogram: HistogramReport::from(&hist),
    };
    Ok(report)
}

pub fn cmd_eval(args: &EvalArgs, config: &RunConfig) -> CliResult<()> {
    let path = model_path(args.model.as_deref(), config)?;
    let clf = load_model(&path).or_data()?;
    let face_model = load_face_model(args.face_model.as_deref()).or_data()?;
    let manifest = DatasetManifest::load(&args.manifest).or_data()?;
    let split = match args.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let (obs, rejected) = load_split(&manifest, split)?;
    if split == Split::Test {
        let train = manifest.load_split(Split::Train).or_data()?;
        check_split_hygiene(&train.observations, &obs).or_data()?;
    }
    if obs.is_empty() {
        return Err(CliError::data(format!("the {split} split is empty")));
    }
    let (posed, skipped) = posed(obs, &face_model);
    let report = evaluate(
        &clf,
        &posed,
        config.histogram_edges.clone(),
        skipped,
        rejected,
    )?;
    report.write_dir(&args.out).or_data()?;
    print!("{}", report.summary());
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs, config: &RunConfig, seed: u64) -> CliResult<()> {
    let synth = config.synth_config(sub_seed(seed, "synth"));
    synth.validate().or_usage()?;
    let face_model = load_face_model(args.face_model.as_deref()).or_data()?;
    let videos = generate_videos(&synth, &face_model).or_internal()?;

    let dir = args.out.join("landmarks");
    fs::create_dir_all(&dir).or_data()?;
    let mut entries = Vec::with_capacity(videos.len());
    let mut frames = 0;
    for v in &videos {
        let id = video_id(v.label, v.index);
        let file = PathBuf::from("landmarks").join(format!("{id}.jsonl"));
        write_landmark_file(&args.out.join(&file), &v.frames).or_data()?;
        frames += v.frames.len();
        let label = if v.label == Label::Fake {
            ManifestLabel::Fake
        } else {
            ManifestLabel::Real
        };
        entries.push(ManifestEntry {
            landmark_file: file,
            label,
            video_id: Some(id),
            split: v.split.into(),
        });
    }
    let manifest = DatasetManifest::new(entries);
    fs::write(args.out.join("manifest.json"), manifest.to_json()).or_data()?;
    let train = manifest
        .entries
        .iter()
        .filter(|e| e.split == Split::Train)
        .count();
    println!(
        "{} videos ({train} train, {} test), {frames} frames in {}",
        videos.len(),
        videos.len() - train,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let report = EvalReport::load(&args.report).or_data()?;
    let body = match args.format {
        ReportFormat::Text => report.summary(),
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.roc_csv(),
    };
    write_output(args.out.as_deref(), &body)
}
