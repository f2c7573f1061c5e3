//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Build with optimizations (the workspace test profile already does); the two
//! full synthetic experiments take a few minutes on one core.

use headpose_core::eval::{auroc_from_scores, roc_from_scores};
use headpose_core::face_model::whole_face_indices;
use headpose_core::features::estimate_dual_pose;
use headpose_core::pnp::{default_initial_pose, projection_jacobian};
use headpose_core::svm::{train_with, LabeledSample, SvmModel, SvmParams, TrainOptions};
use headpose_core::synth::{generate, generate_videos, ShiftRegion, SynthConfig};
use headpose_core::synth::{paper_scale_experiment, ExperimentReport};
use headpose_core::{
    solve_pnp, CameraIntrinsics, CanonicalFaceModel, FeatureVariant, ImagePoint, Label, Pose,
    RodriguesVector, WorldPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_axis(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn scaled(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn pnp_oracle_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let model = CanonicalFaceModel::mean_face();
    let world = model.select(&whole_face_indices());
    let cam = CameraIntrinsics::new(640.0, 640.0, 320.0, 240.0).unwrap();
    let (mut worst_rot, mut worst_t, mut elapsed) = (0.0f64, 0.0f64, 0.0);
    for _ in 0..100 {
        let angle = rng.random_range(0.0..0.8);
        let r = RodriguesVector(scaled(random_axis(&mut rng), angle));
        let t = [
            rng.random_range(-60.0..60.0),
            rng.random_range(-60.0..60.0),
            rng.random_range(350.0..1200.0),
        ];
        let truth = Pose::from_rodrigues(r, t);
        let image: Vec<ImagePoint> = world
            .iter()
            .map(|p| {
                let [x, y, z] = truth.transform(p);
                ImagePoint::new(cam.fx() * x / z + cam.cx(), cam.fy() * y / z + cam.cy())
            })
            .collect();
        let start = Instant::now();
        let init = default_initial_pose(&world, &image, &cam);
        let sol = solve_pnp(&world, &image, &cam, &init).unwrap();
        elapsed += start.elapsed().as_secs_f64();
        worst_rot = worst_rot.max(sol.pose.rotation.geodesic_distance(&truth.rotation));
        let dt: Vec<f64> = (0..3).map(|k| sol.pose.translation[k] - t[k]).collect();
        worst_t = worst_t.max(norm(&[dt[0], dt[1], dt[2]]) / norm(&t));
    }
    let ms = elapsed * 1e3 / 100.0;
    outcome(
        worst_rot < 1e-5 && worst_t < 1e-5 && ms < 5.0,
        format!("max rotation error {worst_rot:.2e} rad, max relative translation error {worst_t:.2e}, {ms:.3} ms/solve"),
    )
}

fn jacobian_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cam = CameraIntrinsics::new(500.0, 520.0, 256.0, 200.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let r = scaled(random_axis(&mut rng), rng.random_range(0.05..2.5));
        let params = [
            r[0],
            r[1],
            r[2],
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(300.0..900.0),
        ];
        let p = WorldPoint::new(
            rng.random_range(-80.0..80.0),
            rng.random_range(-80.0..80.0),
            rng.random_range(-60.0..60.0),
        );
        let (_, jac) = projection_jacobian(&params, &p, &cam).unwrap();
        for k in 0..6 {
            // step proportional to the parameter scale
            let h = 1e-6 * params[k].abs().max(1.0);
            let (mut plus, mut minus) = (params, params);
            plus[k] += h;
            minus[k] -= h;
            let (a, _) = projection_jacobian(&plus, &p, &cam).unwrap();
            let (b, _) = projection_jacobian(&minus, &p, &cam).unwrap();
            let fd = [(a.x - b.x) / (2.0 * h), (a.y - b.y) / (2.0 * h)];
            for row in 0..2 {
                let rel = (fd[row] - jac[row][k]).abs() / jac[row][k].abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    outcome(
        worst < 1e-5,
        format!("max relative deviation {worst:.2e} over 20 samples"),
    )
}

fn rodrigues_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst_vec, mut worst_mat) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let angle = match i % 10 {
            0 => PI,
            1 | 2 => PI - rng.random_range(0.0..1e-6),
            _ => rng.random_range(0.0..PI),
        };
        let r = scaled(random_axis(&mut rng), angle);
        let rot = RodriguesVector(r).to_rotation();
        let back = rot.to_rodrigues().0;
        let direct = norm(&[back[0] - r[0], back[1] - r[1], back[2] - r[2]]);
        // at exactly pi, r and -r are the same rotation
        let err = if angle == PI {
            direct.min(norm(&[back[0] + r[0], back[1] + r[1], back[2] + r[2]]))
        } else {
            direct
        };
        worst_vec = worst_vec.max(err);
        let again = RodriguesVector(back).to_rotation();
        for (a, b) in again
            .matrix()
            .iter()
            .flatten()
            .zip(rot.matrix().iter().flatten())
        {
            worst_mat = worst_mat.max((a - b).abs());
        }
    }
    outcome(
        worst_vec < 1e-10 && worst_mat < 1e-10,
        format!("max vector error {worst_vec:.2e}, max matrix error {worst_mat:.2e} over 1000 rotations (300 near pi)"),
    )
}

fn brute_force_auroc(scored: &[(f64, bool)]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for f in scored.iter().filter(|s| s.1) {
        for r in scored.iter().filter(|s| !s.1) {
            pairs += 1.0;
            if f.0 > r.0 {
                wins += 1.0;
            } else if f.0 == r.0 {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn auroc_brute_force() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut worst_pairs, mut worst_area) = (0.0f64, 0.0f64);
    for set in 0..50 {
        let n = rng.random_range(2..=200);
        let quantum = [0.5, 0.1, 0.01, 0.0][set % 4];
        let mut scored: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                let fake = rng.random_bool(0.5);
                let mut s: f64 = rng.random_range(-2.0..2.0) + if fake { 0.5 } else { 0.0 };
                if quantum > 0.0 {
                    s = (s / quantum).round() * quantum;
                }
                (s, fake)
            })
            .collect();
        scored[0].1 = true;
        scored[1].1 = false;
        let a = auroc_from_scores(&scored).unwrap();
        let roc = roc_from_scores(&scored).unwrap();
        // trapezoids recomputed from the points, independent of the reported area
        let area: f64 = roc
            .points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum();
        worst_pairs = worst_pairs.max((a - brute_force_auroc(&scored)).abs());
        worst_area = worst_area.max((area - a).abs()).max((roc.auroc - a).abs());
    }
    outcome(
        worst_pairs <= 1e-12 && worst_area <= 1e-12,
        format!(
            "max |auroc - pair count| {worst_pairs:.1e}, max |trapezoid - auroc| {worst_area:.1e}"
        ),
    )
}

/// Largest KKT violation, recovering each sample's alpha from the support vectors.
fn kkt_violation(model: &SvmModel, data: &[LabeledSample], c: f64) -> (f64, f64, f64) {
    let (mut bound, mut margin) = (0.0f64, 0.0f64);
    let balance: f64 = model.dual_coefs().iter().sum();
    for s in data {
        let alpha = model
            .support_vectors()
            .iter()
            .position(|sv| sv == &s.x)
            .map_or(0.0, |k| model.dual_coefs()[k] * s.y);
        bound = bound.max(-alpha).max(alpha - c);
        let yf = s.y * model.decision_function(&s.x).unwrap();
        let tol = 1e-9 * c;
        let v = if alpha <= tol {
            1.0 - yf
        } else if alpha >= c - tol {
            yf - 1.0
        } else {
            (yf - 1.0).abs()
        };
        margin = margin.max(v);
    }
    (bound, balance.abs(), margin)
}

fn blobs(rng: &mut ChaCha8Rng, n: usize, dim: usize, gap: f64) -> Vec<LabeledSample> {
    (0..n)
        .map(|i| {
            let fake = i % 2 == 0;
            let x = (0..dim)
                .map(|d| rng.random_range(-1.0..1.0) + if fake && d == 0 { gap } else { 0.0 })
                .collect();
            LabeledSample::new(x, fake)
        })
        .collect()
}

fn svm_kkt_validity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let opts = TrainOptions::default();
    let (mut bound, mut balance, mut margin) = (0.0f64, 0.0f64, 0.0f64);
    for (k, &(c, gamma)) in [
        (0.1, 0.5),
        (1.0, 0.1),
        (10.0, 1.0),
        (100.0, 0.05),
        (1.0, 2.0),
    ]
    .iter()
    .enumerate()
    {
        // overlapping classes, so bounded and free vectors both occur
        let data = blobs(&mut rng, 60 + 20 * k, 3, 0.8);
        let (model, _) = train_with(&data, SvmParams { c, gamma }, &opts).unwrap();
        let (b, s, m) = kkt_violation(&model, &data, c);
        bound = bound.max(b);
        balance = balance.max(s);
        margin = margin.max(m);
    }
    let mut worst_acc = 1.0f64;
    for dim in [2, 5] {
        let data = blobs(&mut rng, 80, dim, 4.0);
        let (model, _) = train_with(
            &data,
            SvmParams {
                c: 10.0,
                gamma: 0.5,
            },
            &opts,
        )
        .unwrap();
        let correct = data
            .iter()
            .filter(|s| (model.decision_function(&s.x).unwrap() > 0.0) == s.is_fake())
            .count();
        worst_acc = worst_acc.min(correct as f64 / data.len() as f64);
    }
    outcome(
        bound <= 1e-12 && balance <= 1e-6 && margin <= 1e-3 + 1e-9 && worst_acc == 1.0,
        format!(
            "alpha bound excess {bound:.1e}, |sum alpha y| {balance:.1e}, margin violation {margin:.1e}, separable accuracy {worst_acc}"
        ),
    )
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn shift_statistics() -> Outcome {
    let config = SynthConfig {
        n_real: 27,
        n_fake: 27,
        frames_per_video: 30,
        image_size: 64,
        landmark_jitter_px: 0.0,
        ..SynthConfig::default()
    };
    let model = CanonicalFaceModel::mean_face();
    let videos = generate_videos(&config, &model).unwrap();
    let (reals, fakes) = videos.split_at(config.n_real);
    let region = ShiftRegion::Central21.indices();
    let mut shifts = Vec::new();
    let mut outside = 0.0f64;
    let mut faces = 0;
    // without jitter, fake video k is real video k plus the shift
    for (r, f) in reals.iter().zip(fakes) {
        for (rf, ff) in r.frames.iter().zip(&f.frames) {
            faces += 1;
            for (i, (a, b)) in rf.landmarks.iter().zip(&ff.landmarks).enumerate() {
                let d = a.distance(b);
                if region.contains(i + 1) {
                    shifts.push(d);
                } else {
                    outside = outside.max(d);
                }
            }
        }
    }
    let (mean, std) = mean_std(&shifts);
    outcome(
        faces >= 795 && (mean - 1.540).abs() <= 0.05 && (std - 0.921).abs() <= 0.05 && outside == 0.0,
        format!("{faces} fake faces, {} shifts: mean {mean:.4} px, std {std:.4} px; max contour displacement {outside}", shifts.len()),
    )
}

fn cosine_distance_distribution() -> Outcome {
    let model = CanonicalFaceModel::mean_face();
    let (mut real, mut fake, mut skipped) = (Vec::new(), Vec::new(), 0);
    for obs in generate(&SynthConfig::default(), &model).unwrap() {
        match estimate_dual_pose(&obs, &model) {
            Ok(dp) if obs.label == Label::Fake => fake.push(dp.orientation_distance()),
            Ok(dp) => real.push(dp.orientation_distance()),
            Err(_) => skipped += 1,
        }
    }
    let below = real.iter().filter(|&&d| d < 0.02).count() as f64 / real.len() as f64;
    fake.sort_by(f64::total_cmp);
    let median = fake[fake.len() / 2];
    let inside =
        fake.iter().filter(|&&d| (0.02..=0.08).contains(&d)).count() as f64 / fake.len() as f64;
    outcome(
        below >= 0.8 && (0.02..=0.08).contains(&median),
        format!(
            "real below 0.02: {:.1}%, fake median {median:.4} ({:.1}% of fakes in [0.02, 0.08]); {skipped} frames without a pose",
            100.0 * below,
            100.0 * inside
        ),
    )
}

fn table_row(report: &ExperimentReport) -> String {
    report
        .results
        .iter()
        .map(|r| format!("{} {:.3}/{:.3}", r.variant, r.frame_auroc, r.video_auroc))
        .collect::<Vec<_>>()
        .join(", ")
}

fn table_analogue() -> Outcome {
    let start = Instant::now();
    let report =
        paper_scale_experiment(&SynthConfig::default(), &CanonicalFaceModel::mean_face()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let frame = |v| report.get(v).unwrap().frame_auroc;
    let rmat_t = frame(FeatureVariant::RMatT);
    let video_ok = report
        .results
        .iter()
        .all(|r| r.video_auroc >= r.frame_auroc - 0.02);
    let translation_ok = [
        FeatureVariant::V,
        FeatureVariant::RVec,
        FeatureVariant::RMat,
    ]
    .iter()
    .all(|&b| frame(b.with_translation()) >= frame(b) - 0.02);
    outcome(
        rmat_t >= 0.85 && video_ok && translation_ok && secs < 600.0,
        format!(
            "frame/video AUROC: {}; {} train, {} test, {} skipped frames; {secs:.0} s",
            table_row(&report),
            report.train_frames,
            report.test_frames,
            report.skipped
        ),
    )
}

fn null_experiment() -> Outcome {
    let report = paper_scale_experiment(
        &SynthConfig::default().null(),
        &CanonicalFaceModel::mean_face(),
    )
    .unwrap();
    let ok = report
        .results
        .iter()
        .all(|r| (r.frame_auroc - 0.5).abs() <= 0.1);
    outcome(ok, format!("frame/video AUROC: {}", table_row(&report)))
}

fn run_pipeline(bin: &Path, dir: &Path) -> Result<Vec<u8>, String> {
    let config = dir.join("config.json");
    std::fs::write(
        &config,
        r#"{"synth": {"n_real": 8, "n_fake": 8, "frames_per_video": 5, "test_videos": 2}}"#,
    )
    .map_err(|e| e.to_string())?;
    let data = dir.join("data");
    let model = dir.join("model.json");
    let report = dir.join("report");
    let manifest = data.join("manifest.json");
    let arg = |s: &str| std::ffi::OsString::from(s);
    let steps = [
        vec![arg("synth"), arg("--out"), data.clone().into()],
        vec![
            arg("train"),
            arg("--manifest"),
            manifest.clone().into(),
            arg("--model"),
            model.clone().into(),
        ],
        vec![
            arg("eval"),
            arg("--manifest"),
            manifest.into(),
            arg("--model"),
            model.clone().into(),
            arg("--out"),
            report.clone().into(),
        ],
    ];
    for args in steps {
        let out = Command::new(bin)
            .args(["--seed", "17", "--config"])
            .arg(&config)
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
    }
    let mut bytes = std::fs::read(report.join("report.json")).map_err(|e| e.to_string())?;
    bytes.extend(std::fs::read(report.join("roc.csv")).map_err(|e| e.to_string())?);
    bytes.extend(std::fs::read(&model).map_err(|e| e.to_string())?);
    Ok(bytes)
}

fn end_to_end_determinism() -> Outcome {
    let bin = Path::new(env!("CARGO_BIN_EXE_headpose"));
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (run_pipeline(bin, a.path()), run_pipeline(bin, b.path())) {
        (Ok(x), Ok(y)) => outcome(
            x == y,
            format!(
                "report, ROC and model bytes identical across runs: {} ({} bytes)",
                x == y,
                x.len()
            ),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("pipeline failed: {e}")),
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("pnp_oracle_recovery", pnp_oracle_recovery),
        ("jacobian_finite_differences", jacobian_finite_differences),
        ("rodrigues_round_trip", rodrigues_round_trip),
        ("auroc_brute_force", auroc_brute_force),
        ("svm_kkt_validity", svm_kkt_validity),
        ("shift_statistics_64px", shift_statistics),
        ("cosine_distance_distribution", cosine_distance_distribution),
        ("variant_table_analogue", table_analogue),
        ("null_experiment", null_experiment),
        ("end_to_end_determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
