//! ROC analysis, per-video score aggregation and cosine-distance histograms.

use crate::face_model::CanonicalFaceModel;
use crate::features::{estimate_dual_pose, FaceObservation, Label};
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("need at least one real and one fake item (got {real} real, {fake} fake)")]
    SingleClass { real: usize, fake: usize },
    #[error("item {0} has a non-finite score")]
    NonFiniteScore(String),
    #[error("item {0} is not labeled real or fake")]
    Unlabeled(String),
    #[error("item {0} has no video id")]
    MissingVideoId(String),
    #[error("video {0} mixes real and fake frames")]
    ConflictingLabels(String),
    #[error("histogram edges must be finite and strictly increasing, with at least two")]
    InvalidEdges,
}

/// A classifier score for one frame or video; higher means more likely fake.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub id: String,
    pub video_id: Option<String>,
    pub score: f64,
    pub label: Label,
}

impl ScoredItem {
    fn is_fake(&self) -> Result<bool, EvalError> {
        match self.label {
            Label::Fake => Ok(true),
            Label::Real => Ok(false),
            Label::Unknown => Err(EvalError::Unlabeled(self.id.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    /// Trapezoidal area under `points`.
    pub auroc: f64,
}

fn to_pairs(items: &[ScoredItem]) -> Result<Vec<(f64, bool)>, EvalError> {
    items
        .iter()
        .map(|it| {
            if !it.score.is_finite() {
                return Err(EvalError::NonFiniteScore(it.id.clone()));
            }
            Ok((it.score, it.is_fake()?))
        })
        .collect()
}

/// Tie groups of `(score, fake)` pairs in ascending score order, as `(reals, fakes)` counts.
fn tie_groups(scored: &[(f64, bool)]) -> Result<Vec<(u64, u64)>, EvalError> {
    let fake = scored.iter().filter(|s| s.1).count();
    let real = scored.len() - fake;
    if fake == 0 || real == 0 {
        return Err(EvalError::SingleClass { real, fake });
    }
    if let Some(bad) = scored.iter().find(|s| !s.0.is_finite()) {
        return Err(EvalError::NonFiniteScore(alloc::format!("{}", bad.0)));
    }
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups = Vec::new();
    let mut k = 0;
    while k < sorted.len() {
        let score = sorted[k].0;
        let (mut r, mut f) = (0u64, 0u64);
        // -0.0 and 0.0 tie
        while k < sorted.len() && sorted[k].0 == score {
            if sorted[k].1 {
                f += 1;
            } else {
                r += 1;
            }
            k += 1;
        }
        groups.push((r, f));
    }
    Ok(groups)
}

/// Mann-Whitney AUROC, `P(fake > real) + P(tie) / 2`, over `(score, is_fake)` pairs.
pub fn auroc_from_scores(scored: &[(f64, bool)]) -> Result<f64, EvalError> {
    let groups = tie_groups(scored)?;
    let (n_real, n_fake) = groups
        .iter()
        .fold((0u64, 0u64), |(r, f), g| (r + g.0, f + g.1));
    // twice the win count, kept integral so the result is exact up to one rounding
    let mut twice_wins: u128 = 0;
    let mut reals_below: u64 = 0;
    for &(r, f) in &groups {
        twice_wins += 2 * f as u128 * reals_below as u128 + f as u128 * r as u128;
        reals_below += r;
    }
    Ok(twice_wins as f64 / (2.0 * n_real as f64 * n_fake as f64))
}

pub fn auroc(items: &[ScoredItem]) -> Result<f64, EvalError> {
    auroc_from_scores(&to_pairs(items)?)
}

/// ROC curve from a threshold sweep over the distinct scores, highest first.
pub fn roc_curve(items: &[ScoredItem]) -> Result<RocCurve, EvalError> {
    roc_from_scores(&to_pairs(items)?)
}

pub fn roc_from_scores(scored: &[(f64, bool)]) -> Result<RocCurve, EvalError> {
    let groups = tie_groups(scored)?;
    let (n_real, n_fake) = groups
        .iter()
        .fold((0u64, 0u64), |(r, f), g| (r + g.0, f + g.1));
    let mut points = Vec::with_capacity(groups.len() + 1);
    points.push((0.0, 0.0));
    let (mut fp, mut tp) = (0u64, 0u64);
    let mut area = 0.0;
    for &(r, f) in groups.iter().rev() {
        let prev = (tp as f64 / n_fake as f64, fp);
        fp += r;
        tp += f;
        let tpr = tp as f64 / n_fake as f64;
        area += (r as f64 / n_real as f64) * (prev.0 + tpr) / 2.0;
        points.push((fp as f64 / n_real as f64, tpr));
    }
    Ok(RocCurve {
        points,
        auroc: area,
    })
}

/// One item per video, scored by the mean frame score, in first-seen order.
pub fn aggregate_by_video(items: &[ScoredItem]) -> Result<Vec<ScoredItem>, EvalError> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut acc: Vec<(ScoredItem, f64, usize)> = Vec::new();
    for it in items {
        let vid = it
            .video_id
            .as_deref()
            .ok_or_else(|| EvalError::MissingVideoId(it.id.clone()))?;
        match index.get(vid) {
            Some(&k) => {
                let entry = &mut acc[k];
                if entry.0.label != it.label {
                    return Err(EvalError::ConflictingLabels(vid.into()));
                }
                entry.1 += it.score;
                entry.2 += 1;
            }
            None => {
                index.insert(vid, acc.len());
                let video = ScoredItem {
                    id: vid.into(),
                    video_id: Some(vid.into()),
                    score: 0.0,
                    label: it.label,
                };
                acc.push((video, it.score, 1));
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|(mut video, sum, n)| {
            video.score = sum / n as f64;
            video
        })
        .collect())
}

/// `0.000, 0.005, ..., 0.100`.
pub fn default_histogram_edges() -> Vec<f64> {
    (0..=20).map(|k| k as f64 * 0.005).collect()
}

/// Per-class counts over `[edge_k, edge_{k+1})` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub real: Vec<u64>,
    pub fake: Vec<u64>,
    /// Values outside `[first edge, last edge)`, per class.
    pub real_outside: u64,
    pub fake_outside: u64,
    /// Observations whose poses could not be estimated.
    pub skipped: u64,
}

impl Histogram {
    pub fn new(bin_edges: Vec<f64>) -> Result<Self, EvalError> {
        let valid = bin_edges.len() >= 2
            && bin_edges.iter().all(|e| e.is_finite())
            && bin_edges.windows(2).all(|w| w[0] < w[1]);
        if !valid {
            return Err(EvalError::InvalidEdges);
        }
        let bins = bin_edges.len() - 1;
        Ok(Self {
            bin_edges,
            real: vec![0; bins],
            fake: vec![0; bins],
            real_outside: 0,
            fake_outside: 0,
            skipped: 0,
        })
    }

    /// Adds a value; unlabeled values are ignored.
    pub fn add(&mut self, value: f64, label: Label) {
        let bin = self.bin_of(value);
        let (counts, outside) = match label {
            Label::Real => (&mut self.real, &mut self.real_outside),
            Label::Fake => (&mut self.fake, &mut self.fake_outside),
            Label::Unknown => return,
        };
        match bin {
            Some(b) => counts[b] += 1,
            None => *outside += 1,
        }
    }

    fn bin_of(&self, value: f64) -> Option<usize> {
        let edges = &self.bin_edges;
        if !(value >= edges[0] && value < edges[edges.len() - 1]) {
            return None;
        }
        // last edge <= value is the bin start
        Some(edges.partition_point(|&e| e <= value) - 1)
    }

    pub fn total(&self, label: Label) -> u64 {
        match label {
            Label::Real => self.real.iter().sum::<u64>() + self.real_outside,
            Label::Fake => self.fake.iter().sum::<u64>() + self.fake_outside,
            Label::Unknown => 0,
        }
    }
}

/// Histogram of `cosine_distance(v_a, v_c)` per class.
///
/// Observations whose poses fail are counted in [`Histogram::skipped`].
pub fn cosine_histogram(
    observations: &[FaceObservation],
    model: &CanonicalFaceModel,
    edges: Vec<f64>,
) -> Result<Histogram, EvalError> {
    let mut hist = Histogram::new(edges)?;
    for obs in observations {
        match estimate_dual_pose(obs, model) {
            Ok(dp) => hist.add(dp.orientation_distance(), obs.label),
            Err(_) => hist.skipped += 1,
        }
    }
    Ok(hist)
}
