//! Dataset manifests: which landmark files belong to which class and split.
//!
//! ```json
//! {"entries": [{"landmark_file": "landmarks/real-000.jsonl", "label": "real",
//!               "video_id": "real-000", "split": "train"}]}
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use crate::landmarks::{read_landmark_file, RecordError};
use anyhow::{bail, Context, Result};
use headpose_core::{FaceObservation, Label};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifestLabel {
    Real,
    Fake,
}

impl From<ManifestLabel> for Label {
    fn from(l: ManifestLabel) -> Self {
        match l {
            ManifestLabel::Real => Label::Real,
            ManifestLabel::Fake => Label::Fake,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl From<headpose_core::synth::Split> for Split {
    fn from(s: headpose_core::synth::Split) -> Self {
        match s {
            headpose_core::synth::Split::Train => Split::Train,
            headpose_core::synth::Split::Test => Split::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub landmark_file: PathBuf,
    pub label: ManifestLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

/// Observations of one split, plus the records that were turned away.
#[derive(Debug, Clone, Default)]
pub struct SplitData {
    pub observations: Vec<FaceObservation>,
    pub rejected: Vec<(PathBuf, RecordError)>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            entries,
            base_dir: PathBuf::new(),
        }
    }

    /// Parses the manifest, checks that every file exists and that no video id
    /// is listed under both splits.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut manifest: Self =
            serde_json::from_str(&text).with_context(|| format!("manifest {}", path.display()))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for entry in &manifest.entries {
            let file = manifest.resolve(entry);
            if !file.is_file() {
                bail!("manifest entry {} does not exist", file.display());
            }
        }
        check_entry_hygiene(&manifest.entries)?;
        Ok(manifest)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.landmark_file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifests always serialize");
        s.push('\n');
        s
    }

    /// Loads every record of `split`. Records inherit the entry's video id when
    /// they carry none and its label when theirs is `unknown`; a record whose
    /// label contradicts the entry is rejected.
    pub fn load_split(&self, split: Split) -> Result<SplitData> {
        let mut out = SplitData::default();
        for entry in self.entries.iter().filter(|e| e.split == split) {
            let path = self.resolve(entry);
            let parsed = read_landmark_file(&path)?;
            out.rejected
                .extend(parsed.rejected.into_iter().map(|r| (path.clone(), r)));
            let label = Label::from(entry.label);
            for (mut obs, line) in parsed.observations.into_iter().zip(parsed.lines) {
                if obs.label == Label::Unknown {
                    obs.label = label;
                }
                if obs.label != label {
                    let message = format!(
                        "record label {} contradicts manifest label {}",
                        obs.label, label
                    );
                    out.rejected.push((
                        path.clone(),
                        RecordError {
                            line,
                            id: Some(obs.id),
                            message,
                        },
                    ));
                    continue;
                }
                if obs.video_id.is_none() {
                    obs.video_id = entry.video_id.clone();
                }
                out.observations.push(obs);
            }
        }
        Ok(out)
    }
}

fn check_entry_hygiene(entries: &[ManifestEntry]) -> Result<()> {
    let mut splits: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    for e in entries {
        if let Some(v) = &e.video_id {
            splits.entry(v.as_str()).or_default().insert(e.split);
        }
    }
    if let Some((video, _)) = splits.iter().find(|(_, s)| s.len() > 1) {
        bail!("video {video} appears in both the train and test splits");
    }
    Ok(())
}

/// Hard error if any video id occurs in both sets of observations.
pub fn check_split_hygiene(train: &[FaceObservation], test: &[FaceObservation]) -> Result<()> {
    let train_ids: BTreeSet<&str> = train.iter().filter_map(|o| o.video_id.as_deref()).collect();
    if let Some(leak) = test
        .iter()
        .filter_map(|o| o.video_id.as_deref())
        .find(|v| train_ids.contains(v))
    {
        bail!("video {leak} contributes to both training and evaluation");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(file: &str, label: ManifestLabel, video: &str, split: Split) -> ManifestEntry {
        ManifestEntry {
            landmark_file: file.into(),
            label,
            video_id: Some(video.into()),
            split,
        }
    }

    #[test]
    fn json_shape() {
        let m = DatasetManifest::new(vec![entry(
            "a.jsonl",
            ManifestLabel::Fake,
            "v1",
            Split::Test,
        )]);
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["entries"][0]["label"], "fake");
        assert_eq!(v["entries"][0]["split"], "test");
        assert_eq!(v["entries"][0]["landmark_file"], "a.jsonl");
    }

    #[test]
    fn entry_level_leak_is_an_error() {
        let entries = vec![
            entry("a.jsonl", ManifestLabel::Real, "v1", Split::Train),
            entry("b.jsonl", ManifestLabel::Real, "v1", Split::Test),
        ];
        assert!(check_entry_hygiene(&entries).is_err());
        assert!(check_entry_hygiene(&entries[..1]).is_ok());
    }

    #[test]
    fn record_level_leak_is_an_error() {
        let obs = |v: &str| FaceObservation {
            id: "x".into(),
            video_id: Some(v.into()),
            label: Label::Real,
            image_width: 1,
            image_height: 1,
            landmarks: vec![],
        };
        assert!(check_split_hygiene(&[obs("a")], &[obs("b")]).is_ok());
        assert!(check_split_hygiene(&[obs("a")], &[obs("b"), obs("a")]).is_err());
    }
}
