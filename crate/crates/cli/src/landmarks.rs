//! Landmark files: JSON lines, one face per line.
//!
//! ```text
//! {"id": "...", "video_id": "...", "label": "real", "width": 640, "height": 480,
//!  "landmarks": [[x, y], ...]}
//! ```
//!
//! `landmarks` holds exactly 68 points; array element `k` is landmark `k + 1` of
//! the usual 68-point scheme. `video_id` may be omitted and `label` defaults to
//! `"unknown"`.

use anyhow::Context;
use headpose_core::{FaceObservation, ImagePoint, Label};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_id: Option<String>,
    #[serde(default = "unknown_label")]
    pub label: String,
    pub width: u32,
    pub height: u32,
    pub landmarks: Vec<[f64; 2]>,
}

fn unknown_label() -> String {
    Label::Unknown.as_str().to_string()
}

impl LandmarkRecord {
    pub fn from_observation(obs: &FaceObservation) -> Self {
        Self {
            id: obs.id.clone(),
            video_id: obs.video_id.clone(),
            label: obs.label.as_str().to_string(),
            width: obs.image_width,
            height: obs.image_height,
            landmarks: obs.landmarks.iter().map(|p| [p.x, p.y]).collect(),
        }
    }

    /// Converts and validates (68 finite landmarks, positive image size, known label).
    pub fn into_observation(self) -> Result<FaceObservation, String> {
        let label: Label = self.label.parse().map_err(|e| format!("{e}"))?;
        let obs = FaceObservation {
            id: self.id,
            video_id: self.video_id,
            label,
            image_width: self.width,
            image_height: self.height,
            landmarks: self
                .landmarks
                .iter()
                .map(|p| ImagePoint::new(p[0], p[1]))
                .collect(),
        };
        obs.validate().map_err(|e| e.to_string())?;
        Ok(obs)
    }
}

/// A rejected line of a landmark file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordError {
    /// 1-based line number.
    pub line: usize,
    pub id: Option<String>,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {} (record {id}): {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLandmarks {
    pub observations: Vec<FaceObservation>,
    /// Source line of each observation.
    pub lines: Vec<usize>,
    pub rejected: Vec<RecordError>,
}

/// Parses every non-blank line; bad records are collected, not fatal.
pub fn parse_landmark_lines(text: &str) -> ParsedLandmarks {
    let mut out = ParsedLandmarks::default();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let reject = |id: Option<String>, message: String| RecordError {
            line: k + 1,
            id,
            message,
        };
        match serde_json::from_str::<LandmarkRecord>(line) {
            Ok(record) => {
                let id = record.id.clone();
                match record.into_observation() {
                    Ok(obs) => {
                        out.observations.push(obs);
                        out.lines.push(k + 1);
                    }
                    Err(msg) => out.rejected.push(reject(Some(id), msg)),
                }
            }
            Err(e) => {
                // recover the id for the message when the line is at least a JSON object
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string));
                out.rejected.push(reject(id, format!("schema error: {e}")));
            }
        }
    }
    out
}

pub fn read_landmark_file(path: &Path) -> anyhow::Result<ParsedLandmarks> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_landmark_lines(&text))
}

pub fn to_jsonl(observations: &[FaceObservation]) -> String {
    let mut out = String::new();
    for obs in observations {
        out.push_str(
            &serde_json::to_string(&LandmarkRecord::from_observation(obs))
                .expect("landmark records always serialize"),
        );
        out.push('\n');
    }
    out
}

pub fn write_landmark_file(path: &Path, observations: &[FaceObservation]) -> anyhow::Result<()> {
    fs::write(path, to_jsonl(observations)).with_context(|| format!("writing {}", path.display()))
}
