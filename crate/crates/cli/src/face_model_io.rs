//! Face model files: `{"name", "version", "points": [[u, v, w] x 68]}`.

use anyhow::{Context, Result};
use headpose_core::{CanonicalFaceModel, WorldPoint};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// The mean face shipped with the tool, identical to [`CanonicalFaceModel::mean_face`].
pub const BUNDLED_FACE_MODEL: &str = include_str!("../assets/face_model_68.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceModelFile {
    pub name: String,
    pub version: String,
    pub points: Vec<[f64; 3]>,
}

impl FaceModelFile {
    pub fn from_model(model: &CanonicalFaceModel) -> Self {
        Self {
            name: model.name().to_string(),
            version: model.version().to_string(),
            points: model.points().iter().map(|p| [p.u, p.v, p.w]).collect(),
        }
    }

    pub fn into_model(self) -> Result<CanonicalFaceModel> {
        let points = self
            .points
            .iter()
            .map(|p| WorldPoint::new(p[0], p[1], p[2]))
            .collect();
        Ok(CanonicalFaceModel::new(self.name, self.version, points)?)
    }
}

pub fn parse_face_model(text: &str) -> Result<CanonicalFaceModel> {
    let file: FaceModelFile = serde_json::from_str(text).context("face model schema")?;
    file.into_model()
}

/// Loads `path`, or the bundled mean face when `path` is `None`.
pub fn load_face_model(path: Option<&Path>) -> Result<CanonicalFaceModel> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_face_model(&text).with_context(|| format!("face model {}", p.display()))
        }
        None => parse_face_model(BUNDLED_FACE_MODEL),
    }
}

pub fn face_model_json(model: &CanonicalFaceModel) -> String {
    serde_json::to_string_pretty(&FaceModelFile::from_model(model))
        .expect("face models always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_matches_compiled_mean_face() {
        assert_eq!(
            load_face_model(None).unwrap(),
            CanonicalFaceModel::mean_face()
        );
    }

    #[test]
    fn round_trip() {
        let model = CanonicalFaceModel::mean_face();
        assert_eq!(parse_face_model(&face_model_json(&model)).unwrap(), model);
    }

    #[test]
    fn rejects_wrong_count_and_offset() {
        let mut file = FaceModelFile::from_model(&CanonicalFaceModel::mean_face());
        file.points.pop();
        let err = file.clone().into_model().unwrap_err();
        assert!(err.to_string().starts_with("points"), "{err}");
        file.points.push([1.0, 0.0, 0.0]);
        for p in &mut file.points {
            p[0] += 5.0;
        }
        assert!(file.into_model().is_err());
    }
}
