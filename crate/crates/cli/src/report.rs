//! Evaluation reports: pretty JSON, a plain-text summary and a ROC CSV.
//!
//! Schema of `report.json`:
//!
//! ```text
//! {
//!   "variant": "RMAT_T",
//!   "frames": 834,            // scored frames
//!   "videos": 28,             // distinct video ids among scored frames
//!   "skipped": 2,             // frames whose poses could not be estimated
//!   "rejected": 0,            // malformed records
//!   "auroc_frame": 0.99,
//!   "auroc_video": 1.0,       // null when some frame lacks a video id
//!   "roc_points": [[fpr, tpr], ...],
//!   "histogram": {"bin_edges": [...], "real": [...], "fake": [...],
//!                 "real_outside": 0, "fake_outside": 0}
//! }
//! ```

use anyhow::{bail, Context, Result};
use headpose_core::eval::Histogram;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub variant: String,
    pub frames: usize,
    pub videos: usize,
    pub skipped: usize,
    pub rejected: usize,
    pub auroc_frame: f64,
    pub auroc_video: Option<f64>,
    pub roc_points: Vec<[f64; 2]>,
    pub histogram: HistogramReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramReport {
    pub bin_edges: Vec<f64>,
    pub real: Vec<u64>,
    pub fake: Vec<u64>,
    pub real_outside: u64,
    pub fake_outside: u64,
}

impl From<&Histogram> for HistogramReport {
    fn from(h: &Histogram) -> Self {
        Self {
            bin_edges: h.bin_edges.clone(),
            real: h.real.clone(),
            fake: h.fake.clone(),
            real_outside: h.real_outside,
            fake_outside: h.fake_outside,
        }
    }
}

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl EvalReport {
    /// Structural checks beyond what the JSON schema enforces.
    pub fn validate(&self) -> Result<()> {
        if !unit(self.auroc_frame) || !self.auroc_video.is_none_or(unit) {
            bail!("AUROC values must lie in [0, 1]");
        }
        if self.roc_points.first() != Some(&[0.0, 0.0])
            || self.roc_points.last() != Some(&[1.0, 1.0])
        {
            bail!("ROC curve must run from (0, 0) to (1, 1)");
        }
        if self
            .roc_points
            .windows(2)
            .any(|w| w[1][0] < w[0][0] || w[1][1] < w[0][1])
        {
            bail!("ROC points must be monotone");
        }
        let h = &self.histogram;
        Histogram::new(h.bin_edges.clone())?;
        let bins = h.bin_edges.len() - 1;
        if h.real.len() != bins || h.fake.len() != bins {
            bail!("histogram needs {bins} counts per class");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).context("report schema")?;
        report.validate()?;
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("report {}", path.display()))
    }

    pub fn roc_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for [fpr, tpr] in &self.roc_points {
            let _ = writeln!(s, "{fpr},{tpr}");
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "variant       {}", self.variant);
        let _ = writeln!(
            s,
            "frames        {} ({} skipped, {} rejected)",
            self.frames, self.skipped, self.rejected
        );
        let _ = writeln!(s, "videos        {}", self.videos);
        let _ = writeln!(s, "AUROC frame   {:.4}", self.auroc_frame);
        match self.auroc_video {
            Some(a) => {
                let _ = writeln!(s, "AUROC video   {a:.4}");
            }
            None => {
                let _ = writeln!(s, "AUROC video   n/a (frames without video ids)");
            }
        }
        let h = &self.histogram;
        let _ = writeln!(s, "\ncosine distance     real     fake");
        for (k, w) in h.bin_edges.windows(2).enumerate() {
            let _ = writeln!(
                s,
                "[{:.3}, {:.3})  {:>8} {:>8}",
                w[0], w[1], h.real[k], h.fake[k]
            );
        }
        let _ = writeln!(
            s,
            "outside         {:>8} {:>8}",
            h.real_outside, h.fake_outside
        );
        s
    }

    /// Writes `report.json`, `report.txt` and `roc.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (name, body) in [
            ("report.json", self.to_json()),
            ("report.txt", self.summary()),
            ("roc.csv", self.roc_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EvalReport {
        let mut h = Histogram::new(vec![0.0, 0.01, 0.02]).unwrap();
        h.add(0.001, headpose_core::Label::Real);
        h.add(0.5, headpose_core::Label::Fake);
        EvalReport {
            variant: "V".into(),
            frames: 2,
            videos: 2,
            skipped: 0,
            rejected: 0,
            auroc_frame: 1.0,
            auroc_video: Some(1.0),
            roc_points: vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            histogram: HistogramReport::from(&h),
        }
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        assert_eq!(EvalReport::from_json(&r.to_json()).unwrap(), r);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["histogram"]["fake_outside"], 1);
    }

    #[test]
    fn rejects_malformed() {
        let mut r = report();
        r.roc_points.reverse();
        assert!(r.validate().is_err());
        let mut r = report();
        r.histogram.real.pop();
        assert!(r.validate().is_err());
        let mut r = report();
        r.auroc_video = Some(1.5);
        assert!(r.validate().is_err());
    }

    #[test]
    fn csv_and_summary() {
        let r = report();
        assert_eq!(r.roc_csv(), "fpr,tpr\n0,0\n0,1\n1,1\n");
        assert!(r.summary().contains("AUROC frame   1.0000"));
    }
}
