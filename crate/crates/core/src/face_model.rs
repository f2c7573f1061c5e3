//! Canonical 68-point face model and landmark index conventions.
//!
//! Landmarks are numbered 1..=68 in the usual 68-point annotation order:
//! jaw contour 1-17, brows 18-27, nose 28-36, eyes 37-48, mouth 49-68.

use crate::geometry::WorldPoint;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

pub const NUM_LANDMARKS: usize = 68;

/// Maximum allowed distance of the model centroid from the origin.
pub const CENTROID_TOL: f64 = 1e-6;

/// Relative eigenvalue threshold below which a point cloud counts as flat.
const RANK_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("points: expected {expected} points, got {got}")]
    WrongPointCount { expected: usize, got: usize },
    #[error("points[{index}]: non-finite coordinate")]
    NonFinite { index: usize },
    #[error("points: the point set is coplanar")]
    Coplanar,
    #[error("points: centroid {centroid:?} is not at the origin")]
    NotCentered { centroid: [f64; 3] },
    #[error("indices: landmark index {0} outside 1..=68")]
    IndexOutOfRange(usize),
    #[error("indices: not strictly increasing at position {0}")]
    IndicesNotIncreasing(usize),
}

impl ModelError {
    /// Name of the offending schema field.
    pub fn field(&self) -> &'static str {
        match self {
            ModelError::IndexOutOfRange(_) | ModelError::IndicesNotIncreasing(_) => "indices",
            _ => "points",
        }
    }
}

/// Strictly increasing 1-based landmark indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LandmarkIndexSet(Vec<usize>);

impl LandmarkIndexSet {
    pub fn new(indices: Vec<usize>) -> Result<Self, ModelError> {
        if let Some(&bad) = indices.iter().find(|&&i| !(1..=NUM_LANDMARKS).contains(&i)) {
            return Err(ModelError::IndexOutOfRange(bad));
        }
        if let Some(pos) = indices.windows(2).position(|w| w[0] >= w[1]) {
            return Err(ModelError::IndicesNotIncreasing(pos + 1));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn is_subset_of(&self, other: &LandmarkIndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }
}

/// Brows and nose (18-36) plus the two mouth corners (49, 55).
pub fn central_indices() -> LandmarkIndexSet {
    LandmarkIndexSet((18..=36).chain([49, 55]).collect())
}

/// Jaw contour, brows and nose (1-36) plus the two mouth corners (49, 55).
pub fn whole_face_indices() -> LandmarkIndexSet {
    LandmarkIndexSet((1..=36).chain([49, 55]).collect())
}

/// Everything inside the jaw contour (18-68): the region a face swap replaces.
pub fn inner_face_indices() -> LandmarkIndexSet {
    LandmarkIndexSet((18..=NUM_LANDMARKS).collect())
}

/// 68 model points in landmark order, centered at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFaceModel {
    name: String,
    version: String,
    points: Vec<WorldPoint>,
}

impl CanonicalFaceModel {
    /// Validates point count, finiteness, centering and non-coplanarity.
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        points: Vec<WorldPoint>,
    ) -> Result<Self, ModelError> {
        if points.len() != NUM_LANDMARKS {
            return Err(ModelError::WrongPointCount {
                expected: NUM_LANDMARKS,
                got: points.len(),
            });
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(ModelError::NonFinite { index });
        }
        let centroid = centroid(&points);
        if crate::linalg::norm(&centroid) > CENTROID_TOL {
            return Err(ModelError::NotCentered { centroid });
        }
        if centered_rank(&points) < 3 {
            return Err(ModelError::Coplanar);
        }
        Ok(Self {
            name: name.into(),
            version: version.into(),
            points,
        })
    }

    /// Shifts `points` so their centroid is the origin, then validates.
    pub fn new_centered(
        name: impl Into<String>,
        version: impl Into<String>,
        mut points: Vec<WorldPoint>,
    ) -> Result<Self, ModelError> {
        if points.len() == NUM_LANDMARKS && points.iter().all(WorldPoint::is_finite) {
            let c = centroid(&points);
            for p in &mut points {
                *p = WorldPoint::new(p.u - c[0], p.v - c[1], p.w - c[2]);
            }
        }
        Self::new(name, version, points)
    }

    /// The bundled mean-face geometry.
    ///
    /// Millimetre-scale model with x to the subject's left (image right), y
    /// down and z pointing away from the camera for a frontal face, so the
    /// nose tip has the most negative depth. Symmetric about `u = 0` and
    /// centered on its centroid.
    pub fn mean_face() -> Self {
        Self::new("mean-face-68", "1.0", MEAN_FACE.to_vec()).expect("bundled model is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn points(&self) -> &[WorldPoint] {
        &self.points
    }

    /// Point for a 1-based landmark index.
    pub fn point(&self, index: usize) -> Option<&WorldPoint> {
        index.checked_sub(1).and_then(|i| self.points.get(i))
    }

    /// Model points for `idx`, in index order.
    pub fn select(&self, idx: &LandmarkIndexSet) -> Vec<WorldPoint> {
        idx.indices().iter().map(|&i| self.points[i - 1]).collect()
    }

    pub fn describe(&self) -> String {
        let mut s = self.name.to_string();
        s.push(' ');
        s.push_str(&self.version);
        s
    }
}

fn centroid(points: &[WorldPoint]) -> [f64; 3] {
    let n = points.len() as f64;
    let sum = points.iter().fold([0.0; 3], |acc, p| {
        [acc[0] + p.u, acc[1] + p.v, acc[2] + p.w]
    });
    [sum[0] / n, sum[1] / n, sum[2] / n]
}

/// Rank of the centered coordinate matrix, judged from the eigenvalues of the
/// 3x3 scatter matrix relative to the largest one.
pub fn centered_rank(points: &[WorldPoint]) -> usize {
    if points.is_empty() {
        return 0;
    }
    let c = centroid(points);
    let mut s = [[0.0; 3]; 3];
    for p in points {
        let d = [p.u - c[0], p.v - c[1], p.w - c[2]];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += d[i] * d[j];
            }
        }
    }
    let eig = symmetric_eigenvalues(&s);
    if !(eig[0] > 0.0) {
        return 0;
    }
    eig.iter().filter(|&&e| e > RANK_REL_TOL * eig[0]).count()
}

/// Eigenvalues of a symmetric 3x3 matrix, largest first.
fn symmetric_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q) * (a[0][0] - q)
        + (a[1][1] - q) * (a[1][1] - q)
        + (a[2][2] - q) * (a[2][2] - q)
        + 2.0 * p1;
    let p = libm::sqrt(p2 / 6.0);
    let mut b = *a;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= q;
        for v in row.iter_mut() {
            *v /= p;
        }
    }
    let r = (crate::linalg::det(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = libm::acos(r) / 3.0;
    let e1 = q + 2.0 * p * libm::cos(phi);
    let e3 = q + 2.0 * p * libm::cos(phi + 2.0 * core::f64::consts::PI / 3.0);
    [e1, 3.0 * q - e1 - e3, e3]
}

const fn wp(u: f64, v: f64, w: f64) -> WorldPoint {
    WorldPoint::new(u, v, w)
}

#[rustfmt::skip]
const MEAN_FACE: [WorldPoint; NUM_LANDMARKS] = [
    wp(-68.0, -30.526, 56.074), // 1
    wp(-66.693, -12.968, 54.095), // 2
    wp(-62.824, 3.916, 48.459), // 3
    wp(-56.54, 19.475, 40.024), // 4
    wp(-48.083, 33.114, 30.074), // 5
    wp(-37.779, 44.306, 20.124), // 6
    wp(-26.022, 52.623, 11.689), // 7
    wp(-13.266, 57.745, 6.053), // 8
    wp(0.0, 59.474, 4.074), // 9
    wp(13.266, 57.745, 6.053), // 10
    wp(26.022, 52.623, 11.689), // 11
    wp(37.779, 44.306, 20.124), // 12
    wp(48.083, 33.114, 30.074), // 13
    wp(56.54, 19.475, 40.024), // 14
    wp(62.824, 3.916, 48.459), // 15
    wp(66.693, -12.968, 54.095), // 16
    wp(68.0, -30.526, 56.074), // 17
    wp(-56.0, -46.526, 6.074), // 18
    wp(-46.0, -53.526, -1.926), // 19
    wp(-35.0, -56.526, -6.926), // 20
    wp(-24.0, -55.526, -10.926), // 21
    wp(-13.0, -51.526, -12.926), // 22
    wp(13.0, -51.526, -12.926), // 23
    wp(24.0, -55.526, -10.926), // 24
    wp(35.0, -56.526, -6.926), // 25
    wp(46.0, -53.526, -1.926), // 26
    wp(56.0, -46.526, 6.074), // 27
    wp(0.0, -38.526, -14.926), // 28
    wp(0.0, -27.526, -20.926), // 29
    wp(0.0, -16.526, -26.926), // 30
    wp(0.0, -5.526, -33.926), // 31
    wp(-15.0, 3.474, -13.926), // 32
    wp(-8.0, 6.474, -18.926), // 33
    wp(0.0, 7.456, -21.958), // 34
    wp(8.0, 6.474, -18.926), // 35
    wp(15.0, 3.474, -13.926), // 36
    wp(-45.0, -35.526, 0.074), // 37
    wp(-38.0, -40.526, -4.926), // 38
    wp(-28.0, -40.526, -5.926), // 39
    wp(-20.0, -34.526, -4.926), // 40
    wp(-28.0, -31.526, -4.926), // 41
    wp(-38.0, -31.526, -3.926), // 42
    wp(20.0, -34.526, -4.926), // 43
    wp(28.0, -40.526, -5.926), // 44
    wp(38.0, -40.526, -4.926), // 45
    wp(45.0, -35.526, 0.074), // 46
    wp(38.0, -31.526, -3.926), // 47
    wp(28.0, -31.526, -4.926), // 48
    wp(-26.0, 30.474, -3.926), // 49
    wp(-17.0, 25.474, -11.926), // 50
    wp(-7.0, 23.474, -16.926), // 51
    wp(0.0, 24.474, -17.926), // 52
    wp(7.0, 23.474, -16.926), // 53
    wp(17.0, 25.474, -11.926), // 54
    wp(26.0, 30.474, -3.926), // 55
    wp(17.0, 37.474, -10.926), // 56
    wp(8.0, 40.474, -14.926), // 57
    wp(0.0, 41.474, -15.926), // 58
    wp(-8.0, 40.474, -14.926), // 59
    wp(-17.0, 37.474, -10.926), // 60
    wp(-21.0, 30.474, -6.926), // 61
    wp(-8.0, 28.474, -13.926), // 62
    wp(0.0, 28.474, -14.926), // 63
    wp(8.0, 28.474, -13.926), // 64
    wp(21.0, 30.474, -6.926), // 65
    wp(8.0, 31.474, -13.926), // 66
    wp(0.0, 31.474, -14.926), // 67
    wp(-8.0, 31.474, -13.926), // 68
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_set() {
        let c = central_indices();
        assert_eq!(c.len(), 21);
        assert!(c.contains(18) && c.contains(55));
        assert!(!c.contains(1) && !c.contains(37));
        assert_eq!(c.indices()[0], 18);
        assert_eq!(c, central_indices());
    }

    #[test]
    fn whole_face_set() {
        let w = whole_face_indices();
        assert_eq!(w.len(), 38);
        assert!(central_indices().is_subset_of(&w));
        for i in (37..=48).chain(56..=68) {
            assert!(!w.contains(i), "{i}");
        }
        assert!((1..=36).all(|i| w.contains(i)) && w.contains(49) && w.contains(55));
    }

    #[test]
    fn index_set_validation() {
        assert_eq!(
            LandmarkIndexSet::new(alloc::vec![0, 1]),
            Err(ModelError::IndexOutOfRange(0))
        );
        assert_eq!(
            LandmarkIndexSet::new(alloc::vec![5, 69]),
            Err(ModelError::IndexOutOfRange(69))
        );
        assert_eq!(
            LandmarkIndexSet::new(alloc::vec![3, 3]),
            Err(ModelError::IndicesNotIncreasing(1))
        );
        assert!(LandmarkIndexSet::new(alloc::vec![1, 2, 68]).is_ok());
    }

    #[test]
    fn bundled_model_is_valid() {
        let m = CanonicalFaceModel::mean_face();
        assert_eq!(m.points().len(), 68);
        let c = centroid(m.points());
        assert!(crate::linalg::norm(&c) < 1e-9, "{c:?}");
        // left/right symmetry: point 1 mirrors point 17
        let (p1, p17) = (m.point(1).unwrap(), m.point(17).unwrap());
        assert_eq!(p1.u, -p17.u);
        assert_eq!((p1.v, p1.w), (p17.v, p17.w));
    }

    #[test]
    fn model_subsets_are_not_coplanar() {
        let m = CanonicalFaceModel::mean_face();
        assert_eq!(centered_rank(&m.select(&whole_face_indices())), 3);
        assert_eq!(centered_rank(&m.select(&central_indices())), 3);
    }

    #[test]
    fn select_preserves_order() {
        let m = CanonicalFaceModel::mean_face();
        assert_eq!(m.select(&central_indices()).len(), 21);
        assert_eq!(m.select(&whole_face_indices()).len(), 38);
        let one = m.select(&LandmarkIndexSet::new(alloc::vec![1]).unwrap());
        assert_eq!(one, alloc::vec![m.points()[0]]);
    }

    #[test]
    fn wrong_count_names_points_field() {
        let err = CanonicalFaceModel::new("x", "1", MEAN_FACE[..67].to_vec()).unwrap_err();
        assert_eq!(
            err,
            ModelError::WrongPointCount {
                expected: 68,
                got: 67
            }
        );
        assert_eq!(err.field(), "points");
    }

    #[test]
    fn rejects_flat_and_non_finite_models() {
        let flat: Vec<WorldPoint> = MEAN_FACE
            .iter()
            .map(|p| WorldPoint::new(p.u, p.v, 0.0))
            .collect();
        assert_eq!(
            CanonicalFaceModel::new_centered("flat", "1", flat).unwrap_err(),
            ModelError::Coplanar
        );
        let mut bad = MEAN_FACE.to_vec();
        bad[10].w = f64::NAN;
        assert_eq!(
            CanonicalFaceModel::new("nan", "1", bad).unwrap_err(),
            ModelError::NonFinite { index: 10 }
        );
        let shifted: Vec<WorldPoint> = MEAN_FACE
            .iter()
            .map(|p| WorldPoint::new(p.u + 1.0, p.v, p.w))
            .collect();
        assert!(matches!(
            CanonicalFaceModel::new("s", "1", shifted.clone()),
            Err(ModelError::NotCentered { .. })
        ));
        assert!(CanonicalFaceModel::new_centered("s", "1", shifted).is_ok());
    }

    #[test]
    fn eigenvalues_of_diagonal_and_rotated() {
        assert_eq!(
            symmetric_eigenvalues(&[[1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 2.0]]),
            [3.0, 2.0, 1.0]
        );
        let e = symmetric_eigenvalues(&[[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 0.0]]);
        assert!((e[0] - 3.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12 && e[2].abs() < 1e-12);
    }
}
