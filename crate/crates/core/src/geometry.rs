//! Pinhole camera geometry: world and image points, intrinsics, rotations and poses.
//!
//! A [`Pose`] maps world (face model) coordinates into camera coordinates,
//! `X = R * P + t`. Projection divides by the camera depth `Z`, which is the
//! unknown scale factor of the homogeneous pinhole equation.

use crate::linalg::{self, Mat3, Vec3, IDENTITY};
use thiserror::Error;

/// Depth at or below which a camera-space point counts as behind the camera.
pub const EPS_DEPTH: f64 = 1e-9;

/// Rotation angles below this map to the identity matrix exactly.
pub const EPS_ANGLE: f64 = 1e-12;

/// Elementwise tolerance on `R^T R - I` and on `det(R) - 1`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point behind camera (depth {depth})")]
    PointBehindCamera { depth: f64 },
    #[error("invalid rotation: max |R^T R - I| = {orthogonality}, det = {det}")]
    InvalidRotation { orthogonality: f64, det: f64 },
    #[error("invalid camera intrinsics: focal lengths must be positive and all values finite")]
    InvalidIntrinsics,
    #[error("cosine distance is undefined for a zero-norm vector")]
    ZeroNorm,
}

/// A point of the canonical face model, in model units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorldPoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl WorldPoint {
    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite()
    }

    pub(crate) fn to_array(self) -> Vec3 {
        [self.u, self.v, self.w]
    }
}

/// A 2D landmark location in pixels. Not bounded by the image.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &ImagePoint) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Zero-skew, distortion-free pinhole intrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let finite = fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite();
        if !finite || fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics);
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }
}

/// Axis-angle rotation vector: unit axis scaled by the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RodriguesVector(pub [f64; 3]);

impl RodriguesVector {
    pub fn angle(&self) -> f64 {
        linalg::norm(&self.0)
    }

    pub fn to_rotation(&self) -> Rotation {
        rodrigues_to_matrix(self)
    }
}

/// A proper orthonormal 3x3 rotation matrix (row-major).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation(IDENTITY);

    /// Validates orthonormality and orientation within [`ORTHONORMAL_TOL`].
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, GeometryError> {
        let (orthogonality, det) = orthonormality_error(&m);
        if !(orthogonality <= ORTHONORMAL_TOL) || !((det - 1.0).abs() <= ORTHONORMAL_TOL) {
            return Err(GeometryError::InvalidRotation { orthogonality, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix known to be a rotation, e.g. the output of the Rodrigues formula.
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(linalg::transpose(&self.0))
    }

    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        linalg::mat_vec(&self.0, v)
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(linalg::mat_mul(&self.0, &other.0))
    }

    pub fn to_rodrigues(&self) -> RodriguesVector {
        rodrigues_from_valid(&self.0)
    }

    /// Angle in radians of the relative rotation `self^T * other`.
    pub fn geodesic_distance(&self, other: &Rotation) -> f64 {
        self.transpose().compose(other).to_rodrigues().angle()
    }

    /// Row-major flattening.
    pub fn flatten(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        ]
    }
}

/// Rigid transform from canonical model coordinates to camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: [f64; 3],
}

impl Pose {
    pub fn new(rotation: Rotation, translation: [f64; 3]) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_rodrigues(r: RodriguesVector, translation: [f64; 3]) -> Self {
        Self::new(rodrigues_to_matrix(&r), translation)
    }

    /// Camera-space coordinates `R * p + t`.
    pub fn transform(&self, p: &WorldPoint) -> [f64; 3] {
        linalg::add(&self.rotation.apply(&p.to_array()), &self.translation)
    }
}

/// Returns `(max |R^T R - I|, det R)`.
pub(crate) fn orthonormality_error(m: &Mat3) -> (f64, f64) {
    let rtr = linalg::mat_mul(&linalg::transpose(m), m);
    let mut worst = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            let e = (rtr[i][j] - IDENTITY[i][j]).abs();
            // NaN propagates as "infinitely wrong"
            worst = if e.is_nan() {
                f64::INFINITY
            } else {
                worst.max(e)
            };
        }
    }
    (worst, linalg::det(m))
}

/// Pinhole projection of a model point under `pose`.
pub fn project(
    p: &WorldPoint,
    pose: &Pose,
    cam: &CameraIntrinsics,
) -> Result<ImagePoint, GeometryError> {
    let [x, y, z] = pose.transform(p);
    if !(z > EPS_DEPTH) {
        return Err(GeometryError::PointBehindCamera { depth: z });
    }
    Ok(ImagePoint::new(
        cam.fx * x / z + cam.cx,
        cam.fy * y / z + cam.cy,
    ))
}

/// `R = I + sin(t) K + (1 - cos(t)) K^2` with `K = skew(r / t)`, `t = |r|`.
pub fn rodrigues_to_matrix(r: &RodriguesVector) -> Rotation {
    let theta = r.angle();
    if !(theta >= EPS_ANGLE) {
        return Rotation::IDENTITY;
    }
    let k = linalg::skew(&linalg::scale(&r.0, 1.0 / theta));
    let k2 = linalg::mat_mul(&k, &k);
    let s = libm::sin(theta);
    let half = libm::sin(0.5 * theta);
    let one_minus_cos = 2.0 * half * half;
    let mut m = IDENTITY;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += s * k[i][j] + one_minus_cos * k2[i][j];
        }
    }
    Rotation::from_matrix_unchecked(m)
}

/// Canonical Rodrigues vector (`|r| <= pi`) of a matrix. Validates the matrix first.
pub fn matrix_to_rodrigues(m: &[[f64; 3]; 3]) -> Result<RodriguesVector, GeometryError> {
    Rotation::from_matrix(*m).map(|r| r.to_rodrigues())
}

fn rodrigues_from_valid(m: &Mat3) -> RodriguesVector {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let c = (0.5 * (trace - 1.0)).clamp(-1.0, 1.0);
    // s = sin(theta) * axis
    let s = [
        0.5 * (m[2][1] - m[1][2]),
        0.5 * (m[0][2] - m[2][0]),
        0.5 * (m[1][0] - m[0][1]),
    ];
    let sn = linalg::norm(&s);
    let theta = libm::atan2(sn, c);

    if c > -0.5 {
        if sn == 0.0 {
            return RodriguesVector([0.0; 3]);
        }
        return RodriguesVector(linalg::scale(&s, theta / sn));
    }

    // Near pi the antisymmetric part vanishes; read the axis from the symmetric
    // part instead: (R + R^T)/2 - cos(t) I = (1 - cos(t)) n n^T.
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = 0.5 * (m[i][j] + m[j][i]) - if i == j { c } else { 0.0 };
        }
    }
    let k = (0..3).fold(0, |best, i| if b[i][i] > b[best][best] { i } else { best });
    let mut axis = [b[0][k], b[1][k], b[2][k]];
    let an = linalg::norm(&axis);
    axis = linalg::scale(&axis, 1.0 / an);

    if sn > 1e-12 {
        if linalg::dot(&axis, &s) < 0.0 {
            axis = linalg::scale(&axis, -1.0);
        }
    } else {
        // theta == pi: r and -r describe the same rotation; keep the one whose
        // first nonzero component is positive.
        let first = axis
            .iter()
            .copied()
            .find(|a| a.abs() > 1e-12)
            .unwrap_or(1.0);
        if first < 0.0 {
            axis = linalg::scale(&axis, -1.0);
        }
    }
    RodriguesVector(linalg::scale(&axis, theta))
}

/// Head orientation `R^T * [0, 0, 1]`, i.e. the third row of `R`.
pub fn head_orientation(r: &Rotation) -> [f64; 3] {
    r.0[2]
}

/// `1 - a.b / (|a| |b|)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64; 3], b: &[f64; 3]) -> Result<f64, GeometryError> {
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(GeometryError::ZeroNorm);
    }
    let cos = linalg::dot(a, b) / (na * nb);
    Ok((1.0 - cos).clamp(0.0, 2.0))
}
