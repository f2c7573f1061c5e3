//! Perspective-n-point pose estimation by Levenberg-Marquardt.
//!
//! The state is the 6-vector `(r, t)` of a Rodrigues rotation vector and a
//! translation. The cost is the sum of squared pixel reprojection residuals.

use crate::geometry::{
    CameraIntrinsics, ImagePoint, Pose, RodriguesVector, Rotation, WorldPoint, EPS_DEPTH,
};
use crate::linalg::{self, Mat3, Vec3};
use thiserror::Error;

/// Residual assigned to each coordinate of a point that lands behind the camera.
const BEHIND_CAMERA_PENALTY: f64 = 1e6;

/// Below this angle the rotation Jacobian uses its first-order form.
const SMALL_ANGLE: f64 = 1e-7;

pub const MIN_CORRESPONDENCES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PnpError {
    #[error("insufficient correspondences: need at least {MIN_CORRESPONDENCES}, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("world and image point counts differ ({world} vs {image})")]
    LengthMismatch { world: usize, image: usize },
    #[error("non-finite input coordinate at correspondence {0}")]
    NonFinite(usize),
}

/// LM schedule and stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub initial_lambda: f64,
    pub lambda_increase: f64,
    pub lambda_decrease: f64,
    /// Relative: stop once `|step| < step_tolerance * (|params| + step_tolerance)`.
    pub step_tolerance: f64,
    /// Absolute, on the largest gradient component of the cost.
    pub gradient_tolerance: f64,
    /// Stop after an accepted step that lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_increase: 10.0,
            lambda_decrease: 10.0,
            step_tolerance: 1e-10,
            gradient_tolerance: 1e-10,
            cost_tolerance: 1e-12,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpSolution {
    pub pose: Pose,
    /// `sqrt(cost / n)`: root mean squared per-point reprojection distance in pixels.
    pub final_rms_reprojection_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves PnP with the default [`LmOptions`].
pub fn solve_pnp(
    world: &[WorldPoint],
    image: &[ImagePoint],
    cam: &CameraIntrinsics,
    init: &Pose,
) -> Result<PnpSolution, PnpError> {
    solve_pnp_with(world, image, cam, init, &LmOptions::default(), |_, _| {})
}

/// Solves PnP, calling `on_accept(iteration, cost)` after every accepted step.
pub fn solve_pnp_with(
    world: &[WorldPoint],
    image: &[ImagePoint],
    cam: &CameraIntrinsics,
    init: &Pose,
    options: &LmOptions,
    mut on_accept: impl FnMut(usize, f64),
) -> Result<PnpSolution, PnpError> {
    if world.len() != image.len() {
        return Err(PnpError::LengthMismatch {
            world: world.len(),
            image: image.len(),
        });
    }
    if world.len() < MIN_CORRESPONDENCES {
        return Err(PnpError::InsufficientCorrespondences(world.len()));
    }
    if let Some(i) = (0..world.len()).find(|&i| !world[i].is_finite() || !image[i].is_finite()) {
        return Err(PnpError::NonFinite(i));
    }

    let r0 = init.rotation.to_rodrigues().0;
    let mut params = [
        r0[0],
        r0[1],
        r0[2],
        init.translation[0],
        init.translation[1],
        init.translation[2],
    ];
    let mut system = NormalEquations::build(&params, world, image, cam);
    let mut lambda = options.initial_lambda;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        let grad_norm = system.gradient.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if grad_norm < options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut a = system.jtj;
        let max_diag = (0..6).fold(0.0_f64, |m, i| m.max(a[i][i]));
        let floor = if max_diag > 0.0 {
            max_diag * 1e-12
        } else {
            1e-12
        };
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += lambda * system.jtj[i][i].max(floor);
        }
        let neg_grad = system.gradient.map(|g| -g);
        let Some(step) = linalg::cholesky_solve6(&a, &neg_grad) else {
            lambda *= options.lambda_increase;
            continue;
        };
        let step_norm = libm::sqrt(step.iter().map(|s| s * s).sum::<f64>());
        let param_norm = libm::sqrt(params.iter().map(|p| p * p).sum::<f64>());
        if step_norm < options.step_tolerance * (param_norm + options.step_tolerance) {
            converged = true;
            break;
        }

        let candidate: [f64; 6] = core::array::from_fn(|i| params[i] + step[i]);
        let cost = reprojection_cost(&candidate, world, image, cam);
        if cost < system.cost {
            let stalled = system.cost - cost <= options.cost_tolerance * system.cost;
            params = candidate;
            system = NormalEquations::build(&params, world, image, cam);
            lambda /= options.lambda_decrease;
            on_accept(iterations, system.cost);
            // flat valleys can leave the cost at rounding level long before the step or
            // gradient tests fire
            if stalled {
                converged = true;
                break;
            }
        } else {
            lambda *= options.lambda_increase;
            if !lambda.is_finite() {
                break;
            }
        }
    }

    let pose = pose_from_params(&params);
    Ok(PnpSolution {
        pose,
        final_rms_reprojection_error: libm::sqrt(system.cost / world.len() as f64),
        iterations,
        converged,
    })
}

/// Identity rotation at depth `d0 = fx * model_extent / image_extent`, with the
/// extents measured as bounding-box diagonals, so the projected model roughly
/// covers the observed landmarks.
pub fn default_initial_pose(
    world: &[WorldPoint],
    image: &[ImagePoint],
    cam: &CameraIntrinsics,
) -> Pose {
    let model_extent = bbox_diagonal(world.iter().map(|p| [p.u, p.v]));
    let image_extent = bbox_diagonal(image.iter().map(|p| [p.x, p.y]));
    let (w_min, w_max) = world
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.w), hi.max(p.w))
        });
    let mut d0 = if image_extent > 1e-9 && model_extent > 0.0 {
        cam.fx() * model_extent / image_extent
    } else {
        cam.fx()
    };
    // the whole model has to start in front of the camera
    if w_min.is_finite() {
        d0 = d0.max(-w_min + (w_max - w_min).max(1e-6));
    }
    Pose::new(Rotation::IDENTITY, [0.0, 0.0, d0])
}

fn bbox_diagonal(points: impl Iterator<Item = [f64; 2]>) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        return 0.0;
    }
    libm::hypot(hi[0] - lo[0], hi[1] - lo[1])
}

pub(crate) fn pose_from_params(params: &[f64; 6]) -> Pose {
    let rotation = RodriguesVector([params[0], params[1], params[2]]).to_rotation();
    Pose::new(rotation, [params[3], params[4], params[5]])
}

/// Projection of `point` under the state `params = (r, t)` and its 2x6 Jacobian.
/// Returns `None` when the point is not in front of the camera.
pub fn projection_jacobian(
    params: &[f64; 6],
    point: &WorldPoint,
    cam: &CameraIntrinsics,
) -> Option<(ImagePoint, [[f64; 6]; 2])> {
    let r = [params[0], params[1], params[2]];
    let rot = RodriguesVector(r).to_rotation();
    let p = point.to_array();
    let rp = rot.apply(&p);
    let [x, y, z] = linalg::add(&rp, &[params[3], params[4], params[5]]);
    if !(z > EPS_DEPTH) {
        return None;
    }
    let d_rp_d_r = rotated_point_jacobian(&r, rot.matrix(), &p, &rp);
    let inv_z = 1.0 / z;
    // d(u, v) / d(X, Y, Z)
    let d_uv = [
        [cam.fx() * inv_z, 0.0, -cam.fx() * x * inv_z * inv_z],
        [0.0, cam.fy() * inv_z, -cam.fy() * y * inv_z * inv_z],
    ];
    let mut jac = [[0.0; 6]; 2];
    for row in 0..2 {
        for k in 0..3 {
            jac[row][k] = (0..3).map(|m| d_uv[row][m] * d_rp_d_r[m][k]).sum();
            jac[row][3 + k] = d_uv[row][k];
        }
    }
    let image = ImagePoint::new(
        cam.fx() * x * inv_z + cam.cx(),
        cam.fy() * y * inv_z + cam.cy(),
    );
    Some((image, jac))
}

/// `d(R(r) p) / dr = -R [p]x (r r^T + (R^T - I)[r]x) / |r|^2`.
fn rotated_point_jacobian(r: &Vec3, rot: &Mat3, p: &Vec3, rp: &Vec3) -> Mat3 {
    let theta2 = linalg::dot(r, r);
    if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        return linalg::skew(&linalg::scale(rp, -1.0));
    }
    let rt = linalg::transpose(rot);
    let mut rt_minus_i = rt;
    for (i, row) in rt_minus_i.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    let tail = linalg::mat_mul(&rt_minus_i, &linalg::skew(r));
    let mut inner = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inner[i][j] = (r[i] * r[j] + tail[i][j]) / theta2;
        }
    }
    let lhs = linalg::mat_mul(rot, &linalg::skew(p));
    let out = linalg::mat_mul(&lhs, &inner);
    out.map(|row| row.map(|v| -v))
}

fn reprojection_cost(
    params: &[f64; 6],
    world: &[WorldPoint],
    image: &[ImagePoint],
    cam: &CameraIntrinsics,
) -> f64 {
    let pose = pose_from_params(params);
    world
        .iter()
        .zip(image)
        .map(|(w, obs)| match crate::geometry::project(w, &pose, cam) {
            Ok(p) => {
                let (dx, dy) = (p.x - obs.x, p.y - obs.y);
                dx * dx + dy * dy
            }
            Err(_) => 2.0 * BEHIND_CAMERA_PENALTY * BEHIND_CAMERA_PENALTY,
        })
        .sum()
}

struct NormalEquations {
    jtj: [[f64; 6]; 6],
    gradient: [f64; 6],
    cost: f64,
}

impl NormalEquations {
    fn build(
        params: &[f64; 6],
        world: &[WorldPoint],
        image: &[ImagePoint],
        cam: &CameraIntrinsics,
    ) -> Self {
        let mut jtj = [[0.0; 6]; 6];
        let mut gradient = [0.0; 6];
        let mut cost = 0.0;
        for (w, obs) in world.iter().zip(image) {
            let Some((proj, jac)) = projection_jacobian(params, w, cam) else {
                cost += 2.0 * BEHIND_CAMERA_PENALTY * BEHIND_CAMERA_PENALTY;
                continue;
            };
            let res = [proj.x - obs.x, proj.y - obs.y];
            cost += res[0] * res[0] + res[1] * res[1];
            for row in 0..2 {
                for i in 0..6 {
                    gradient[i] += jac[row][i] * res[row];
                    for j in 0..6 {
                        jtj[i][j] += jac[row][i] * jac[row][j];
                    }
                }
            }
        }
        Self {
            jtj,
            gradient,
            cost,
        }
    }
}
