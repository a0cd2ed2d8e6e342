use nalgebra::{Matrix3, Matrix6, SMatrix, Vector6};

use super::{
    reprojection_cost, CameraIntrinsics, FaceModel, GeometryError, HeadPose, Rotation, Vec2,
    Vec3, LANDMARK_COUNT,
};

/// Levenberg-Marquardt settings for [`refine_pose`].
#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub max_iterations: usize,
    /// Stop once the relative cost decrease of an accepted step falls below this.
    pub relative_tolerance: f64,
    pub initial_damping: f64,
    pub max_retries: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            relative_tolerance: 1e-10,
            initial_damping: 1e-3,
            max_retries: 10,
        }
    }
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

type Jacobian = SMatrix<f64, { 2 * LANDMARK_COUNT }, 6>;
type Residuals = SMatrix<f64, { 2 * LANDMARK_COUNT }, 1>;

/// Residuals and Jacobian w.r.t. a left rotation increment and a translation increment.
fn linearize(
    model: &FaceModel,
    r: &Rotation,
    t: &Vec3,
    landmarks: &[Vec2; LANDMARK_COUNT],
    k: &CameraIntrinsics,
) -> (Residuals, Jacobian) {
    let mut res = Residuals::zeros();
    let mut jac = Jacobian::zeros();
    for (i, (p, obs)) in model.points().iter().zip(landmarks).enumerate() {
        let rp = r.rotate(p);
        let q = rp + t;
        let inv_z = 1.0 / q.z;
        res[2 * i] = k.fx * q.x * inv_z + k.cx - obs.x;
        res[2 * i + 1] = k.fy * q.y * inv_z + k.cy - obs.y;
        let dproj = nalgebra::Matrix2x3::new(
            k.fx * inv_z,
            0.0,
            -k.fx * q.x * inv_z * inv_z,
            0.0,
            k.fy * inv_z,
            -k.fy * q.y * inv_z * inv_z,
        );
        let drot = dproj * (-skew(&rp));
        jac.fixed_view_mut::<2, 3>(2 * i, 0).copy_from(&drot);
        jac.fixed_view_mut::<2, 3>(2 * i, 3).copy_from(&dproj);
    }
    (res, jac)
}

/// Refines a pose by minimizing the summed squared pixel reprojection error
/// over axis-angle rotation and translation.
///
/// The returned pose never has a higher cost than `init`. When every damping
/// retry fails to lower the cost the current pose is taken as converged.
pub fn refine_pose(
    init: &HeadPose,
    model: &FaceModel,
    landmarks: &[Vec2; LANDMARK_COUNT],
    k: &CameraIntrinsics,
    opts: &RefineOptions,
) -> Result<HeadPose, GeometryError> {
    let mut r = init.rotation;
    let mut t = init.translation;
    let mut cost = reprojection_cost(model, &r, &t, landmarks, k);
    if !cost.is_finite() {
        return Err(GeometryError::DivergedRefinement(
            "initial pose has non-finite reprojection cost",
        ));
    }
    let mut lambda = opts.initial_damping;

    'outer: for _ in 0..opts.max_iterations {
        if cost == 0.0 {
            break;
        }
        let (res, jac) = linearize(model, &r, &t, landmarks, k);
        let jtj: Matrix6<f64> = jac.transpose() * jac;
        let grad: Vector6<f64> = jac.transpose() * res;

        for _ in 0..opts.max_retries {
            let mut damped = jtj;
            for d in 0..6 {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&-grad)) else {
                lambda *= 10.0;
                continue;
            };
            let dr = Vec3::new(step[0], step[1], step[2]);
            let dt = Vec3::new(step[3], step[4], step[5]);
            let r_new = Rotation::from_axis_angle(&dr) * r;
            let t_new = t + dt;
            let new_cost = reprojection_cost(model, &r_new, &t_new, landmarks, k);
            if new_cost < cost {
                let rel = (cost - new_cost) / cost;
                r = r_new;
                t = t_new;
                cost = new_cost;
                lambda = (lambda / 10.0).max(1e-15);
                if rel < opts.relative_tolerance {
                    break 'outer;
                }
                continue 'outer;
            }
            lambda *= 10.0;
        }
        // no retry lowered the cost: local minimum within numerical precision
        break;
    }
    Ok(HeadPose::new(model, r, t))
}
