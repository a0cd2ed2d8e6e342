//! Pose recovery and normalization conditions on random synthetic geometry.

use gazekit::geometry::{estimate_head_pose, CameraIntrinsics, FaceModel, HeadPose, Rotation, Vec2, Vec3};
use gazekit::normalize::{compute_normalization, warp_eye, NormalizationParams};
use image::{GrayImage, Luma};
use nalgebra::{Matrix3, Rotation3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn camera() -> CameraIntrinsics {
    CameraIntrinsics::new(960.0, 960.0, 640.0, 360.0, 1280, 720).unwrap()
}

fn random_rotation(rng: &mut ChaCha8Rng, max_deg: f64) -> Matrix3<f64> {
    let mut a = || rng.random_range(-max_deg..=max_deg).to_radians();
    let (roll, pitch, yaw) = (a(), a(), a());
    *Rotation3::from_euler_angles(roll, pitch, yaw).matrix()
}

/// Rotation angle between two rotation matrices, accurate for tiny angles.
pub fn geodesic_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let d = a.transpose() * b;
    let s = Vec3::new(d[(2, 1)] - d[(1, 2)], d[(0, 2)] - d[(2, 0)], d[(1, 0)] - d[(0, 1)]).norm() / 2.0;
    let c = (d.trace() - 1.0) / 2.0;
    s.atan2(c).to_degrees()
}

fn pinhole(k: &CameraIntrinsics, p: &Vec3) -> Vec2 {
    Vec2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy)
}

pub struct PoseOutcome {
    pub trials: usize,
    pub passed: usize,
    pub worst_rotation_deg: f64,
    pub worst_translation_mm: f64,
}

/// Random noise-free poses with all angles within ±40° and depth 400–800 mm.
pub fn pose_oracle(trials: usize, seed: u64) -> PoseOutcome {
    let model = FaceModel::default();
    let k = camera();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = 0;
    let (mut worst_r, mut worst_t) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let r = random_rotation(&mut rng, 40.0);
        let t = Vec3::new(
            rng.random_range(-150.0..150.0),
            rng.random_range(-100.0..100.0),
            rng.random_range(400.0..800.0),
        );
        let mut lm = [Vec2::zeros(); 6];
        for (dst, p) in lm.iter_mut().zip(model.points()) {
            *dst = pinhole(&k, &(r * p + t));
        }
        let (er, et) = match estimate_head_pose(&model, &lm, &k) {
            Ok(pose) => (
                geodesic_deg(pose.rotation.matrix(), &r),
                (pose.translation - t).norm(),
            ),
            Err(_) => (f64::INFINITY, f64::INFINITY),
        };
        worst_r = worst_r.max(er);
        worst_t = worst_t.max(et);
        if er < 1e-4 && et < 1e-3 {
            passed += 1;
        }
    }
    PoseOutcome {
        trials,
        passed,
        worst_rotation_deg: worst_r,
        worst_translation_mm: worst_t,
    }
}

pub struct NormalizationOutcome {
    pub eyes: usize,
    pub max_axis_rad: f64,
    pub max_center_px: f64,
    pub max_rendered_center_px: f64,
    pub max_roll: f64,
}

/// Renders a Gaussian spot at `center` and returns the frame.
fn spot_frame(k: &CameraIntrinsics, center: Vec2, sigma: f64) -> GrayImage {
    let mut img = GrayImage::new(k.width, k.height);
    let r = (4.0 * sigma).ceil() as i64;
    let (cx, cy) = (center.x.round() as i64, center.y.round() as i64);
    for y in (cy - r).max(0)..(cy + r + 1).min(k.height as i64) {
        for x in (cx - r).max(0)..(cx + r + 1).min(k.width as i64) {
            let d2 = (x as f64 - center.x).powi(2) + (y as f64 - center.y).powi(2);
            let v = 250.0 * (-d2 / (2.0 * sigma * sigma)).exp();
            img.put_pixel(x as u32, y as u32, Luma([v.round() as u8]));
        }
    }
    img
}

fn centroid(img: &GrayImage) -> Vec2 {
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for (x, y, p) in img.enumerate_pixels() {
        let w = f64::from(p[0]);
        sx += w * f64::from(x);
        sy += w * f64::from(y);
        sw += w;
    }
    Vec2::new(sx / sw, sy / sw)
}

/// Random head poses; both eyes of each record are normalized.
pub fn normalization_conditions(records: usize, seed: u64) -> NormalizationOutcome {
    let model = FaceModel::default();
    let k = camera();
    let p = NormalizationParams::default();
    let center = Vec2::new(f64::from(p.width) / 2.0, f64::from(p.height) / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = NormalizationOutcome {
        eyes: 0,
        max_axis_rad: 0.0,
        max_center_px: 0.0,
        max_rendered_center_px: 0.0,
        max_roll: 0.0,
    };
    for _ in 0..records {
        let r = random_rotation(&mut rng, 40.0);
        let t = Vec3::new(
            rng.random_range(-150.0..150.0),
            rng.random_range(-100.0..100.0),
            rng.random_range(350.0..900.0),
        );
        let head = Rotation::from_matrix(&r).unwrap();
        let pose = HeadPose::new(&model, head, t);
        for eye in [pose.eye_center_left, pose.eye_center_right] {
            let tf = compute_normalization(&eye, &head, &k, &p).unwrap();
            let rm = tf.rotation.matrix();
            let rt = rm * eye;
            out.max_axis_rad = out.max_axis_rad.max(rt.xy().norm().atan2(rt.z));

            let src = pinhole(&k, &eye);
            let h = tf.forward_homography() * Vec3::new(src.x, src.y, 1.0);
            let crop = Vec2::new(h.x / h.z, h.y / h.z);
            out.max_center_px = out.max_center_px.max((crop - center).norm());

            let sigma = 4.0 * eye.norm() / p.distance;
            let warped = warp_eye(&spot_frame(&k, src, sigma), &tf, &p).unwrap();
            out.max_rendered_center_px = out.max_rendered_center_px.max((centroid(&warped.image) - center).norm());

            let x_head: Vec3 = r.column(0).into();
            out.max_roll = out.max_roll.max((rm * x_head).y.abs());
            out.eyes += 1;
        }
    }
    out
}
