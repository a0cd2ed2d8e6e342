//! Noise-free synthetic frames through pose fitting and normalization,
//! compared with gaze angles derived independently from the scene truth.

use gazekit::data::{normalize_synth, SynthConfig, TruthRecord};
use gazekit::geometry::{FaceModel, Vec3};
use gazekit::normalize::{EyeSide, NormalizationParams};

pub fn noise_free_config() -> SynthConfig {
    SynthConfig {
        persons: 4,
        records_per_person: 200,
        noise_sigma: 0.0,
        landmark_noise_px: 0.0,
        seed: 99,
        ..Default::default()
    }
}

/// Normalized gaze (yaw, pitch) of one eye built from first principles: the
/// normalized camera looks at the eye center with its x axis in the plane of
/// the head x axis.
fn oracle_angles(truth: &TruthRecord, side: EyeSide) -> (f64, f64) {
    let eye = match side {
        EyeSide::Left => &truth.left,
        EyeSide::Right => &truth.right,
    };
    let c = Vec3::from(eye.center);
    let target = Vec3::from(truth.gaze_target);
    let head_x: Vec3 = truth.rotation().matrix().column(0).into();
    let z = c.normalize();
    let y = z.cross(&head_x).normalize();
    let x = y.cross(&z);
    let g = (target - c).normalize();
    let v = Vec3::new(x.dot(&g), y.dot(&g), z.dot(&g));
    ((-v.x).atan2(-v.z), (-v.y).asin())
}

fn unit(yaw: f64, pitch: f64) -> Vec3 {
    Vec3::new(-pitch.cos() * yaw.sin(), -pitch.sin(), -pitch.cos() * yaw.cos())
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

pub struct EndToEnd {
    pub records: usize,
    pub samples: usize,
    pub dropped: usize,
    pub mean_deg: f64,
    pub max_deg: f64,
    pub sidecar_mean_deg: f64,
}

pub fn run(cfg: &SynthConfig) -> EndToEnd {
    let (set, records, truth) =
        normalize_synth(cfg, &FaceModel::default(), &NormalizationParams::default()).expect("synthesis");
    let (mut sum, mut max, mut side_sum) = (0.0, 0.0f64, 0.0);
    for (s, e) in set.samples.iter().zip(&set.index) {
        let t = &truth[e.record_index];
        let (mut yaw, pitch) = oracle_angles(t, e.eye_side);
        let eye = match e.eye_side {
            EyeSide::Left => &t.left,
            EyeSide::Right => &t.right,
        };
        let mut sidecar = eye.gaze;
        // right eyes are stored flipped into left-eye space
        if e.eye_side == EyeSide::Right {
            yaw = -yaw;
            sidecar.yaw = -sidecar.yaw;
        }
        let got = unit(s.gaze.yaw, s.gaze.pitch);
        let err = angle_deg(&got, &unit(yaw, pitch));
        sum += err;
        max = max.max(err);
        side_sum += angle_deg(&got, &unit(sidecar.yaw, sidecar.pitch));
    }
    let n = set.samples.len().max(1) as f64;
    EndToEnd {
        records: records.len(),
        samples: set.samples.len(),
        dropped: set.dropped.len(),
        mean_deg: sum / n,
        max_deg: max,
        sidecar_mean_deg: side_sum / n,
    }
}

