use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_manifest, write_pgm, DataError, RawRecord};
use crate::geometry::{CameraIntrinsics, FaceModel, GazeAngles, HeadPose, Rotation, Vec3};
use crate::normalize::{compute_normalization, normalize_gaze, normalize_head, NormalizationParams};

/// Closed interval for a uniformly sampled parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn check(&self, name: &str, lo: f64, hi: f64) -> Result<(), DataError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(DataError::ConfigOutOfRange(format!(
                "{name}: [{}, {}] is not a valid interval",
                self.min, self.max
            )));
        }
        if self.min < lo || self.max > hi {
            return Err(DataError::ConfigOutOfRange(format!(
                "{name}: [{}, {}] must lie within [{lo}, {hi}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Parameters of the synthetic eye-scene generator. Angles in degrees,
/// lengths in millimetres, intensities in gray levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub persons: usize,
    pub records_per_person: usize,
    /// Added to the person index to form person ids.
    pub person_id_offset: u64,
    pub camera: CameraIntrinsics,
    pub head_yaw_deg: Range,
    pub head_pitch_deg: Range,
    pub head_roll_deg: Range,
    pub head_distance_mm: Range,
    pub head_offset_x_mm: Range,
    pub head_offset_y_mm: Range,
    /// Screen rectangle in the plane `z = screen_depth_mm`, horizontally
    /// centred on the camera, with its top edge `screen_top_mm` below it.
    pub screen_width_mm: f64,
    pub screen_height_mm: f64,
    pub screen_top_mm: f64,
    pub screen_depth_mm: f64,
    pub iris_intensity: Range,
    pub sclera_intensity: Range,
    pub skin_intensity: Range,
    /// Half-height of the open eyelid aperture.
    pub eyelid_aperture_mm: Range,
    pub eyeball_radius_mm: Range,
    /// Angular radius of the iris disc seen from the eyeball centre.
    pub iris_radius_deg: f64,
    pub pupil_radius_deg: f64,
    pub gain: Range,
    /// Intensity change from the image-left to the image-right edge of the face.
    pub gradient: Range,
    pub background: f64,
    pub noise_sigma: f64,
    pub landmark_noise_px: f64,
    /// Attach a random capture hour to each record.
    pub hours: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            persons: 4,
            records_per_person: 200,
            person_id_offset: 0,
            camera: CameraIntrinsics {
                fx: 960.0,
                fy: 960.0,
                cx: 640.0,
                cy: 360.0,
                width: 1280,
                height: 720,
            },
            head_yaw_deg: Range::new(-25.0, 25.0),
            head_pitch_deg: Range::new(-15.0, 15.0),
            head_roll_deg: Range::new(-8.0, 8.0),
            head_distance_mm: Range::new(450.0, 650.0),
            head_offset_x_mm: Range::new(-60.0, 60.0),
            head_offset_y_mm: Range::new(-40.0, 40.0),
            screen_width_mm: 330.0,
            screen_height_mm: 210.0,
            screen_top_mm: 15.0,
            screen_depth_mm: 0.0,
            iris_intensity: Range::new(40.0, 110.0),
            sclera_intensity: Range::new(195.0, 240.0),
            skin_intensity: Range::new(120.0, 200.0),
            eyelid_aperture_mm: Range::new(4.0, 5.5),
            eyeball_radius_mm: Range::new(11.5, 12.5),
            iris_radius_deg: 32.0,
            pupil_radius_deg: 13.0,
            gain: Range::new(0.8, 1.2),
            gradient: Range::new(-20.0, 20.0),
            background: 50.0,
            noise_sigma: 0.0,
            landmark_noise_px: 0.0,
            hours: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::ConfigOutOfRange(m));
        if self.persons == 0 || self.records_per_person == 0 {
            return bad("persons and records per person must be >= 1".into());
        }
        self.camera
            .validate()
            .map_err(|e| DataError::ConfigOutOfRange(e.to_string()))?;
        self.head_yaw_deg.check("head_yaw_deg", -60.0, 60.0)?;
        self.head_pitch_deg.check("head_pitch_deg", -45.0, 45.0)?;
        self.head_roll_deg.check("head_roll_deg", -45.0, 45.0)?;
        self.head_distance_mm.check("head_distance_mm", 150.0, 5000.0)?;
        self.head_offset_x_mm.check("head_offset_x_mm", -2000.0, 2000.0)?;
        self.head_offset_y_mm.check("head_offset_y_mm", -2000.0, 2000.0)?;
        for (name, r) in [
            ("iris_intensity", self.iris_intensity),
            ("sclera_intensity", self.sclera_intensity),
            ("skin_intensity", self.skin_intensity),
        ] {
            r.check(name, 0.0, 255.0)?;
        }
        self.eyeball_radius_mm.check("eyeball_radius_mm", 5.0, 20.0)?;
        self.eyelid_aperture_mm
            .check("eyelid_aperture_mm", 0.5, self.eyeball_radius_mm.min * 0.8)?;
        self.gain.check("gain", 0.0, 4.0)?;
        self.gradient.check("gradient", -255.0, 255.0)?;
        if !(self.iris_radius_deg > self.pupil_radius_deg
            && self.pupil_radius_deg > 0.0
            && self.iris_radius_deg < 80.0)
        {
            return bad("need 0 < pupil_radius_deg < iris_radius_deg < 80".into());
        }
        if !(self.screen_width_mm > 0.0 && self.screen_height_mm > 0.0) {
            return bad("screen size must be positive".into());
        }
        if !(self.screen_depth_mm >= 0.0 && self.screen_depth_mm < self.head_distance_mm.min - 100.0) {
            return bad("screen must lie between the camera plane and the face".into());
        }
        if !(0.0..=255.0).contains(&self.background) {
            return bad("background must be a gray level".into());
        }
        if !(self.noise_sigma >= 0.0 && self.landmark_noise_px >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        self.persons * self.records_per_person
    }

    pub fn person_id(&self, person: usize) -> u64 {
        self.person_id_offset + person as u64
    }
}

/// Per-person appearance drawn once from the configured ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonAppearance {
    pub iris: f64,
    pub sclera: f64,
    pub skin: f64,
    pub aperture_mm: f64,
    pub eyeball_radius_mm: f64,
}

fn rng_for(cfg: &SynthConfig, person: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((person as u64) << 32) | stream);
    rng
}

const APPEARANCE_STREAM: u64 = 0xFFFF_FFFF;

pub fn person_appearance(cfg: &SynthConfig, person: usize) -> PersonAppearance {
    let mut rng = rng_for(cfg, person, APPEARANCE_STREAM);
    PersonAppearance {
        iris: cfg.iris_intensity.sample(&mut rng),
        sclera: cfg.sclera_intensity.sample(&mut rng),
        skin: cfg.skin_intensity.sample(&mut rng),
        aperture_mm: cfg.eyelid_aperture_mm.sample(&mut rng),
        eyeball_radius_mm: cfg.eyeball_radius_mm.sample(&mut rng),
    }
}

/// Ground truth for one eye, with angles in the eye's own normalized camera
/// (not mirrored).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeTruth {
    pub center: [f64; 3],
    /// Unit vector from the eye centre to the target, camera coordinates.
    pub gaze_vector: [f64; 3],
    pub head: GazeAngles,
    pub gaze: GazeAngles,
}

/// Sidecar line describing how a frame was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub person_id: u64,
    pub index: usize,
    /// Head rotation as an axis-angle vector (radians).
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
    pub gaze_target: [f64; 3],
    pub gain: f64,
    pub gradient: f64,
    pub appearance: PersonAppearance,
    pub left: EyeTruth,
    pub right: EyeTruth,
}

impl TruthRecord {
    pub fn rotation(&self) -> Rotation {
        let [x, y, z] = self.rotation;
        Rotation::from_axis_angle(&Vec3::new(x, y, z))
    }
}

#[derive(Debug, Clone)]
pub struct SynthRecord {
    pub raw: RawRecord,
    pub frame: GrayImage,
    pub truth: TruthRecord,
}

/// Face outline in the head frame: an ellipse in the z = 0 plane.
const FACE_CENTER_Y: f64 = 25.0;
const FACE_HALF_WIDTH: f64 = 80.0;
const FACE_HALF_HEIGHT: f64 = 105.0;
/// How far the cornea apex stands in front of the face plane.
const EYE_PROTRUSION: f64 = 3.0;
const LOWER_LID_RATIO: f64 = 0.75;
const PUPIL_INTENSITY: f64 = 18.0;
const BROW_FACTOR: f64 = 0.55;
const LIMBUS_SOFTNESS: f64 = 0.035;

struct Eye {
    /// Eye centre and half width in the head frame.
    center: Vec3,
    half_width: f64,
    /// Eyeball centre in the head frame.
    ball: Vec3,
    /// Gaze direction from the eyeball centre, head frame.
    gaze: Vec3,
}

struct Scene<'a> {
    cam: &'a CameraIntrinsics,
    /// Camera origin and rotation into the head frame.
    origin_h: Vec3,
    rt: nalgebra::Matrix3<f64>,
    eyes: [Eye; 2],
    look: PersonAppearance,
    cos_iris: f64,
    cos_pupil: f64,
    gain: f64,
    gradient: f64,
    background: f64,
}

impl Scene<'_> {
    fn ray(&self, u: f64, v: f64) -> Vec3 {
        let d = Vec3::new((u - self.cam.cx) / self.cam.fx, (v - self.cam.cy) / self.cam.fy, 1.0);
        (self.rt * d).normalize()
    }

    /// Point where a head-frame ray meets the face plane.
    fn plane_hit(&self, d: &Vec3) -> Option<Vec3> {
        if d.z.abs() < 1e-12 {
            return None;
        }
        let s = -self.origin_h.z / d.z;
        (s > 0.0).then(|| self.origin_h + d * s)
    }

    fn lighting(&self, p: &Vec3) -> f64 {
        self.gradient * 0.5 * (p.x / FACE_HALF_WIDTH).clamp(-1.0, 1.0)
    }

    fn eye_shade(&self, eye: &Eye, d: &Vec3, plane: &Vec3) -> f64 {
        let oc = self.origin_h - eye.ball;
        let r = self.look.eyeball_radius_mm;
        let b = oc.dot(d);
        let disc = b * b - (oc.norm_squared() - r * r);
        if disc < 0.0 {
            return self.gain * PUPIL_INTENSITY + self.lighting(plane);
        }
        let s = -b - disc.sqrt();
        let hit = self.origin_h + d * s;
        let n = (hit - eye.ball) / r;
        let c = n.dot(&eye.gaze);
        let blend = |edge: f64| ((c - edge) / LIMBUS_SOFTNESS + 0.5).clamp(0.0, 1.0);
        let iris_w = blend(self.cos_iris);
        let pupil_w = blend(self.cos_pupil);
        let albedo = self.look.sclera * (1.0 - iris_w)
            + (self.look.iris * (1.0 - pupil_w) + PUPIL_INTENSITY * pupil_w) * iris_w;
        let facing = (-n.dot(d)).max(0.0);
        albedo * self.gain * (0.7 + 0.3 * facing) + self.lighting(&hit)
    }

    /// Radiance along the ray through continuous pixel position `(u, v)`.
    fn shade(&self, u: f64, v: f64) -> f64 {
        let d = self.ray(u, v);
        let Some(p) = self.plane_hit(&d) else {
            return self.background * self.gain;
        };
        let fx = p.x / FACE_HALF_WIDTH;
        let fy = (p.y - FACE_CENTER_Y) / FACE_HALF_HEIGHT;
        if fx * fx + fy * fy > 1.0 {
            return self.background * self.gain;
        }
        for eye in &self.eyes {
            let xi = (p.x - eye.center.x) / eye.half_width;
            if xi.abs() < 1.0 {
                let open = self.look.aperture_mm * (1.0 - xi * xi);
                let dy = p.y - eye.center.y;
                if dy > -open && dy < open * LOWER_LID_RATIO {
                    return self.eye_shade(eye, &d, &p);
                }
            }
            let brow = dy_brow(&p, eye);
            if brow {
                return self.look.skin * BROW_FACTOR * self.gain + self.lighting(&p);
            }
        }
        let facing = (-d.z).max(0.0);
        self.look.skin * self.gain * (0.85 + 0.15 * facing) + self.lighting(&p)
    }

    /// True when the continuous pixel lies near an eye opening, where the
    /// image is supersampled.
    fn near_eye(&self, u: f64, v: f64) -> bool {
        let d = self.ray(u, v);
        let Some(p) = self.plane_hit(&d) else {
            return false;
        };
        self.eyes.iter().any(|e| {
            (p.x - e.center.x).abs() < e.half_width + 3.0
                && (p.y - e.center.y).abs() < self.look.aperture_mm + 3.0
        })
    }
}

fn dy_brow(p: &Vec3, eye: &Eye) -> bool {
    let dy = p.y - eye.center.y;
    (p.x - eye.center.x).abs() < eye.half_width * 1.15 && (-15.0..-11.0).contains(&dy)
}

fn head_frame_outline(pose: &HeadPose, cam: &CameraIntrinsics) -> Option<(u32, u32, u32, u32)> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for i in 0..64 {
        let a = i as f64 / 64.0 * std::f64::consts::TAU;
        let p = Vec3::new(
            FACE_HALF_WIDTH * a.cos(),
            FACE_CENTER_Y + FACE_HALF_HEIGHT * a.sin(),
            0.0,
        );
        let c = pose.transform(&p);
        if c.z <= 0.0 {
            return None;
        }
        let px = cam.project(&c).ok()?;
        x0 = x0.min(px.x);
        y0 = y0.min(px.y);
        x1 = x1.max(px.x);
        y1 = y1.max(px.y);
    }
    let clip = |v: f64, max: u32| v.clamp(0.0, f64::from(max)) as u32;
    Some((
        clip(x0.floor() - 2.0, cam.width),
        clip(y0.floor() - 2.0, cam.height),
        clip(x1.ceil() + 3.0, cam.width),
        clip(y1.ceil() + 3.0, cam.height),
    ))
}

const SUPERSAMPLE: [(f64, f64); 4] = [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)];

fn render(scene: &Scene, bbox: (u32, u32, u32, u32), noise: f64, rng: &mut ChaCha8Rng) -> GrayImage {
    let cam = scene.cam;
    let bg = (scene.background * scene.gain).round().clamp(0.0, 255.0) as u8;
    let mut img = GrayImage::from_pixel(cam.width, cam.height, image::Luma([bg]));
    let normal = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let (x0, y0, x1, y1) = bbox;
    for v in y0..y1 {
        for u in x0..x1 {
            let (uf, vf) = (f64::from(u), f64::from(v));
            let mut value = if scene.near_eye(uf, vf) {
                SUPERSAMPLE
                    .iter()
                    .map(|(du, dv)| scene.shade(uf + du, vf + dv))
                    .sum::<f64>()
                    / SUPERSAMPLE.len() as f64
            } else {
                scene.shade(uf, vf)
            };
            if noise > 0.0 {
                value += normal.sample(rng);
            }
            img.put_pixel(u, v, image::Luma([value.round().clamp(0.0, 255.0) as u8]));
        }
    }
    img
}

fn eye_truth(
    center: Vec3,
    pose: &HeadPose,
    target: &Vec3,
    cam: &CameraIntrinsics,
    params: &NormalizationParams,
) -> Result<EyeTruth, DataError> {
    let gaze_vector = (target - center).normalize();
    let tf = compute_normalization(&center, &pose.rotation, cam, params)
        .map_err(|e| DataError::ConfigOutOfRange(e.to_string()))?;
    let head = normalize_head(&pose.rotation, &tf).map_err(|e| DataError::ConfigOutOfRange(e.to_string()))?;
    let gaze = normalize_gaze(&gaze_vector, &tf).map_err(|e| DataError::ConfigOutOfRange(e.to_string()))?;
    Ok(EyeTruth {
        center: center.into(),
        gaze_vector: gaze_vector.into(),
        head,
        gaze,
    })
}

const PLACEMENT_ATTEMPTS: usize = 100;

/// Frame path used for a record inside the output directory.
pub fn frame_name(person_id: u64, index: usize) -> PathBuf {
    PathBuf::from("frames").join(format!("p{person_id:03}_{index:05}.pgm"))
}

/// Generates record `index` of person `person` (both 0-based). The result
/// depends only on the configuration, so records can be produced in any
/// order or in parallel.
pub fn generate_record(cfg: &SynthConfig, person: usize, index: usize) -> Result<SynthRecord, DataError> {
    let model = FaceModel::default();
    let look = person_appearance(cfg, person);
    let mut rng = rng_for(cfg, person, index as u64);
    let cam = &cfg.camera;

    let mut placed = None;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let rot = Rotation::from_yaw_pitch_roll(
            cfg.head_yaw_deg.sample(&mut rng).to_radians(),
            cfg.head_pitch_deg.sample(&mut rng).to_radians(),
            cfg.head_roll_deg.sample(&mut rng).to_radians(),
        );
        let t = Vec3::new(
            cfg.head_offset_x_mm.sample(&mut rng),
            cfg.head_offset_y_mm.sample(&mut rng),
            cfg.head_distance_mm.sample(&mut rng),
        );
        let pose = HeadPose::new(&model, rot, t);
        if let Ok(lm) = pose.project_landmarks(&model, cam) {
            if lm.iter().all(|p| cam.contains(p)) {
                placed = Some((pose, lm));
                break;
            }
        }
    }
    let (pose, mut landmarks) = placed.ok_or_else(|| {
        DataError::ConfigOutOfRange("head placement keeps leaving the frame".into())
    })?;

    let target = Vec3::new(
        rng.random_range(-0.5..=0.5) * cfg.screen_width_mm,
        cfg.screen_top_mm + rng.random_range(0.0..=1.0) * cfg.screen_height_mm,
        cfg.screen_depth_mm,
    );
    let gain = cfg.gain.sample(&mut rng);
    let gradient = cfg.gradient.sample(&mut rng);
    let hour = cfg.hours.then(|| rng.random_range(0..24u8));

    let rt = pose.rotation.matrix().transpose();
    let target_h = rt * (target - pose.translation);
    let eye = |c: Vec3, hw: f64| {
        let ball = c + Vec3::new(0.0, 0.0, look.eyeball_radius_mm - EYE_PROTRUSION);
        Eye {
            center: c,
            half_width: hw,
            ball,
            gaze: (target_h - ball).normalize(),
        }
    };
    let half = |a: crate::geometry::Landmark, b: crate::geometry::Landmark| {
        (model.point(a) - model.point(b)).norm() * 0.5
    };
    use crate::geometry::Landmark as L;
    let scene = Scene {
        cam,
        origin_h: rt * (-pose.translation),
        rt,
        eyes: [
            eye(model.right_eye_center(), half(L::RightEyeOuter, L::RightEyeInner)),
            eye(model.left_eye_center(), half(L::LeftEyeInner, L::LeftEyeOuter)),
        ],
        look,
        cos_iris: cfg.iris_radius_deg.to_radians().cos(),
        cos_pupil: cfg.pupil_radius_deg.to_radians().cos(),
        gain,
        gradient,
        background: cfg.background,
    };
    let bbox = head_frame_outline(&pose, cam)
        .ok_or_else(|| DataError::ConfigOutOfRange("face behind the camera".into()))?;
    let frame = render(&scene, bbox, cfg.noise_sigma, &mut rng);

    if cfg.landmark_noise_px > 0.0 {
        let n = Normal::new(0.0, cfg.landmark_noise_px).expect("valid sigma");
        for p in landmarks.iter_mut() {
            p.x = (p.x + n.sample(&mut rng)).clamp(0.0, f64::from(cam.width - 1));
            p.y = (p.y + n.sample(&mut rng)).clamp(0.0, f64::from(cam.height - 1));
        }
    }

    let params = NormalizationParams::default();
    let person_id = cfg.person_id(person);
    let truth = TruthRecord {
        person_id,
        index,
        rotation: pose.rotation.axis_angle().into(),
        translation: pose.translation.into(),
        gaze_target: target.into(),
        gain,
        gradient,
        appearance: look,
        left: eye_truth(pose.eye_center_left, &pose, &target, cam, &params)?,
        right: eye_truth(pose.eye_center_right, &pose, &target, cam, &params)?,
    };
    let raw = RawRecord {
        person_id,
        image: frame_name(person_id, index),
        landmarks: landmarks.map(|p| [p.x, p.y]),
        intrinsics: *cam,
        gaze_target: target.into(),
        hour,
    };
    Ok(SynthRecord { raw, frame, truth })
}

/// `(person, index)` pairs in generation order.
pub fn synth_records(cfg: &SynthConfig) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..cfg.persons).flat_map(move |p| (0..cfg.records_per_person).map(move |i| (p, i)))
}

/// Writes `manifest.jsonl`, `truth.jsonl` and `frames/*.pgm` into `out`.
pub fn synth_generate(cfg: &SynthConfig, out: &Path) -> Result<Vec<RawRecord>, DataError> {
    cfg.validate()?;
    let frames = out.join("frames");
    std::fs::create_dir_all(&frames).map_err(DataError::io(&frames))?;
    let jobs: Vec<(usize, usize)> = synth_records(cfg).collect();
    let done: Vec<(RawRecord, TruthRecord)> = jobs
        .par_iter()
        .map(|&(p, i)| {
            let rec = generate_record(cfg, p, i)?;
            write_pgm(&out.join(&rec.raw.image), &rec.frame)?;
            Ok((rec.raw, rec.truth))
        })
        .collect::<Result<_, DataError>>()?;
    let (raws, truths): (Vec<_>, Vec<_>) = done.into_iter().unzip();
    write_manifest(&out.join("manifest.jsonl"), &raws)?;
    let truth_path = out.join("truth.jsonl");
    let f = File::create(&truth_path).map_err(DataError::io(&truth_path))?;
    let mut w = BufWriter::new(f);
    for t in &truths {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n").map_err(DataError::io(&truth_path))?;
    }
    w.flush().map_err(DataError::io(&truth_path))?;
    Ok(raws)
}
