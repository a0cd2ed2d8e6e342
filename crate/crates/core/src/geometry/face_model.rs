use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix3;

use super::{GeometryError, Vec3};

pub const LANDMARK_COUNT: usize = 6;

/// The six facial landmarks, in model file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Landmark {
    RightEyeOuter = 0,
    RightEyeInner = 1,
    LeftEyeInner = 2,
    LeftEyeOuter = 3,
    MouthRight = 4,
    MouthLeft = 5,
}

impl Landmark {
    pub const ALL: [Landmark; LANDMARK_COUNT] = [
        Landmark::RightEyeOuter,
        Landmark::RightEyeInner,
        Landmark::LeftEyeInner,
        Landmark::LeftEyeOuter,
        Landmark::MouthRight,
        Landmark::MouthLeft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Landmark::RightEyeOuter => "right_eye_outer",
            Landmark::RightEyeInner => "right_eye_inner",
            Landmark::LeftEyeInner => "left_eye_inner",
            Landmark::LeftEyeOuter => "left_eye_outer",
            Landmark::MouthRight => "mouth_right",
            Landmark::MouthLeft => "mouth_left",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Rigid six-point face shape expressed in the head coordinate system.
///
/// The head frame is derived from the triangle of the two eye midpoints and
/// the mouth midpoint: the origin sits halfway between the eye midpoints, x
/// runs from the right-eye midpoint to the left-eye midpoint, y points towards
/// the mouth midpoint (orthogonalized against x) and z = x × y points into the
/// head. A face looking straight into the camera therefore has the identity
/// head rotation and faces along head -z.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceModel {
    points: [Vec3; LANDMARK_COUNT],
}

impl Default for FaceModel {
    /// Generic mean face: eye corners at x = ±45 / ±20 mm, mouth corners at
    /// (±25, 60) mm, mouth plane 10 mm behind the eye plane.
    fn default() -> Self {
        let raw = [
            Vec3::new(-45.0, 0.0, 0.0),
            Vec3::new(-20.0, 0.0, 0.0),
            Vec3::new(20.0, 0.0, 0.0),
            Vec3::new(45.0, 0.0, 0.0),
            Vec3::new(-25.0, 60.0, 10.0),
            Vec3::new(25.0, 60.0, 10.0),
        ];
        Self::from_raw_points(raw).expect("default face model is well formed")
    }
}

impl FaceModel {
    /// Re-expresses six landmark positions (any rigid frame, mm) in the head frame.
    pub fn from_raw_points(raw: [Vec3; LANDMARK_COUNT]) -> Result<Self, GeometryError> {
        if raw.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(GeometryError::InvalidFaceModel("non-finite coordinate".into()));
        }
        let right = (raw[0] + raw[1]) * 0.5;
        let left = (raw[2] + raw[3]) * 0.5;
        let mouth = (raw[4] + raw[5]) * 0.5;
        let origin = (right + left) * 0.5;

        let x = left - right;
        if x.norm() < 1e-6 {
            return Err(GeometryError::InvalidFaceModel("eye midpoints coincide".into()));
        }
        let x = x.normalize();
        let down = mouth - origin;
        let y = down - x * down.dot(&x);
        if y.norm() < 1e-6 {
            return Err(GeometryError::InvalidFaceModel(
                "mouth midpoint lies on the eye line".into(),
            ));
        }
        let y = y.normalize();
        let z = x.cross(&y);
        let basis = Matrix3::from_columns(&[x, y, z]);
        let to_head = basis.transpose();
        Ok(Self {
            points: raw.map(|p| to_head * (p - origin)),
        })
    }

    /// Parses the text format: six `name x y z` lines in landmark order.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut pts = Vec::with_capacity(LANDMARK_COUNT);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(GeometryError::InvalidFaceModel(format!(
                    "line {}: expected `name x y z`",
                    lineno + 1
                )));
            }
            let mut xyz = [0.0; 3];
            for (slot, f) in xyz.iter_mut().zip(&fields[1..]) {
                *slot = f.parse().map_err(|_| {
                    GeometryError::InvalidFaceModel(format!("line {}: bad number `{f}`", lineno + 1))
                })?;
            }
            pts.push(Vec3::from(xyz));
        }
        let raw: [Vec3; LANDMARK_COUNT] = pts.try_into().map_err(|v: Vec<Vec3>| {
            GeometryError::InvalidFaceModel(format!("expected 6 landmarks, found {}", v.len()))
        })?;
        Self::from_raw_points(raw)
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::InvalidFaceModel(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serializes the head-frame coordinates in the text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (lm, p) in Landmark::ALL.iter().zip(&self.points) {
            let _ = writeln!(out, "{} {} {} {}", lm.name(), p.x, p.y, p.z);
        }
        out
    }

    pub fn points(&self) -> &[Vec3; LANDMARK_COUNT] {
        &self.points
    }

    pub fn point(&self, lm: Landmark) -> Vec3 {
        self.points[lm.index()]
    }

    pub fn right_eye_center(&self) -> Vec3 {
        (self.points[0] + self.points[1]) * 0.5
    }

    pub fn left_eye_center(&self) -> Vec3 {
        (self.points[2] + self.points[3]) * 0.5
    }

    pub fn mouth_center(&self) -> Vec3 {
        (self.points[4] + self.points[5]) * 0.5
    }
}
