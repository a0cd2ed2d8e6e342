use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// A proper 3D rotation stored as an orthonormal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Rotation3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Rotation3::identity())
    }

    /// Builds a rotation from an axis-angle vector (direction = axis, norm = angle).
    pub fn from_axis_angle(v: &Vec3) -> Self {
        Self(Rotation3::from_scaled_axis(*v))
    }

    pub fn about_axis(axis: &Vec3, angle: f64) -> Self {
        Self(Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle))
    }

    pub fn axis_angle(&self) -> Vec3 {
        self.0.scaled_axis()
    }

    /// Rotation `Ry(yaw) * Rx(pitch) * Rz(roll)`.
    pub fn from_yaw_pitch_roll(yaw: f64, pitch: f64, roll: f64) -> Self {
        let ry = Rotation3::from_axis_angle(&Vec3::y_axis(), yaw);
        let rx = Rotation3::from_axis_angle(&Vec3::x_axis(), pitch);
        let rz = Rotation3::from_axis_angle(&Vec3::z_axis(), roll);
        Self(ry * rx * rz)
    }

    /// Accepts a matrix that is orthonormal with determinant +1 within `1e-9`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Result<Self, GeometryError> {
        let err = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if !(err < 1e-9) || !((det - 1.0).abs() < 1e-9) {
            return Err(GeometryError::NotARotation(err.max((det - 1.0).abs())));
        }
        Ok(Self(Rotation3::from_matrix_unchecked(*m)))
    }

    /// Projects an arbitrary matrix onto the closest rotation (SVD polar factor).
    pub fn from_matrix_orthonormalized(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self(Rotation3::from_matrix_unchecked(u * d * v_t))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        self.0.matrix()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.inverse())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Angle of `self⁻¹ · other`, in degrees.
    pub fn geodesic_distance_deg(&self, other: &Rotation) -> f64 {
        let rel = self.matrix().transpose() * other.matrix();
        // the atan2 form stays accurate for tiny angles where acos((tr-1)/2) does not
        let skew = Vec3::new(
            rel[(2, 1)] - rel[(1, 2)],
            rel[(0, 2)] - rel[(2, 0)],
            rel[(1, 0)] - rel[(0, 1)],
        );
        let trace = rel.trace();
        skew.norm().atan2(trace - 1.0).to_degrees()
    }

    pub fn orthonormality_error(&self) -> f64 {
        let m = self.matrix();
        let e = (m.transpose() * m - Matrix3::identity()).amax();
        e.max((m.determinant() - 1.0).abs())
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for &Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.axis_angle();
        [v.x, v.y, v.z].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 3]>::deserialize(d)?;
        Ok(Rotation::from_axis_angle(&Vec3::new(v[0], v[1], v[2])))
    }
}
