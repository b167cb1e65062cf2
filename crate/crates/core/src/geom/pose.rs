use nalgebra::{Rotation3, Unit};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Matrix3, Point3, Vector3};
use crate::error::{Error, Result};

/// Rigid transform `x_world = R x_object + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3) -> Self {
        Self { rotation, translation }
    }

    /// Build from a raw matrix, checking orthonormality (1e-9) and det = +1.
    pub fn from_matrix(r: Matrix3, translation: Vector3) -> Result<Self> {
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        let det = r.determinant();
        if orth > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "rotation not orthonormal (|RᵀR - I| = {orth:.2e}, det = {det:.12})"
            )));
        }
        Ok(Self { rotation: Rotation3::from_matrix_unchecked(r), translation })
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3) -> Vector3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self { rotation: r, translation: -(r * self.translation) }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Pre-multiply by a world-frame rotation `q` about the world point `pivot`.
    pub fn rotated_about(&self, q: &Rotation3<f64>, pivot: &Point3) -> Self {
        let mut rotation = q * self.rotation;
        rotation.renormalize();
        Self { rotation, translation: q * (self.translation - pivot.coords) + pivot.coords }
    }

    pub fn translated(&self, t: &Vector3) -> Self {
        Self { rotation: self.rotation, translation: self.translation + t }
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        row_major(self.rotation.matrix())
    }
}

pub(crate) fn row_major(m: &Matrix3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = m[(r, c)];
        }
    }
    out
}

pub(crate) fn from_row_major(v: &[f64; 9]) -> Matrix3 {
    Matrix3::from_row_slice(v)
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    #[serde(rename = "R")]
    r: [f64; 9],
    #[serde(rename = "T")]
    t: [f64; 3],
}

impl Serialize for RigidPose {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRepr {
            r: self.rotation_row_major(),
            t: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidPose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(d)?;
        RigidPose::from_matrix(from_row_major(&repr.r), Vector3::from(repr.t))
            .map_err(serde::de::Error::custom)
    }
}

/// Movement between two poses: Frobenius norm of the stacked 3×4 difference
/// `[R₁ − R₂ | T₁ − T₂]`, translation in meters.
pub fn pose_delta(a: &RigidPose, b: &RigidPose) -> f64 {
    let dr = a.rotation.matrix() - b.rotation.matrix();
    let dt = a.translation - b.translation;
    (dr.norm_squared() + dt.norm_squared()).sqrt()
}

/// Geodesic angle (radians) of the relative rotation `a bᵀ`.
pub fn geodesic_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let rel = a * b.inverse();
    let c = ((rel.matrix().trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    c.acos()
}

/// Minimal rotation taking unit vector `from` onto unit vector `to`.
///
/// When the vectors are antipodal the rotation is 180° about world x, or
/// world y if x is parallel to `from`.
pub fn rotation_between(from: &Vector3, to: &Vector3) -> Rotation3<f64> {
    let f = from.normalize();
    let t = to.normalize();
    let cos = f.dot(&t).clamp(-1.0, 1.0);
    if cos > 1.0 - 1e-15 {
        return Rotation3::identity();
    }
    if cos < -1.0 + 1e-12 {
        let x = Vector3::x();
        let axis = if f.cross(&x).norm() < 1e-9 { Vector3::y() } else { x };
        // Project out the component along `f` so the half-turn really maps f to -f.
        let axis = (axis - f * f.dot(&axis)).normalize();
        return Rotation3::from_axis_angle(&Unit::new_unchecked(axis), std::f64::consts::PI);
    }
    let axis = Unit::new_normalize(f.cross(&t));
    Rotation3::from_axis_angle(&axis, cos.acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn delta_identical_is_zero() {
        let p = RigidPose::new(Rotation3::from_euler_angles(0.3, -0.2, 1.1), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(pose_delta(&p, &p), 0.0);
    }

    #[test]
    fn delta_pure_translation() {
        let a = RigidPose::identity();
        let b = RigidPose::new(Rotation3::identity(), Vector3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(pose_delta(&a, &b), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn delta_half_turn_about_z() {
        // diag(-1,-1,1) - I = diag(-2,-2,0); Frobenius = sqrt(8).
        let a = RigidPose::identity();
        let b = RigidPose::new(Rotation3::from_axis_angle(&Vector3::z_axis(), PI), Vector3::zeros());
        assert_relative_eq!(pose_delta(&a, &b), 8f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn rotation_between_examples() {
        let down = -Vector3::z();
        assert_eq!(rotation_between(&down, &down), Rotation3::identity());

        let r = rotation_between(&Vector3::x(), &down);
        assert_relative_eq!(r * Vector3::x(), down, epsilon = 1e-12);
        let (axis, angle) = r.axis_angle().unwrap();
        assert_relative_eq!(axis.into_inner(), Vector3::y(), epsilon = 1e-12);
        assert_relative_eq!(angle, PI / 2.0, epsilon = 1e-12);

        let r = rotation_between(&Vector3::z(), &down);
        assert_relative_eq!(r * Vector3::z(), down, epsilon = 1e-12);
        let (axis, angle) = r.axis_angle().unwrap();
        assert_relative_eq!(axis.into_inner().x.abs(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(angle, PI, epsilon = 1e-12);
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidPose::from_matrix(m, Vector3::zeros()).is_err());
    }

    #[test]
    fn json_layout_is_row_major() {
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), PI / 2.0);
        let p = RigidPose::new(r, Vector3::new(1.0, 2.0, 3.0));
        let v: serde_json::Value = serde_json::to_value(p).unwrap();
        let rr: Vec<f64> = serde_json::from_value(v["R"].clone()).unwrap();
        // first row of Rz(90°) is (0, -1, 0)
        assert_relative_eq!(rr[1], -1.0, epsilon = 1e-15);
        assert_eq!(v["T"], serde_json::json!([1.0, 2.0, 3.0]));
        let back: RigidPose = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
