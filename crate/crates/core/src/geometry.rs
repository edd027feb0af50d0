//! Frames, roll-pitch-yaw conventions and the search-plane transform.
//!
//! Attitudes are full rotation matrices. Roll, pitch and yaw are extrinsic
//! rotations about the fixed x, y and z axes, applied in that order, so the
//! composite matrix is `Rz(yaw) * Ry(pitch) * Rx(roll)`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Tolerance used when validating orthonormality and the unit determinant.
pub const ROT_TOL: f64 = 1e-9;

const GIMBAL_LOCK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not a rotation (orthonormality error {ortho:e}, det {det})")]
    NotRotation { ortho: f64, det: f64 },
    #[error("gimbal lock: |R[2,0]| = {0} is too close to 1")]
    GimbalLock(f64),
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3(Matrix3<f64>);

impl Rot3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps `m` after checking `m^T m = I` and `det m = 1` to [`ROT_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let ortho = (m.transpose() * m - Matrix3::identity()).amax();
        let det = m.determinant();
        if !ortho.is_finite() || ortho > ROT_TOL || (det - 1.0).abs() > ROT_TOL {
            return Err(GeometryError::NotRotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Projects a nearly orthonormal matrix back onto SO(3).
    ///
    /// Iterates the symmetric polar correction `R <- R (3I - R^T R) / 2`,
    /// which converges quadratically to the orthogonal polar factor.
    pub fn orthonormalize(m: Matrix3<f64>) -> Self {
        let mut r = m;
        for _ in 0..8 {
            let err = r.transpose() * r - Matrix3::identity();
            if err.amax() < 1e-15 {
                break;
            }
            r *= (Matrix3::identity() * 3.0 - (err + Matrix3::identity())) * 0.5;
        }
        Self(r)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rot3) -> Self {
        Self(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Max-abs deviation of `R^T R` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn rpy_to_rot(roll: f64, pitch: f64, yaw: f64) -> Rot3 {
    Rot3(rot_z(yaw) * rot_y(pitch) * rot_x(roll))
}

/// Inverse of [`rpy_to_rot`], returning `(roll, pitch, yaw)` with pitch in
/// the open interval (-pi/2, pi/2).
pub fn rot_to_rpy(r: &Rot3) -> Result<(f64, f64, f64), GeometryError> {
    let m = r.matrix();
    let r20 = m[(2, 0)];
    if r20.abs() > 1.0 - GIMBAL_LOCK_TOL {
        return Err(GeometryError::GimbalLock(r20.abs()));
    }
    let pitch = (-r20).asin();
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    Ok((roll, pitch, yaw))
}

/// Skew-symmetric matrix with `skew(x) * y == x.cross(y)`.
pub fn skew(x: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -x.z, x.y, x.z, 0.0, -x.x, -x.y, x.x, 0.0)
}

/// Rigid map from the search-plane frame into the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomTransform {
    pub rotation: Rot3,
    pub origin: Vec3,
}

impl HomTransform {
    pub fn new(rotation: Rot3, origin: Vec3) -> Self {
        Self { rotation, origin }
    }

    pub fn identity() -> Self {
        Self::new(Rot3::identity(), Vec3::zeros())
    }

    pub fn plane_to_inertial(&self, p_plane: &Vec3) -> Vec3 {
        self.rotation.apply(p_plane) + self.origin
    }

    pub fn inertial_to_plane(&self, p_inertial: &Vec3) -> Vec3 {
        self.rotation.transpose().apply(&(p_inertial - self.origin))
    }

    /// Expresses an inertial attitude in the plane frame.
    pub fn rotation_to_plane(&self, r_inertial: &Rot3) -> Rot3 {
        self.rotation.transpose().compose(r_inertial)
    }
}

pub fn plane_to_inertial(h: &HomTransform, p_plane: &Vec3) -> Vec3 {
    h.plane_to_inertial(p_plane)
}

pub fn inertial_to_plane(h: &HomTransform, p_inertial: &Vec3) -> Vec3 {
    h.inertial_to_plane(p_inertial)
}
