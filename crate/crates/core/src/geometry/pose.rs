//! Rigid camera poses in the camera-to-world convention.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};

use crate::error::{Error, Result};

/// Rigid camera-to-world transform: `x_world = R * x_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

const ORTHONORMAL_TOL: f64 = 1e-9;

impl CameraPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose after checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let deviation = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if !(deviation < ORTHONORMAL_TOL) {
            return Err(Error::InvalidPose(format!(
                "rotation is not orthonormal (deviation {deviation:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::InvalidPose("rotation has non-positive determinant".into()));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidPose("translation is not finite".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Pose from an axis-angle vector (radians) and a translation.
    pub fn from_axis_angle(axis_angle: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::new(axis_angle).into_inner(),
            translation,
        }
    }

    /// Maps a camera-frame point into the world frame.
    pub fn transform_point(&self, cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * cam + self.translation
    }

    /// Maps a world point into the camera frame.
    pub fn inverse_transform_point(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &CameraPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Re-orthonormalizes the rotation (nearest rotation via SVD).
    pub fn orthonormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Self {
            rotation: u * d * v_t,
            translation: self.translation,
        }
    }
}

/// Pose accuracy as `(translational meters, angular degrees)`.
pub fn pose_error(estimate: &CameraPose, truth: &CameraPose) -> (f64, f64) {
    let translational = (estimate.translation - truth.translation).norm();
    let relative = truth.rotation.transpose() * estimate.rotation;
    let cos = ((relative.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    (translational, cos.acos().to_degrees())
}

/// Text form: 16 whitespace-separated numbers, row-major 4x4 camera-to-world.
impl FromStr for CameraPose {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| Error::Format(format!("pose value `{v}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 16 {
            return Err(Error::Format(format!(
                "pose needs 16 values, got {}",
                values.len()
            )));
        }
        let m = Matrix4::from_row_slice(&values);
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::Format(format!(
                "pose bottom row must be `0 0 0 1`, got {bottom:?}"
            )));
        }
        let rotation = m.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = m.fixed_view::<3, 1>(0, 3).into_owned();
        // Low-precision text is snapped to the nearest rotation.
        let deviation = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if deviation > 1e-3 || rotation.determinant() <= 0.0 {
            return Err(Error::InvalidPose(format!(
                "rotation block is not a rotation (deviation {deviation:e})"
            )));
        }
        let pose = CameraPose {
            rotation,
            translation,
        };
        if deviation < ORTHONORMAL_TOL {
            Ok(pose)
        } else {
            Ok(pose.orthonormalized())
        }
    }
}

impl fmt::Display for CameraPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.to_matrix();
        for r in 0..4 {
            let row: Vec<String> = (0..4).map(|c| format!("{:e}", m[(r, c)])).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}
