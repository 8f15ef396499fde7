//! Homography decomposition into plane pose, and the camera-to-map chain.

use super::PrismError;
use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics (no distortion; detections are assumed undistorted).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// How the camera sits on the robot: optical centre `height` meters above
/// the floor, pitched down by `pitch` radians (positive looks at the floor).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraMount {
    pub height: f64,
    #[serde(default)]
    pub pitch: f64,
}

/// Robot pose on the 2-D map: position plus heading (radians, 0 along +x).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Pose of the sign plane in the camera frame: `x_cam = R x_model + t` for
/// model points with z = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Nearest rotation matrix (Frobenius norm) with determinant +1.
fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let d = (u * v_t).determinant();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d.signum())) * v_t
}

/// Split a model-to-image homography into the sign's rotation and
/// translation in the camera frame, given the intrinsics that produced it.
///
/// `H ~ K [r1 r2 t]`, so `K⁻¹H` holds two rotation columns and the
/// translation up to one common scale, fixed by making the rotation columns
/// unit length and the sign by requiring the plane in front of the camera
/// (`t_z > 0`).
pub fn decompose_homography(
    intrinsics: &CameraIntrinsics,
    h: &Matrix3<f64>,
) -> Result<PlanePose, PrismError> {
    let k_inv = intrinsics
        .matrix()
        .try_inverse()
        .ok_or(PrismError::SingularIntrinsics)?;
    let b = k_inv * h;
    let b1 = b.column(0).into_owned();
    let b2 = b.column(1).into_owned();
    let b3 = b.column(2).into_owned();
    let scale = (b1.norm() + b2.norm()) / 2.0;
    if scale < 1e-12 {
        return Err(PrismError::Degenerate("homography has vanishing rotation columns".into()));
    }
    let mut lambda = 1.0 / scale;
    if (b3 * lambda).z < 0.0 {
        lambda = -lambda;
    }
    let t = b3 * lambda;
    if t.z <= 1e-9 {
        return Err(PrismError::BehindCamera);
    }
    let r1 = b1 * lambda;
    let r2 = b2 * lambda;
    let r3 = r1.cross(&r2);
    let rotation = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r3]));
    Ok(PlanePose { rotation, translation: t })
}

/// Rigid transform from camera frame to map frame for a robot at `pose` with
/// the camera mounted per `mount`.
///
/// Camera axes are x right, y down, z forward (optical axis); map axes are
/// x east, y north, z up, with heading 0 along +x. With zero heading and
/// pitch the optical axis points along map +x; positive pitch tips it toward
/// the floor.
pub fn camera_to_map(pose: &RobotPose, mount: &CameraMount) -> (Matrix3<f64>, Vector3<f64>) {
    let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), pose.theta);
    // columns: where camera x, y, z land in the map frame at zero heading
    let align = Matrix3::from_columns(&[
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
        Vector3::new(1.0, 0.0, 0.0),
    ]);
    let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), -mount.pitch);
    let r = rz.into_inner() * align * rx.into_inner();
    let t = Vector3::new(pose.x, pose.y, mount.height);
    (r, t)
}
