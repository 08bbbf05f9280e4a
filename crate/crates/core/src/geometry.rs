//! SE(2) pose algebra: rotations, homogeneous transforms and relative poses.
//!
//! Angles are radians everywhere inside the library; degrees appear only at
//! configuration and report boundaries.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wraps an angle to the half-open interval (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Rotation matrix for a yaw angle: [[cos, -sin], [sin, cos]].
///
/// Panics on non-finite input; every caller owns a validated pose.
pub fn rotation_from_yaw(theta: f64) -> Matrix2<f64> {
    assert!(theta.is_finite(), "yaw must be finite, got {theta}");
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Vehicle pose on the plane: position and yaw of the vehicle frame
/// relative to the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    /// Yaw in radians, wrapped to (-pi, pi].
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        assert!(
            x.is_finite() && y.is_finite() && theta.is_finite(),
            "pose components must be finite"
        );
        Pose2 {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Pose2 {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    pub fn to_transform(&self) -> Transform2 {
        Transform2 {
            rot: rotation_from_yaw(self.theta),
            t: self.position(),
        }
    }
}

/// Rigid transform on the plane (rotation matrix plus translation), the
/// homogeneous-matrix view of a pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2 {
    pub rot: Matrix2<f64>,
    pub t: Vector2<f64>,
}

impl Transform2 {
    pub fn identity() -> Self {
        Transform2 {
            rot: Matrix2::identity(),
            t: Vector2::zeros(),
        }
    }

    pub fn from_parts(t: Vector2<f64>, theta: f64) -> Self {
        Transform2 {
            rot: rotation_from_yaw(theta),
            t,
        }
    }

    /// Yaw angle recovered from the rotation matrix.
    pub fn yaw(&self) -> f64 {
        self.rot[(1, 0)].atan2(self.rot[(0, 0)])
    }

    pub fn to_pose(&self) -> Pose2 {
        Pose2::new(self.t.x, self.t.y, self.yaw())
    }

    /// Applies the transform to a point.
    pub fn apply(&self, p: &Vector2<f64>) -> Vector2<f64> {
        self.rot * p + self.t
    }

    /// Rotates a direction vector (no translation).
    pub fn rotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        self.rot * v
    }
}

/// Composition a * b: apply b first, then a.
pub fn compose(a: &Transform2, b: &Transform2) -> Transform2 {
    Transform2 {
        rot: a.rot * b.rot,
        t: a.rot * b.t + a.t,
    }
}

/// Inverse transform: (R^T, -R^T t).
pub fn inverse(t: &Transform2) -> Transform2 {
    let rt = t.rot.transpose();
    Transform2 {
        rot: rt,
        t: -(rt * t.t),
    }
}

/// Relative motion between two timeslots, expressed in the earlier frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePose {
    pub dx: f64,
    pub dy: f64,
    /// Relative yaw in radians, wrapped to (-pi, pi] (shortest arc).
    pub dtheta: f64,
}

impl RelativePose {
    pub fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        RelativePose {
            dx,
            dy,
            dtheta: wrap_angle(dtheta),
        }
    }

    pub fn identity() -> Self {
        RelativePose {
            dx: 0.0,
            dy: 0.0,
            dtheta: 0.0,
        }
    }

    pub fn translation(&self) -> Vector2<f64> {
        Vector2::new(self.dx, self.dy)
    }

    pub fn to_transform(&self) -> Transform2 {
        Transform2::from_parts(self.translation(), self.dtheta)
    }
}

/// Extracts the relative pose prev^-1 * cur.
pub fn relative_pose(prev: &Transform2, cur: &Transform2) -> RelativePose {
    let rel = compose(&inverse(prev), cur);
    RelativePose::new(rel.t.x, rel.t.y, rel.yaw())
}
