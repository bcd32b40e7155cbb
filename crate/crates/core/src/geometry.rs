//! Planar frames and the pinhole camera.
//!
//! Camera axes: `x` along the optical axis (forward), `y` lateral, `z`
//! vertical. The robot moves in the `x`-`y` plane, so heights are preserved.
//!
//! A [`PlanarTransform`] maps goal-frame coordinates to current-frame
//! coordinates, `P = R(phi) P* + T`.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[inline]
fn rotate(angle: f64, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Planar pose `(x, y, theta)` of one frame expressed in another.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// `self ∘ other`: `other` is given in the frame of `self`.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (dx, dy) = rotate(self.theta, other.x, other.y);
        Pose2::new(self.x + dx, self.y + dy, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Pose2 {
        let (x, y) = rotate(-self.theta, -self.x, -self.y);
        Pose2::new(x, y, -self.theta)
    }

    /// This pose expressed in the frame of `base`.
    pub fn relative_to(&self, base: &Pose2) -> Pose2 {
        base.inverse().compose(self)
    }

    pub fn distance_to(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn heading_error_to(&self, other: &Pose2) -> f64 {
        wrap_angle(self.theta - other.theta).abs()
    }
}

/// Rigid map from goal-frame coordinates to current-frame coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarTransform {
    pub phi: f64,
    pub t_x: f64,
    pub t_y: f64,
}

impl PlanarTransform {
    pub fn new(phi: f64, t_x: f64, t_y: f64) -> Self {
        Self {
            phi: wrap_angle(phi),
            t_x,
            t_y,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// Maps a planar point `(x, y)` given in goal coordinates.
    pub fn apply_xy(&self, x: f64, y: f64) -> (f64, f64) {
        let (rx, ry) = rotate(self.phi, x, y);
        (rx + self.t_x, ry + self.t_y)
    }

    /// Applies `self` first, then `next`.
    pub fn then(&self, next: &PlanarTransform) -> PlanarTransform {
        let (tx, ty) = next.apply_xy(self.t_x, self.t_y);
        PlanarTransform::new(self.phi + next.phi, tx, ty)
    }

    pub fn inverse(&self) -> PlanarTransform {
        let (tx, ty) = rotate(-self.phi, -self.t_x, -self.t_y);
        PlanarTransform::new(-self.phi, tx, ty)
    }

    /// Pose of the current camera frame expressed in goal coordinates.
    pub fn robot_in_goal(&self) -> Pose2 {
        let (x, y) = rotate(-self.phi, -self.t_x, -self.t_y);
        Pose2::new(x, y, -self.phi)
    }

    /// Inverse of [`PlanarTransform::robot_in_goal`].
    pub fn from_robot_in_goal(p: &Pose2) -> PlanarTransform {
        let phi = -p.theta;
        let (x, y) = rotate(phi, p.x, p.y);
        PlanarTransform::new(phi, -x, -y)
    }

    pub fn translation_norm(&self) -> f64 {
        self.t_x.hypot(self.t_y)
    }
}

/// Goal-to-current transform for a robot and a goal both given in a common
/// world frame.
pub fn relative_transform(robot: &Pose2, goal: &Pose2) -> PlanarTransform {
    PlanarTransform::from_robot_in_goal(&robot.relative_to(goal))
}

/// Maps a goal-frame point into the current camera frame. Height is untouched.
pub fn transform_point(g: &PlanarTransform, p: &FeaturePoint3) -> Vector3<f64> {
    let (x, y) = g.apply_xy(p.x, p.y);
    Vector3::new(x, y, p.z)
}

/// Object feature in goal-camera coordinates: `x` is the depth along the
/// optical axis, `z` the height relative to the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturePoint3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FeaturePoint3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "feature depth must be positive, got {}",
                self.x
            )));
        }
        if self.z == 0.0 {
            return Err(Error::InvalidScenario(
                "feature height must be non-zero".into(),
            ));
        }
        Ok(())
    }

    /// Normalized coordinates as seen from the goal camera.
    pub fn reference_normalized(&self) -> NormalizedFeature {
        NormalizedFeature {
            x: self.y / self.x,
            y: self.z / self.x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

/// Normalized image coordinates `(Y/X, Z/X)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizedFeature {
    pub x: f64,
    pub y: f64,
}

impl NormalizedFeature {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub f_x: f64,
    pub f_y: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub width: f64,
    pub height: f64,
    pub min_depth: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            f_x: 460.0,
            f_y: 460.0,
            c_x: 320.0,
            c_y: 240.0,
            width: 640.0,
            height: 480.0,
            min_depth: 0.1,
        }
    }
}

impl CameraIntrinsics {
    /// Same sensor as the default with a 150 px focal length (about 130°
    /// horizontal field of view).
    pub fn wide_angle() -> Self {
        Self {
            f_x: 150.0,
            f_y: 150.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_x > 0.0 && self.f_y > 0.0) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive, got ({}, {})",
                self.f_x, self.f_y
            )));
        }
        if !(self.min_depth > 0.0) {
            return Err(Error::InvalidIntrinsics(format!(
                "min_depth must be positive, got {}",
                self.min_depth
            )));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidIntrinsics("image size must be positive".into()));
        }
        Ok(())
    }

    /// Pinhole projection; `None` when the point is behind `min_depth` or
    /// falls outside the image.
    pub fn project(&self, p: &Vector3<f64>) -> Option<Pixel> {
        if !(p.x >= self.min_depth) {
            return None;
        }
        let u = self.f_x * (p.y / p.x) + self.c_x;
        let v = self.f_y * (p.z / p.x) + self.c_y;
        let inside = (0.0..self.width).contains(&u) && (0.0..self.height).contains(&v);
        inside.then_some(Pixel { u, v })
    }

    pub fn normalize(&self, px: Pixel) -> NormalizedFeature {
        NormalizedFeature {
            x: (px.u - self.c_x) / self.f_x,
            y: (px.v - self.c_y) / self.f_y,
        }
    }

    pub fn denormalize(&self, n: NormalizedFeature) -> Pixel {
        Pixel {
            u: self.f_x * n.x + self.c_x,
            v: self.f_y * n.y + self.c_y,
        }
    }
}
