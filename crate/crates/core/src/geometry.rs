//! Planar geometry around the tracked anchor.
//!
//! Angles are degrees, counter-clockwise, wrapped to `(-180, 180]`.
//! Negative relative azimuths are on the listener's right.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("angle is not finite: {0}")]
    NonFinite(f64),
    #[error("points coincide at ({x}, {y}); direction is undefined")]
    Coincident { x: f64, y: f64 },
}

/// A point or displacement on the ground plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing `deg` counter-clockwise from +X.
    pub fn from_angle_deg(deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self { x: c, y: s }
    }

    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Counter-clockwise rotation about the origin.
    pub fn rotated_deg(self, deg: f64) -> Self {
        let (s, c) = deg.to_radians().sin_cos();
        Self {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    /// Direction of this vector in degrees, wrapped. `None` for the zero vector.
    pub fn angle_deg(self) -> Option<f64> {
        if self.x == 0.0 && self.y == 0.0 {
            None
        } else {
            Some(wrap_deg(self.y.atan2(self.x).to_degrees()))
        }
    }

    pub fn lerp(self, other: Vec2, f: f64) -> Self {
        Self {
            x: self.x + (other.x - self.x) * f,
            y: self.y + (other.y - self.y) * f,
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

/// Listener state as reported by the sensing layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListenerPose {
    pub position: Vec2,
    /// Device heading, degrees CCW from world +X.
    pub heading_deg: f64,
    /// Seconds since session start.
    pub t: f64,
}

impl ListenerPose {
    /// Builds a pose, wrapping the heading into `(-180, 180]`.
    pub fn new(position: Vec2, heading_deg: f64, t: f64) -> Self {
        Self {
            position,
            heading_deg: wrap_deg(heading_deg),
            t,
        }
    }

    /// A pose at `position` whose heading points at `target`.
    pub fn facing(position: Vec2, target: Vec2, t: f64) -> Self {
        let heading = (target - position).angle_deg().unwrap_or(0.0);
        Self::new(position, heading, t)
    }
}

/// Wraps a finite angle into `(-180, 180]`.
pub fn wrap_angle(a: f64) -> Result<f64, GeometryError> {
    if !a.is_finite() {
        return Err(GeometryError::NonFinite(a));
    }
    Ok(wrap_deg(a))
}

/// Infallible wrap for values already known to be finite.
pub(crate) fn wrap_deg(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r > 180.0 {
        r - 360.0
    } else if r == -0.0 {
        0.0
    } else {
        r
    }
}

/// Signed shortest angular difference `to - from`, wrapped.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    wrap_deg(to - from)
}

/// Angle CCW from +X to the vector `anchor -> listener`.
pub fn bearing_of(listener_pos: Vec2, anchor_pos: Vec2) -> Result<f64, GeometryError> {
    (listener_pos - anchor_pos)
        .angle_deg()
        .ok_or(GeometryError::Coincident {
            x: listener_pos.x,
            y: listener_pos.y,
        })
}

/// Angle from the listener's heading to the direction of `point`.
/// Negative means the point lies to the listener's right.
pub fn azimuth_relative(pose: &ListenerPose, point: Vec2) -> Result<f64, GeometryError> {
    let dir = (point - pose.position)
        .angle_deg()
        .ok_or(GeometryError::Coincident {
            x: point.x,
            y: point.y,
        })?;
    Ok(wrap_deg(dir - pose.heading_deg))
}
