//! Minimal 3D vector and axis-aligned rectangle helpers.
//!
//! The workspace frame has x/y in the horizontal plane (x across the
//! conveyor, y toward the bins) and z up, in metres.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point or direction in the workspace frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Length of the horizontal (x, y) component.
    pub fn norm_xy(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Unit vector in the same direction; `None` for (near-)zero vectors.
    pub fn unit(self) -> Option<Vec3> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self * (1.0 / n))
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self * -1.0
    }
}

/// Axis-aligned rectangle in the horizontal plane (the bin opening).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    /// Centre of the rectangle.
    pub cx: f64,
    pub cy: f64,
    /// Half-extents along x and y.
    pub hx: f64,
    pub hy: f64,
}

impl Rect {
    pub fn new(cx: f64, cy: f64, hx: f64, hy: f64) -> Self {
        Rect { cx, cy, hx, hy }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.cx).abs() <= self.hx && (y - self.cy).abs() <= self.hy
    }

    /// Support extent: how far the rectangle reaches from its centre along a
    /// horizontal unit direction. Used to test whether a point is past the
    /// far wall as seen from a given approach direction.
    pub fn support(&self, dir_x: f64, dir_y: f64) -> f64 {
        dir_x.abs() * self.hx + dir_y.abs() * self.hy
    }
}
