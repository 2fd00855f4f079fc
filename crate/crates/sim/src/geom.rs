//! Minimal 3-vector math and the yaw-aligned camera basis.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point or direction in world coordinates (meters). `z` is up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
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
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn normalized(self) -> Option<Vec3> {
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

/// Orthonormal camera frame attached to a drone with the given yaw and zero
/// pitch/roll: `forward` looks along the heading, `left` is 90° counter-
/// clockwise in the horizontal plane, `up` is world-up.
#[derive(Clone, Copy, Debug)]
pub struct Basis {
    pub forward: Vec3,
    pub left: Vec3,
    pub up: Vec3,
}

/// Camera basis for a yaw angle in radians (yaw 0 looks along +x).
pub fn yaw_basis(yaw: f64) -> Basis {
    let (s, c) = yaw.sin_cos();
    Basis {
        forward: Vec3::new(c, s, 0.0),
        left: Vec3::new(-s, c, 0.0),
        up: Vec3::new(0.0, 0.0, 1.0),
    }
}

/// Express a world-frame vector in camera coordinates (forward, left, up).
pub fn world_to_camera(b: &Basis, v: Vec3) -> Vec3 {
    Vec3::new(v.dot(b.forward), v.dot(b.left), v.dot(b.up))
}

/// Express a camera-frame vector (forward, left, up) in world coordinates.
pub fn camera_to_world(b: &Basis, v: Vec3) -> Vec3 {
    b.forward * v.x + b.left * v.y + b.up * v.z
}
