//! Small vector algebra used throughout the renderer.

use std::ops::{Add, AddAssign, Div, Index, Mul, MulAssign, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Linear RGB triple. Radiance, reflectance and throughput all use it.
pub type Rgb = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    #[inline]
    pub fn normalized(self) -> Vec3 {
        self / self.length()
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn min_component(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn is_black(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    /// Rec. 709 luminance.
    pub fn luminance(self) -> f64 {
        0.2126 * self.x + 0.7152 * self.y + 0.0722 * self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Mirror `self` about `n`. Both point away from the surface.
    pub fn reflect(self, n: Vec3) -> Vec3 {
        n * (2.0 * self.dot(n)) - self
    }

    /// Flip `self` so that it lies in the same hemisphere as `v`.
    pub fn face_forward(self, v: Vec3) -> Vec3 {
        if self.dot(v) < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Mul for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }
}

impl MulAssign for Vec3 {
    #[inline]
    fn mul_assign(&mut self, o: Vec3) {
        *self = *self * o;
    }
}

impl MulAssign<f64> for Vec3 {
    #[inline]
    fn mul_assign(&mut self, s: f64) {
        *self = *self * s;
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        let inv = 1.0 / s;
        Vec3::new(self.x * inv, self.y * inv, self.z * inv)
    }
}

/// Orthonormal shading basis. `n` is the local +z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: Vec3,
    pub b: Vec3,
    pub n: Vec3,
}

/// Threshold on `|normal · up|` above which the up vector is treated as
/// parallel to the normal.
pub const UP_DEGENERACY: f64 = 1.0 - 1e-4;

impl Frame {
    /// Identity frame: t = x, b = y, n = z.
    pub const IDENTITY: Frame = Frame {
        t: Vec3::X,
        b: Vec3::Y,
        n: Vec3::Z,
    };

    /// Builds a right-handed frame whose z-axis is `normal` and whose y-axis
    /// is the projection of `global_up` onto the tangent plane.
    ///
    /// When the normal is (anti-)parallel to `global_up` the reference up is
    /// first rotated by 90 degrees toward the global Y axis (toward global Z
    /// when `global_up` is itself along Y).
    pub fn from_normal_and_up(normal: Vec3, global_up: Vec3) -> Frame {
        let n = normal;
        let mut up = global_up;
        if n.dot(up).abs() > UP_DEGENERACY {
            up = rotate_toward_axis(up);
        }
        let b = (up - n * n.dot(up)).normalized();
        let t = b.cross(n);
        Frame { t, b, n }
    }

    /// Arbitrary frame around `n` (no preferred azimuth), for BSDF sampling
    /// around lobes such as the mirror direction.
    pub fn from_z(n: Vec3) -> Frame {
        let a = if n.x.abs() > 0.9 { Vec3::Y } else { Vec3::X };
        let t = a.cross(n).normalized();
        let b = n.cross(t);
        Frame { t, b, n }
    }

    #[inline]
    pub fn to_local(&self, v: Vec3) -> Vec3 {
        Vec3::new(v.dot(self.t), v.dot(self.b), v.dot(self.n))
    }

    #[inline]
    pub fn to_world(&self, v: Vec3) -> Vec3 {
        self.t * v.x + self.b * v.y + self.n * v.z
    }
}

/// Rotates a unit vector by 90 degrees toward the global Y axis, or toward
/// global Z when the vector already lies along Y.
fn rotate_toward_axis(up: Vec3) -> Vec3 {
    let target = if up.dot(Vec3::Y).abs() > UP_DEGENERACY {
        Vec3::Z
    } else {
        Vec3::Y
    };
    (target - up * up.dot(target)).normalized()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(f: &Frame) -> f64 {
        let checks = [
            (f.t.length() - 1.0).abs(),
            (f.b.length() - 1.0).abs(),
            (f.n.length() - 1.0).abs(),
            f.t.dot(f.b).abs(),
            f.t.dot(f.n).abs(),
            f.b.dot(f.n).abs(),
            (f.t.cross(f.b) - f.n).length(),
        ];
        checks.into_iter().fold(0.0, f64::max)
    }

    #[test]
    fn frame_for_x_normal_with_z_up() {
        let f = Frame::from_normal_and_up(Vec3::X, Vec3::Z);
        assert_eq!(f.n, Vec3::X);
        assert!(residual(&f) < 1e-6);
        // up projects unchanged onto the tangent plane
        assert!((f.b - Vec3::Z).length() < 1e-12);
    }

    #[test]
    fn degenerate_up_rotates_toward_y() {
        let f = Frame::from_normal_and_up(Vec3::Z, Vec3::Z);
        assert!(f.t.is_finite() && f.b.is_finite());
        assert!(residual(&f) < 1e-6);
        assert!((f.b - Vec3::Y).length() < 1e-12);

        let f = Frame::from_normal_and_up(-Vec3::Z, Vec3::Z);
        assert!(residual(&f) < 1e-6);
        assert!((f.b - Vec3::Y).length() < 1e-12);
    }

    #[test]
    fn degenerate_y_up_rotates_toward_z() {
        let f = Frame::from_normal_and_up(Vec3::Y, Vec3::Y);
        assert!(residual(&f) < 1e-6);
        assert!((f.b - Vec3::Z).length() < 1e-12);
    }

    #[test]
    fn local_world_round_trip() {
        let f = Frame::from_normal_and_up(Vec3::new(0.3, 0.4, 0.866).normalized(), Vec3::Y);
        let v = Vec3::new(0.2, -0.7, 0.1);
        let back = f.to_world(f.to_local(v));
        assert!((back - v).length() < 1e-12);
    }

    #[test]
    fn reflect_about_normal() {
        let wo = Vec3::new(1.0, 0.0, 1.0).normalized();
        let r = wo.reflect(Vec3::Z);
        assert!((r - Vec3::new(-1.0, 0.0, 1.0).normalized()).length() < 1e-12);
    }
}
