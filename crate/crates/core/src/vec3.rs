//! Small fixed-size real and complex 3-vectors.

use crate::C64;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Real 3-vector (meters, unless stated otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
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

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    /// Spherical angles of the direction: (r, theta, phi).
    pub fn to_spherical(self) -> (f64, f64, f64) {
        let r = self.norm();
        let theta = if r == 0.0 { 0.0 } else { (self.z / r).clamp(-1.0, 1.0).acos() };
        let phi = self.y.atan2(self.x);
        (r, theta, phi)
    }

    /// Unit vector for spherical angles.
    pub fn from_spherical_dir(theta: f64, phi: f64) -> Vec3 {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Complex 3-vector (field values).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CVec3 {
    pub x: C64,
    pub y: C64,
    pub z: C64,
}

impl CVec3 {
    pub const ZERO: CVec3 = CVec3 {
        x: C64::new(0.0, 0.0),
        y: C64::new(0.0, 0.0),
        z: C64::new(0.0, 0.0),
    };

    pub fn new(x: C64, y: C64, z: C64) -> Self {
        CVec3 { x, y, z }
    }

    pub fn from_real(v: Vec3) -> Self {
        CVec3::new(v.x.into(), v.y.into(), v.z.into())
    }

    /// Bilinear (unconjugated) dot product with a real vector.
    pub fn dot_real(self, o: Vec3) -> C64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Bilinear (unconjugated) dot product.
    pub fn dot(self, o: CVec3) -> C64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross_real(self, o: Vec3) -> CVec3 {
        CVec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        (self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()).sqrt()
    }

    pub fn scale(self, s: C64) -> CVec3 {
        CVec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Add for CVec3 {
    type Output = CVec3;
    fn add(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for CVec3 {
    fn add_assign(&mut self, o: CVec3) {
        *self = *self + o;
    }
}

impl Sub for CVec3 {
    type Output = CVec3;
    fn sub(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for CVec3 {
    type Output = CVec3;
    fn mul(self, s: f64) -> CVec3 {
        CVec3::new(self.x * s, self.y * s, self.z * s)
    }
}
