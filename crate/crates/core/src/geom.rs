//! Small fixed-size linear algebra used throughout: 3-vectors and real
//! symmetric 3x3 matrices.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point or vector in R^3.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
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

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn component(self, k: usize) -> f64 {
        match k {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("component index out of range"),
        }
    }

    pub fn with_component(mut self, k: usize, v: f64) -> Self {
        match k {
            0 => self.x = v,
            1 => self.y = v,
            2 => self.z = v,
            _ => panic!("component index out of range"),
        }
        self
    }

    /// Unit vector along axis `k`.
    pub fn axis(k: usize) -> Self {
        Vec3::ZERO.with_component(k, 1.0)
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

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, t: f64) -> Vec3 {
        Vec3::new(self.x * t, self.y * t, self.z * t)
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
    fn div(self, t: f64) -> Vec3 {
        Vec3::new(self.x / t, self.y / t, self.z / t)
    }
}

/// A complex 3-vector, e.g. a covariant gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVec3 {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl CVec3 {
    pub const ZERO: CVec3 = CVec3 {
        x: Complex64 { re: 0.0, im: 0.0 },
        y: Complex64 { re: 0.0, im: 0.0 },
        z: Complex64 { re: 0.0, im: 0.0 },
    };

    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        CVec3 { x, y, z }
    }

    pub fn from_real(v: Vec3) -> Self {
        CVec3::new(v.x.into(), v.y.into(), v.z.into())
    }

    /// Contraction with a real vector: sum_k g_k z_k.
    pub fn dot_real(self, z: Vec3) -> Complex64 {
        self.x * z.x + self.y * z.y + self.z * z.z
    }

    /// Hermitian inner product sum_k g_k conj(h_k).
    pub fn dot_conj(self, o: CVec3) -> Complex64 {
        self.x * o.x.conj() + self.y * o.y.conj() + self.z * o.z.conj()
    }

    pub fn norm_sq(self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()
    }

    pub fn component(self, k: usize) -> Complex64 {
        match k {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("component index out of range"),
        }
    }
}

impl Add for CVec3 {
    type Output = CVec3;
    fn add(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for CVec3 {
    type Output = CVec3;
    fn sub(self, o: CVec3) -> CVec3 {
        CVec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<Complex64> for CVec3 {
    type Output = CVec3;
    fn mul(self, t: Complex64) -> CVec3 {
        CVec3::new(self.x * t, self.y * t, self.z * t)
    }
}

impl Mul<f64> for CVec3 {
    type Output = CVec3;
    fn mul(self, t: f64) -> CVec3 {
        CVec3::new(self.x * t, self.y * t, self.z * t)
    }
}

/// Real symmetric 3x3 matrix stored by its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMat3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymMat3 {
    pub fn diag(d: Vec3) -> Self {
        SymMat3 { xx: d.x, yy: d.y, zz: d.z, xy: 0.0, xz: 0.0, yz: 0.0 }
    }

    pub fn scalar(t: f64) -> Self {
        Self::diag(Vec3::new(t, t, t))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match (i.min(j), i.max(j)) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            (2, 2) => self.zz,
            (0, 1) => self.xy,
            (0, 2) => self.xz,
            (1, 2) => self.yz,
            _ => panic!("index out of range"),
        }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.xx * v.x + self.xy * v.y + self.xz * v.z,
            self.xy * v.x + self.yy * v.y + self.yz * v.z,
            self.xz * v.x + self.yz * v.y + self.zz * v.z,
        )
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy + self.zz
    }
}

/// General real 3x3 matrix (row-major); used for rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation by `angle` about the given (unit) axis.
    pub fn rotation(axis: Vec3, angle: f64) -> Self {
        let u = axis / axis.norm();
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Mat3([
            [c + u.x * u.x * t, u.x * u.y * t - u.z * s, u.x * u.z * t + u.y * s],
            [u.y * u.x * t + u.z * s, c + u.y * u.y * t, u.y * u.z * t - u.x * s],
            [u.z * u.x * t - u.y * s, u.z * u.y * t + u.x * s, c + u.z * u.z * t],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y + self.0[0][2] * v.z,
            self.0[1][0] * v.x + self.0[1][1] * v.y + self.0[1][2] * v.z,
            self.0[2][0] * v.x + self.0[2][1] * v.y + self.0[2][2] * v.z,
        )
    }
}

/// A complex 3x3 matrix (row-major), used for field Hessians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CMat3(pub [[Complex64; 3]; 3]);

impl CMat3 {
    pub fn zero() -> Self {
        CMat3([[Complex64::new(0.0, 0.0); 3]; 3])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Quadratic form z . M z for real z.
    pub fn quad_form(&self, z: Vec3) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (h, row) in self.0.iter().enumerate() {
            for (k, mhk) in row.iter().enumerate() {
                acc += mhk * z.component(h) * z.component(k);
            }
        }
        acc
    }

    /// Max absolute entry of M - M^T.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for h in 0..3 {
            for k in 0..3 {
                worst = worst.max((self.0[h][k] - self.0[k][h]).norm());
            }
        }
        worst
    }
}
