//! Fixed-size 3D vectors and matrices, plus closed-form exponentials of
//! matrices whose spectrum is one real eigenvalue and a complex pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const E1: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E2: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
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

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn scaled_identity(s: f64) -> Self {
        Mat3::identity().scale(s)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|e| *e *= s);
        m
    }

    pub fn transpose(&self) -> Mat3 {
        let a = &self.0;
        Mat3([
            [a[0][0], a[1][0], a[2][0]],
            [a[0][1], a[1][1], a[2][1]],
            [a[0][2], a[1][2], a[2][2]],
        ])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let a = &self.0;
        Vec3::new(
            a[0][0] * v.x + a[0][1] * v.y + a[0][2] * v.z,
            a[1][0] * v.x + a[1][1] * v.y + a[1][2] * v.z,
            a[2][0] * v.x + a[2][1] * v.y + a[2][2] * v.z,
        )
    }

    /// `vᵀ M` returned as a column vector.
    pub fn left_mul_vec(&self, v: Vec3) -> Vec3 {
        self.transpose().mul_vec(v)
    }

    pub fn matmul(&self, other: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Sum of the principal 2×2 minors.
    pub fn second_trace(&self) -> f64 {
        let a = &self.0;
        a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0]
            + a[1][1] * a[2][2]
            - a[1][2] * a[2][1]
    }

    pub fn determinant(&self) -> f64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let a = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Some(Mat3(adj).scale(1.0 / det))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, e| m.max(e.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|e| e.is_finite())
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut m = self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] += o.0[i][j];
            }
        }
        m
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        self + o.scale(-1.0)
    }
}

/// Spectral data of a real 3×3 matrix with eigenvalues
/// `sign·alpha ± i·beta` and `-gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `-1.0` for a contracting pair `-alpha ± i beta`, `+1.0` for `alpha ± i beta`.
    pub sign: f64,
}

impl EigenTriple {
    pub fn stable_focus(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma, sign: -1.0 }
    }

    pub fn saddle_focus(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma, sign: 1.0 }
    }

    /// Real part of the complex pair.
    pub fn pair_real(&self) -> f64 {
        self.sign * self.alpha
    }

    pub fn real_eigenvalue(&self) -> f64 {
        -self.gamma
    }

    pub fn eigenvalues(&self) -> [Complex64; 3] {
        let p = self.pair_real();
        [
            Complex64::new(p, self.beta),
            Complex64::new(p, -self.beta),
            Complex64::new(-self.gamma, 0.0),
        ]
    }

    /// Trace, second trace and determinant of any matrix with this spectrum.
    pub fn invariants(&self) -> (f64, f64, f64) {
        let p = self.pair_real();
        let r = -self.gamma;
        let m2 = p * p + self.beta * self.beta;
        (2.0 * p + r, m2 + 2.0 * p * r, m2 * r)
    }

    /// Time for the complex pair to complete one rotation.
    pub fn rotation_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.beta
    }
}

/// Companion matrix with first column `(tau, -sigma, delta)` and ones on the
/// superdiagonal.
pub fn companion_from_traces(tau: f64, sigma: f64, delta: f64) -> Mat3 {
    Mat3([[tau, 1.0, 0.0], [-sigma, 0.0, 1.0], [delta, 0.0, 0.0]])
}

/// Closed-form `exp(tC)` for a matrix with known spectrum.
///
/// By Sylvester's formula on the distinct eigenvalues `r` (real) and
/// `p ± iq`, `exp(tC) = s_q(t) Q + s_a(t) A + s_b(t) B` where the matrices
/// `Q = (C - p)^2 + q^2`, `A = (C - r)(C - p)` and `B = q (C - r)` depend
/// only on `C`. Building an [`ExpmCompanion`] once and calling
/// [`ExpmCompanion::at`] repeatedly avoids recomputing them.
#[derive(Debug, Clone, Copy)]
pub struct ExpmCompanion {
    eig: EigenTriple,
    q_mat: Mat3,
    a_mat: Mat3,
    b_mat: Mat3,
    /// `1 / ((p - r)^2 + q^2)`
    inv_gap: f64,
    /// `1 / ((p - r + iq)(2iq))`
    pair_denominator: Complex64,
}

impl ExpmCompanion {
    pub fn new(c: &Mat3, eig: EigenTriple) -> Self {
        let p = eig.pair_real();
        let q = eig.beta;
        let r = eig.real_eigenvalue();
        let c_minus_p = *c - Mat3::scaled_identity(p);
        let c_minus_r = *c - Mat3::scaled_identity(r);
        let q_mat = c_minus_p.matmul(&c_minus_p) + Mat3::scaled_identity(q * q);
        let a_mat = c_minus_r.matmul(&c_minus_p);
        let b_mat = c_minus_r.scale(q);
        let gap = (p - r) * (p - r) + q * q;
        let pair_denominator = 1.0 / (Complex64::new(p - r, q) * Complex64::new(0.0, 2.0 * q));
        Self { eig, q_mat, a_mat, b_mat, inv_gap: 1.0 / gap, pair_denominator }
    }

    /// Scalar weights `(s_q, s_a, s_b)` at time `t`.
    fn weights(&self, t: f64) -> (f64, f64, f64) {
        let p = self.eig.pair_real();
        let q = self.eig.beta;
        let r = self.eig.real_eigenvalue();
        let s_q = (r * t).exp() * self.inv_gap;
        // Contribution of eigenvalue p + iq and its conjugate:
        // 2 Re[e^{t(p+iq)} (A + iB) / ((p-r+iq)(2iq))].
        let z = Complex64::from_polar((p * t).exp(), q * t) * self.pair_denominator;
        (s_q, 2.0 * z.re, -2.0 * z.im)
    }

    pub fn at(&self, t: f64) -> Mat3 {
        let (s_q, s_a, s_b) = self.weights(t);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = s_q * self.q_mat.0[i][j] + s_a * self.a_mat.0[i][j] + s_b * self.b_mat.0[i][j];
            }
        }
        Mat3(out)
    }

    /// `exp(tC) u` without forming the matrix.
    pub fn apply(&self, t: f64, u: Vec3) -> Vec3 {
        let (s_q, s_a, s_b) = self.weights(t);
        self.q_mat.mul_vec(u) * s_q + self.a_mat.mul_vec(u) * s_a + self.b_mat.mul_vec(u) * s_b
    }
}

/// `exp(tC)` for a matrix whose spectrum is described by `eig`.
pub fn expm_companion(c: &Mat3, eig: &EigenTriple, t: f64) -> Mat3 {
    ExpmCompanion::new(c, *eig).at(t)
}
