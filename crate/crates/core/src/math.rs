//! Small linear-algebra kit: `Vec3` and a column-major homogeneous `Mat4`.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Linear RGB triple. Shares the vector arithmetic.
pub type Rgb = Vec3;

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    /// Unit vector in the same direction; the zero vector maps to itself.
    pub fn normalize(self) -> Vec3 {
        let len = self.length();
        if len > 0.0 {
            self / len
        } else {
            self
        }
    }

    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Vec3 {
        self.map(|c| c.clamp(lo, hi))
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn axis(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
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

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
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

/// Homogeneous 4×4 matrix stored column-major: `m[col * 4 + row]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat4 {
    pub m: [f64; 16],
}

impl Default for Mat4 {
    fn default() -> Self {
        Mat4::IDENTITY
    }
}

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4 {
        m: [
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    };

    pub fn from_cols_array(m: [f64; 16]) -> Self {
        Self { m }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[col * 4 + row]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.m[col * 4 + row] = v;
    }

    pub fn translation(t: Vec3) -> Mat4 {
        let mut r = Mat4::IDENTITY;
        r.set(0, 3, t.x);
        r.set(1, 3, t.y);
        r.set(2, 3, t.z);
        r
    }

    pub fn scale(s: Vec3) -> Mat4 {
        let mut r = Mat4::IDENTITY;
        r.set(0, 0, s.x);
        r.set(1, 1, s.y);
        r.set(2, 2, s.z);
        r
    }

    pub fn rotation_x(angle: f64) -> Mat4 {
        let (s, c) = angle.sin_cos();
        let mut r = Mat4::IDENTITY;
        r.set(1, 1, c);
        r.set(1, 2, -s);
        r.set(2, 1, s);
        r.set(2, 2, c);
        r
    }

    pub fn rotation_y(angle: f64) -> Mat4 {
        let (s, c) = angle.sin_cos();
        let mut r = Mat4::IDENTITY;
        r.set(0, 0, c);
        r.set(0, 2, s);
        r.set(2, 0, -s);
        r.set(2, 2, c);
        r
    }

    pub fn rotation_z(angle: f64) -> Mat4 {
        let (s, c) = angle.sin_cos();
        let mut r = Mat4::IDENTITY;
        r.set(0, 0, c);
        r.set(0, 1, -s);
        r.set(1, 0, s);
        r.set(1, 1, c);
        r
    }

    /// Rotation from a unit quaternion `[x, y, z, w]`.
    pub fn from_quat(q: [f64; 4]) -> Mat4 {
        let [x, y, z, w] = q;
        let mut r = Mat4::IDENTITY;
        r.set(0, 0, 1.0 - 2.0 * (y * y + z * z));
        r.set(0, 1, 2.0 * (x * y - z * w));
        r.set(0, 2, 2.0 * (x * z + y * w));
        r.set(1, 0, 2.0 * (x * y + z * w));
        r.set(1, 1, 1.0 - 2.0 * (x * x + z * z));
        r.set(1, 2, 2.0 * (y * z - x * w));
        r.set(2, 0, 2.0 * (x * z - y * w));
        r.set(2, 1, 2.0 * (y * z + x * w));
        r.set(2, 2, 1.0 - 2.0 * (x * x + y * y));
        r
    }

    /// `T · R · S`, the glTF node composition order.
    pub fn from_trs(t: Vec3, q: [f64; 4], s: Vec3) -> Mat4 {
        Mat4::translation(t) * Mat4::from_quat(q) * Mat4::scale(s)
    }

    /// Right-handed view matrix looking from `eye` toward `target`.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Mat4 {
        Mat4::camera_to_world(eye, target, up).inverse().unwrap_or(Mat4::IDENTITY)
    }

    /// Node transform for a camera at `eye` looking toward `target` (camera looks down its local -Z).
    pub fn camera_to_world(eye: Vec3, target: Vec3, up: Vec3) -> Mat4 {
        let back = (eye - target).normalize();
        let right = up.cross(back).normalize();
        let true_up = back.cross(right);
        let mut r = Mat4::IDENTITY;
        for (col, v) in [right, true_up, back, eye].into_iter().enumerate() {
            r.set(0, col, v.x);
            r.set(1, col, v.y);
            r.set(2, col, v.z);
        }
        r
    }

    /// Perspective projection with depth mapped to `[0, 1]` (near → 0).
    pub fn perspective(vertical_fov: f64, aspect: f64, near: f64, far: f64) -> Mat4 {
        let f = 1.0 / (vertical_fov * 0.5).tan();
        let mut r = Mat4 { m: [0.0; 16] };
        r.set(0, 0, f / aspect);
        r.set(1, 1, f);
        r.set(2, 2, far / (near - far));
        r.set(2, 3, near * far / (near - far));
        r.set(3, 2, -1.0);
        r
    }

    pub fn transpose(&self) -> Mat4 {
        let mut r = Mat4 { m: [0.0; 16] };
        for row in 0..4 {
            for col in 0..4 {
                r.set(row, col, self.get(col, row));
            }
        }
        r
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        let [x, y, z, w] = self.mul_vec4([p.x, p.y, p.z, 1.0]);
        if w != 1.0 && w != 0.0 {
            Vec3::new(x / w, y / w, z / w)
        } else {
            Vec3::new(x, y, z)
        }
    }

    pub fn transform_vector(&self, v: Vec3) -> Vec3 {
        let [x, y, z, _] = self.mul_vec4([v.x, v.y, v.z, 0.0]);
        Vec3::new(x, y, z)
    }

    pub fn mul_vec4(&self, v: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (row, o) in out.iter_mut().enumerate() {
            *o = self.get(row, 0) * v[0] + self.get(row, 1) * v[1] + self.get(row, 2) * v[2] + self.get(row, 3) * v[3];
        }
        out
    }

    pub fn translation_part(&self) -> Vec3 {
        Vec3::new(self.get(0, 3), self.get(1, 3), self.get(2, 3))
    }

    pub fn determinant(&self) -> f64 {
        let inv = self.adjugate();
        self.m[0] * inv[0] + self.m[1] * inv[4] + self.m[2] * inv[8] + self.m[3] * inv[12]
    }

    /// General 4×4 inverse; `None` when the matrix is singular.
    pub fn inverse(&self) -> Option<Mat4> {
        let adj = self.adjugate();
        let det = self.m[0] * adj[0] + self.m[1] * adj[4] + self.m[2] * adj[8] + self.m[3] * adj[12];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv_det = 1.0 / det;
        let mut m = [0.0; 16];
        for (o, a) in m.iter_mut().zip(adj.iter()) {
            *o = a * inv_det;
        }
        Some(Mat4 { m })
    }

    /// Inverse-transpose of the upper 3×3, used to carry normals.
    pub fn normal_matrix(&self) -> Mat4 {
        let mut upper = *self;
        for i in 0..3 {
            upper.set(i, 3, 0.0);
            upper.set(3, i, 0.0);
        }
        upper.set(3, 3, 1.0);
        upper.inverse().unwrap_or(Mat4::IDENTITY).transpose()
    }

    pub fn is_affine(&self) -> bool {
        self.get(3, 0) == 0.0 && self.get(3, 1) == 0.0 && self.get(3, 2) == 0.0 && self.get(3, 3) == 1.0
    }

    pub fn max_abs_diff(&self, o: &Mat4) -> f64 {
        self.m.iter().zip(o.m.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    // Cofactor expansion (column-major, same layout as the classic MESA inverse).
    fn adjugate(&self) -> [f64; 16] {
        let m = &self.m;
        let mut inv = [0.0; 16];
        inv[0] = m[5] * m[10] * m[15] - m[5] * m[11] * m[14] - m[9] * m[6] * m[15] + m[9] * m[7] * m[14] + m[13] * m[6] * m[11]
            - m[13] * m[7] * m[10];
        inv[4] = -m[4] * m[10] * m[15] + m[4] * m[11] * m[14] + m[8] * m[6] * m[15] - m[8] * m[7] * m[14] - m[12] * m[6] * m[11]
            + m[12] * m[7] * m[10];
        inv[8] = m[4] * m[9] * m[15] - m[4] * m[11] * m[13] - m[8] * m[5] * m[15] + m[8] * m[7] * m[13] + m[12] * m[5] * m[11]
            - m[12] * m[7] * m[9];
        inv[12] = -m[4] * m[9] * m[14] + m[4] * m[10] * m[13] + m[8] * m[5] * m[14] - m[8] * m[6] * m[13] - m[12] * m[5] * m[10]
            + m[12] * m[6] * m[9];
        inv[1] = -m[1] * m[10] * m[15] + m[1] * m[11] * m[14] + m[9] * m[2] * m[15] - m[9] * m[3] * m[14] - m[13] * m[2] * m[11]
            + m[13] * m[3] * m[10];
        inv[5] = m[0] * m[10] * m[15] - m[0] * m[11] * m[14] - m[8] * m[2] * m[15] + m[8] * m[3] * m[14] + m[12] * m[2] * m[11]
            - m[12] * m[3] * m[10];
        inv[9] = -m[0] * m[9] * m[15] + m[0] * m[11] * m[13] + m[8] * m[1] * m[15] - m[8] * m[3] * m[13] - m[12] * m[1] * m[11]
            + m[12] * m[3] * m[9];
        inv[13] = m[0] * m[9] * m[14] - m[0] * m[10] * m[13] - m[8] * m[1] * m[14] + m[8] * m[2] * m[13] + m[12] * m[1] * m[10]
            - m[12] * m[2] * m[9];
        inv[2] = m[1] * m[6] * m[15] - m[1] * m[7] * m[14] - m[5] * m[2] * m[15] + m[5] * m[3] * m[14] + m[13] * m[2] * m[7]
            - m[13] * m[3] * m[6];
        inv[6] = -m[0] * m[6] * m[15] + m[0] * m[7] * m[14] + m[4] * m[2] * m[15] - m[4] * m[3] * m[14] - m[12] * m[2] * m[7]
            + m[12] * m[3] * m[6];
        inv[10] = m[0] * m[5] * m[15] - m[0] * m[7] * m[13] - m[4] * m[1] * m[15] + m[4] * m[3] * m[13] + m[12] * m[1] * m[7]
            - m[12] * m[3] * m[5];
        inv[14] = -m[0] * m[5] * m[14] + m[0] * m[6] * m[13] + m[4] * m[1] * m[14] - m[4] * m[2] * m[13] - m[12] * m[1] * m[6]
            + m[12] * m[2] * m[5];
        inv[3] = -m[1] * m[6] * m[11] + m[1] * m[7] * m[10] + m[5] * m[2] * m[11] - m[5] * m[3] * m[10] - m[9] * m[2] * m[7]
            + m[9] * m[3] * m[6];
        inv[7] =
            m[0] * m[6] * m[11] - m[0] * m[7] * m[10] - m[4] * m[2] * m[11] + m[4] * m[3] * m[10] + m[8] * m[2] * m[7] - m[8] * m[3] * m[6];
        inv[11] =
            -m[0] * m[5] * m[11] + m[0] * m[7] * m[9] + m[4] * m[1] * m[11] - m[4] * m[3] * m[9] - m[8] * m[1] * m[7] + m[8] * m[3] * m[5];
        inv[15] =
            m[0] * m[5] * m[10] - m[0] * m[6] * m[9] - m[4] * m[1] * m[10] + m[4] * m[2] * m[9] + m[8] * m[1] * m[6] - m[8] * m[2] * m[5];
        inv
    }
}

impl Mul for Mat4 {
    type Output = Mat4;
    fn mul(self, o: Mat4) -> Mat4 {
        let mut r = Mat4 { m: [0.0; 16] };
        for col in 0..4 {
            for row in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += self.get(row, k) * o.get(k, col);
                }
                r.set(row, col, acc);
            }
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trips() {
        let m = Mat4::translation(Vec3::new(1.0, -2.0, 3.0)) * Mat4::rotation_y(0.7) * Mat4::scale(Vec3::new(2.0, 0.5, 1.5));
        let inv = m.inverse().unwrap();
        assert!((m * inv).max_abs_diff(&Mat4::IDENTITY) < 1e-12);
        assert!((m.determinant() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn singular_has_no_inverse() {
        assert!(Mat4::scale(Vec3::new(1.0, 0.0, 1.0)).inverse().is_none());
    }

    #[test]
    fn quat_matches_axis_rotation() {
        let a: f64 = 0.9;
        let q = [0.0, 0.0, (a / 2.0).sin(), (a / 2.0).cos()];
        assert!(Mat4::from_quat(q).max_abs_diff(&Mat4::rotation_z(a)) < 1e-12);
    }

    #[test]
    fn perspective_maps_near_far_to_unit_depth() {
        let p = Mat4::perspective(1.0, 1.0, 0.5, 50.0);
        let near = p.mul_vec4([0.0, 0.0, -0.5, 1.0]);
        let far = p.mul_vec4([0.0, 0.0, -50.0, 1.0]);
        assert!((near[2] / near[3]).abs() < 1e-12);
        assert!((far[2] / far[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn look_at_puts_target_on_negative_z() {
        let v = Mat4::look_at(Vec3::new(0.0, 3.0, 4.0), Vec3::ZERO, Vec3::Y);
        let p = v.transform_point(Vec3::ZERO);
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
        assert!((p.z + 5.0).abs() < 1e-12);
    }
}
