//! Small fixed-size linear algebra used throughout the rasterizer.
//!
//! All math is `f64`; images quantize at the very end. Keeping the types
//! local (rather than pulling in a large linalg crate) makes the exact
//! floating-point evaluation order explicit, which the bit-exact
//! rasterizer/oracle equality relies on.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

pub const fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2 { x, y }
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

pub const fn vec4(x: f64, y: f64, z: f64, w: f64) -> Vec4 {
    Vec4 { x, y, z, w }
}

impl Vec2 {
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 2D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec2 {
        let l = self.length();
        if l == 0.0 {
            Vec2 { x: 0.0, y: 0.0 }
        } else {
            self / l
        }
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        vec2(-self.y, self.x)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self * (1.0 - t) + o * t
    }
}

impl Vec3 {
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let l = self.length();
        if l == 0.0 {
            Vec3::default()
        } else {
            self / l
        }
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self * (1.0 - t) + o * t
    }

    pub fn extend(self, w: f64) -> Vec4 {
        vec4(self.x, self.y, self.z, w)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Vec4 {
    pub fn dot(self, o: Vec4) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z + self.w * o.w
    }

    pub fn xyz(self) -> Vec3 {
        vec3(self.x, self.y, self.z)
    }

    pub fn xy(self) -> Vec2 {
        vec2(self.x, self.y)
    }

    pub fn lerp(self, o: Vec4, t: f64) -> Vec4 {
        self * (1.0 - t) + o * t
    }
}

macro_rules! impl_ops {
    ($t:ty, $($f:ident),+) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t { Self { $($f: self.$f + o.$f),+ } }
        }
        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t { Self { $($f: self.$f - o.$f),+ } }
        }
        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t { Self { $($f: -self.$f),+ } }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, s: f64) -> $t { Self { $($f: self.$f * s),+ } }
        }
        impl Div<f64> for $t {
            type Output = $t;
            fn div(self, s: f64) -> $t { Self { $($f: self.$f / s),+ } }
        }
    };
}

impl_ops!(Vec2, x, y);
impl_ops!(Vec3, x, y, z);
impl_ops!(Vec4, x, y, z, w);

/// Column-major 4x4 matrix (`m[col][row]`), matching the usual GL layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat4 {
    pub m: [[f64; 4]; 4],
}

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4 {
        m: [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ],
    };

    pub fn col(&self, c: usize) -> Vec4 {
        vec4(self.m[c][0], self.m[c][1], self.m[c][2], self.m[c][3])
    }

    pub fn mul_vec4(&self, v: Vec4) -> Vec4 {
        self.col(0) * v.x + self.col(1) * v.y + self.col(2) * v.z + self.col(3) * v.w
    }

    /// Transform a point (w = 1).
    pub fn mul_point(&self, p: Vec3) -> Vec4 {
        self.mul_vec4(p.extend(1.0))
    }

    /// Transform a direction (w = 0).
    pub fn mul_dir(&self, d: Vec3) -> Vec3 {
        self.mul_vec4(d.extend(0.0)).xyz()
    }

    pub fn mul_mat(&self, o: &Mat4) -> Mat4 {
        let mut r = [[0.0; 4]; 4];
        for (c, col) in r.iter_mut().enumerate() {
            let v = self.mul_vec4(o.col(c));
            *col = [v.x, v.y, v.z, v.w];
        }
        Mat4 { m: r }
    }

    /// Entry-wise linear blend `(1-t)*self + t*o`.
    pub fn lerp(&self, o: &Mat4, t: f64) -> Mat4 {
        let mut r = [[0.0; 4]; 4];
        for c in 0..4 {
            for i in 0..4 {
                r[c][i] = (1.0 - t) * self.m[c][i] + t * o.m[c][i];
            }
        }
        Mat4 { m: r }
    }

    pub fn translation(t: Vec3) -> Mat4 {
        let mut m = Mat4::IDENTITY;
        m.m[3][0] = t.x;
        m.m[3][1] = t.y;
        m.m[3][2] = t.z;
        m
    }

    pub fn scale(s: Vec3) -> Mat4 {
        let mut m = Mat4::IDENTITY;
        m.m[0][0] = s.x;
        m.m[1][1] = s.y;
        m.m[2][2] = s.z;
        m
    }

    /// Rotation from a unit quaternion (x, y, z, w).
    pub fn from_quat(q: [f64; 4]) -> Mat4 {
        let [x, y, z, w] = q;
        let n = (x * x + y * y + z * z + w * w).sqrt();
        let (x, y, z, w) = (x / n, y / n, z / n, w / n);
        let mut m = Mat4::IDENTITY;
        m.m[0][0] = 1.0 - 2.0 * (y * y + z * z);
        m.m[0][1] = 2.0 * (x * y + z * w);
        m.m[0][2] = 2.0 * (x * z - y * w);
        m.m[1][0] = 2.0 * (x * y - z * w);
        m.m[1][1] = 1.0 - 2.0 * (x * x + z * z);
        m.m[1][2] = 2.0 * (y * z + x * w);
        m.m[2][0] = 2.0 * (x * z + y * w);
        m.m[2][1] = 2.0 * (y * z - x * w);
        m.m[2][2] = 1.0 - 2.0 * (x * x + y * y);
        m
    }

    pub fn rotation_y(angle_rad: f64) -> Mat4 {
        let (s, c) = angle_rad.sin_cos();
        let mut m = Mat4::IDENTITY;
        m.m[0][0] = c;
        m.m[0][2] = -s;
        m.m[2][0] = s;
        m.m[2][2] = c;
        m
    }

    /// Right-handed look-at view matrix: camera at `eye` looking at `target`,
    /// camera space looks down -z.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Mat4 {
        let f = (target - eye).normalized();
        let s = f.cross(up).normalized();
        let u = s.cross(f);
        let mut m = Mat4::IDENTITY;
        m.m[0][0] = s.x;
        m.m[1][0] = s.y;
        m.m[2][0] = s.z;
        m.m[0][1] = u.x;
        m.m[1][1] = u.y;
        m.m[2][1] = u.z;
        m.m[0][2] = -f.x;
        m.m[1][2] = -f.y;
        m.m[2][2] = -f.z;
        m.m[3][0] = -s.dot(eye);
        m.m[3][1] = -u.dot(eye);
        m.m[3][2] = f.dot(eye);
        m
    }

    /// General inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<Mat4> {
        // Work row-major on an augmented [a | inv] system.
        let mut a = [[0.0f64; 4]; 4];
        for c in 0..4 {
            for r in 0..4 {
                a[r][c] = self.m[c][r];
            }
        }
        let mut inv = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0f64, 0.0, 0.0, 1.0],
        ];
        for col in 0..4 {
            let mut piv = col;
            for r in col + 1..4 {
                if a[r][col].abs() > a[piv][col].abs() {
                    piv = r;
                }
            }
            if a[piv][col].abs() < 1e-14 {
                return None;
            }
            a.swap(col, piv);
            inv.swap(col, piv);
            let d = a[col][col];
            for k in 0..4 {
                a[col][k] /= d;
                inv[col][k] /= d;
            }
            for r in 0..4 {
                if r != col {
                    let f = a[r][col];
                    for k in 0..4 {
                        a[r][k] -= f * a[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
        let mut out = Mat4::IDENTITY;
        for c in 0..4 {
            for r in 0..4 {
                out.m[c][r] = inv[r][c];
            }
        }
        Some(out)
    }
}

pub fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (1.0 - t) * a + t * b
}
