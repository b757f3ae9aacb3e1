//! Time-varying transforms, projection, pinhole rays and the
//! ray-triangle intersection routine shared by the rasterizer and the
//! brute-force oracle.
//!
//! Conventions are fixed once so that the rasterizer and the oracle can be
//! compared bit-exactly: right-handed camera space looking down -z, NDC in
//! (-1,1)^2, pixel centers at `(i + 0.5) / W` mapped to (-1,1).

use thiserror::Error;

use crate::math::{vec2, vec3, Mat4, Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    /// Projection hit w <= 0; the primitive was not near-plane handled.
    #[error("projected w = {0} is not positive; near-plane split missing")]
    NonPositiveW(f64),
}

/// Model-view-projection (or projection-only) transform at the start and
/// end of the frame interval, interpolated entry-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeVaryingTransform {
    pub start: Mat4,
    pub end: Mat4,
}

impl TimeVaryingTransform {
    pub fn constant(m: Mat4) -> Self {
        Self { start: m, end: m }
    }

    /// Entry-wise linear blend; exact at the endpoints.
    pub fn at(&self, t: f64) -> Mat4 {
        if t == 0.0 || self.start == self.end {
            self.start
        } else if t == 1.0 {
            self.end
        } else {
            self.start.lerp(&self.end, t)
        }
    }
}

/// A triangle with camera-space vertex positions at the start and end of
/// the frame interval; the unit of rasterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeTriangle {
    /// `pos[0]` at frame start, `pos[1]` at frame end.
    pub pos: [[Vec3; 3]; 2],
    /// Camera-space vertex normals at start/end.
    pub normal: [[Vec3; 3]; 2],
    pub material: u32,
    /// Stream-order primitive id; doubles as the z tie-break key.
    pub prim: u32,
}

impl SpaceTimeTriangle {
    pub fn static_tri(pos: [Vec3; 3]) -> Self {
        let n = (pos[1] - pos[0]).cross(pos[2] - pos[0]).normalized();
        SpaceTimeTriangle {
            pos: [pos, pos],
            normal: [[n; 3]; 2],
            material: 0,
            prim: 0,
        }
    }

    /// Vertex positions at time `t`, component-wise linear blend.
    pub fn at(&self, t: f64) -> [Vec3; 3] {
        if t == 0.0 {
            self.pos[0]
        } else if t == 1.0 {
            self.pos[1]
        } else {
            [
                self.pos[0][0].lerp(self.pos[1][0], t),
                self.pos[0][1].lerp(self.pos[1][1], t),
                self.pos[0][2].lerp(self.pos[1][2], t),
            ]
        }
    }

    pub fn normal_at(&self, t: f64, j: usize) -> Vec3 {
        self.normal[0][j].lerp(self.normal[1][j], t)
    }
}

/// Camera-space ray with the simulation time it samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub time: f64,
}

impl Ray {
    pub fn sample(&self, s: f64) -> Vec3 {
        self.origin + self.direction * s
    }
}

/// Result of a ray-triangle intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Positive camera-space depth (-z of the intersection point).
    pub depth: f64,
    /// Ray parameter of the intersection.
    pub t_ray: f64,
    /// Barycentric weights of vertices 0, 1, 2; sum to 1 within 1e-5.
    pub bary: [f64; 3],
    pub prim: u32,
}

/// Pinhole camera intrinsics for the canonical -z viewing frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    /// Image-plane half extents at z = -1.
    pub half_w: f64,
    pub half_h: f64,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    pub fn from_vfov(vfov_deg: f64, aspect: f64, near: f64) -> Self {
        let half_h = (vfov_deg.to_radians() * 0.5).tan();
        Camera {
            half_w: half_h * aspect,
            half_h,
            near,
            far: near * 1.0e5,
        }
    }

    /// Perspective projection matrix mapping camera space to clip space
    /// with w = -z.
    pub fn projection(&self) -> Mat4 {
        let mut m = Mat4 { m: [[0.0; 4]; 4] };
        m.m[0][0] = 1.0 / self.half_w;
        m.m[1][1] = 1.0 / self.half_h;
        m.m[2][2] = -(self.far + self.near) / (self.far - self.near);
        m.m[2][3] = -1.0;
        m.m[3][2] = -2.0 * self.far * self.near / (self.far - self.near);
        m
    }

    /// Ray through an NDC point on the image plane; origin at the camera
    /// center, direction normalized.
    pub fn pixel_ray(&self, ndc: Vec2) -> Ray {
        let dir = vec3(ndc.x * self.half_w, ndc.y * self.half_h, -1.0).normalized();
        Ray {
            origin: vec3(0.0, 0.0, 0.0),
            direction: dir,
            time: 0.0,
        }
    }
}

/// Project a camera-space point to 2D NDC: matrix multiply then
/// homogeneous division. Errors when w <= 0 (point not near-plane handled).
pub fn project(point: Vec3, transform: &Mat4) -> Result<Vec2, GeomError> {
    let clip = transform.mul_point(point);
    if clip.w <= 0.0 {
        return Err(GeomError::NonPositiveW(clip.w));
    }
    Ok(vec2(clip.x / clip.w, clip.y / clip.w))
}

/// Moeller-Trumbore ray-triangle intersection with an inclusive edge rule:
/// hits exactly on an edge count for both adjacent triangles. Degenerate
/// (zero-area) triangles miss. Both the rasterizer and the oracle must call
/// this exact routine so their outputs stay bit-identical.
pub fn intersect(ray: &Ray, tri: &[Vec3; 3], prim: u32) -> Option<Hit> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pv = ray.direction.cross(e2);
    let det = e1.dot(pv);
    if det.abs() < 1e-18 {
        return None; // parallel or degenerate
    }
    let inv_det = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(pv) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qv = s.cross(e1);
    let v = ray.direction.dot(qv) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qv) * inv_det;
    if !(t > 0.0 && t.is_finite()) {
        return None;
    }
    let p = ray.sample(t);
    let depth = -p.z;
    if depth <= 0.0 {
        return None;
    }
    Some(Hit {
        depth,
        t_ray: t,
        bary: [1.0 - u - v, u, v],
        prim,
    })
}
