//! Two-level ray-tracing acceleration: per-geometry bottom-level BVHs
//! (built once, then compacted) and a top-level BVH over transformed
//! instances that is rebuilt from scratch every frame.

mod blas;
mod brute;
mod bvh;
mod tlas;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;

pub use blas::{build_blas, compact_blas, Blas, Footprint};
pub use brute::{brute_force_any_hit, brute_force_closest_hit, world_triangles, WorldTriangle};
pub use bvh::{BvhNode, BvhStats, MAX_LEAF_SIZE, SAH_BINS};
pub use tlas::{build_tlas, instances_for_scene, ray_any_hit, ray_closest_hit, shadow_visibility, Tlas, TlasInstance};

/// Determinant threshold for ray/triangle tests.
pub const TRIANGLE_EPSILON: f64 = 1e-9;
/// Slack on the barycentric range so rays through shared vertices and edges
/// are not lost to rounding.
const BARYCENTRIC_SLACK: f64 = 1e-12;
/// Offset of shadow-ray origins along the surface normal, in scene units.
pub const SHADOW_ORIGIN_OFFSET: f64 = 1e-4;
/// Trimmed from both ends of a shadow ray.
pub const SHADOW_T_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb { min: Vec3::splat(f64::INFINITY), max: Vec3::splat(f64::NEG_INFINITY) };

    pub fn from_points(points: &[Vec3]) -> Aabb {
        points.iter().fold(Aabb::EMPTY, |b, &p| b.grow_point(p))
    }

    pub fn grow_point(self, p: Vec3) -> Aabb {
        Aabb { min: self.min.min(p), max: self.max.max(p) }
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn centroid(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn surface_area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let e = self.extent();
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y && p.z >= self.min.z && p.z <= self.max.z
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        o.is_empty() || (self.contains_point(o.min) && self.contains_point(o.max))
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
            && self.min.z <= o.max.z
            && o.min.z <= self.max.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }

    /// Slab test; returns the entry distance when the box overlaps `[t_min, t_max]`.
    #[inline]
    pub fn hit(&self, origin: Vec3, inv_dir: Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let mut lo = t_min;
        let mut hi = t_max;
        for axis in 0..3 {
            if inv_dir[axis].is_infinite() {
                // Parallel to this slab: inside iff the origin is, including on its faces.
                if origin[axis] < self.min[axis] || origin[axis] > self.max[axis] {
                    return None;
                }
                continue;
            }
            let t0 = (self.min[axis] - origin[axis]) * inv_dir[axis];
            let t1 = (self.max[axis] - origin[axis]) * inv_dir[axis];
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
        (lo <= hi).then_some(lo)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RayError {
    #[error("ray direction must be non-zero and finite")]
    BadDirection,
    #[error("ray interval requires 0 <= t_min < t_max")]
    BadInterval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_min: f64, t_max: f64) -> Result<Ray, RayError> {
        let len = direction.length();
        if !(len > 0.0 && len.is_finite()) {
            return Err(RayError::BadDirection);
        }
        if !(t_min >= 0.0 && t_min < t_max) {
            return Err(RayError::BadInterval);
        }
        Ok(Ray { origin, direction: direction / len, t_min, t_max })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub instance: u32,
    pub triangle: u32,
    pub u: f64,
    pub v: f64,
}

impl Hit {
    /// Ordering used for closest-hit selection: distance, then (instance, triangle).
    pub fn precedes(&self, other: &Hit) -> bool {
        (self.t, self.instance, self.triangle) < (other.t, other.instance, other.triangle)
    }
}

/// Möller–Trumbore. `dir` need not be unit length; `t` is in units of `dir`.
/// Returns `(t, u, v)` for hits inside `[t_min, t_max]`; degenerate triangles never hit.
pub fn intersect_triangle(origin: Vec3, dir: Vec3, tri: &[Vec3; 3], t_min: f64, t_max: f64) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < TRIANGLE_EPSILON {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    if !(-BARYCENTRIC_SLACK..=1.0 + BARYCENTRIC_SLACK).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -BARYCENTRIC_SLACK || u + v > 1.0 + BARYCENTRIC_SLACK {
        return None;
    }
    let t = e2.dot(q) * inv;
    if !(t >= t_min && t <= t_max) {
        return None;
    }
    let u = u.clamp(0.0, 1.0);
    let v = v.clamp(0.0, 1.0 - u);
    Some((t, u, v))
}
