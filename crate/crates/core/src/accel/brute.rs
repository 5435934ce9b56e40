use super::{intersect_triangle, Hit, Ray, TlasInstance};
use crate::math::Vec3;

/// A triangle already moved into world space, tagged with its origin.
#[derive(Debug, Clone, Copy)]
pub struct WorldTriangle {
    pub instance: u32,
    pub triangle: u32,
    pub vertices: [Vec3; 3],
}

pub fn world_triangles(instances: &[TlasInstance]) -> Vec<WorldTriangle> {
    let mut out = Vec::new();
    for inst in instances {
        for (i, tri) in inst.blas.original_triangles().into_iter().enumerate() {
            out.push(WorldTriangle {
                instance: inst.instance_id,
                triangle: i as u32,
                vertices: tri.map(|p| inst.transform.transform_point(p)),
            });
        }
    }
    out
}

/// Linear scan; same interval and tie-break contract as the BVH query.
pub fn brute_force_closest_hit(triangles: &[WorldTriangle], ray: &Ray) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for w in triangles {
        if let Some((t, u, v)) = intersect_triangle(ray.origin, ray.direction, &w.vertices, ray.t_min, ray.t_max) {
            let hit = Hit { t, instance: w.instance, triangle: w.triangle, u, v };
            if best.is_none_or(|b| hit.precedes(&b)) {
                best = Some(hit);
            }
        }
    }
    best
}

pub fn brute_force_any_hit(triangles: &[WorldTriangle], ray: &Ray) -> bool {
    triangles.iter().any(|w| intersect_triangle(ray.origin, ray.direction, &w.vertices, ray.t_min, ray.t_max).is_some())
}
