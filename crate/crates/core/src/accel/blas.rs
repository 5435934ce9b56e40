use std::mem::size_of;

use super::bvh::{self, BuildNode, BvhNode, BvhStats, NodeLayout};
use super::{intersect_triangle, Aabb};
use crate::math::Vec3;
use crate::scene::{GeometryId, MeshGeometry};

/// Per-triangle build inputs, kept until compaction.
#[derive(Debug, Clone)]
struct BuildScratch {
    bounds: Vec<Aabb>,
    centroids: Vec<Vec3>,
}

#[derive(Debug, Clone)]
enum Nodes {
    Built(Vec<BuildNode>),
    Compact(Vec<BvhNode>),
}

/// Bottom-level structure over one geometry's triangles.
#[derive(Debug, Clone)]
pub struct Blas {
    geometry: GeometryId,
    nodes: Nodes,
    /// Leaf slot → original triangle index.
    tri_indices: Vec<u32>,
    /// Triangle vertices. Original order before compaction, leaf order after.
    triangles: Vec<[Vec3; 3]>,
    scratch: Option<BuildScratch>,
}

/// Byte counts of the structure's storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub nodes: usize,
    pub indices: usize,
    pub triangles: usize,
    pub scratch: usize,
}

impl Footprint {
    pub fn total(&self) -> usize {
        self.nodes + self.indices + self.triangles + self.scratch
    }
}

/// Builds a binned-SAH BVH over the geometry's triangles.
pub fn build_blas(geometry_id: GeometryId, geometry: &MeshGeometry) -> Blas {
    let triangles: Vec<[Vec3; 3]> = (0..geometry.triangles.len()).map(|t| geometry.triangle_positions(t)).collect();
    let bounds: Vec<Aabb> = triangles.iter().map(|t| Aabb::from_points(t)).collect();
    let centroids: Vec<Vec3> = bounds.iter().map(Aabb::centroid).collect();
    let built = bvh::build(&bounds, &centroids);
    Blas {
        geometry: geometry_id,
        nodes: Nodes::Built(built.nodes),
        tri_indices: built.order,
        triangles,
        scratch: Some(BuildScratch { bounds, centroids }),
    }
}

/// Depth-first re-layout with scratch discarded; a no-op on compacted input.
pub fn compact_blas(b: Blas) -> Blas {
    let Nodes::Built(nodes) = &b.nodes else {
        return b;
    };
    let compact = bvh::flatten_depth_first(nodes);
    let triangles = b.tri_indices.iter().map(|&t| b.triangles[t as usize]).collect();
    Blas { geometry: b.geometry, nodes: Nodes::Compact(compact), tri_indices: b.tri_indices, triangles, scratch: None }
}

impl Blas {
    pub fn geometry(&self) -> GeometryId {
        self.geometry
    }

    pub fn is_compacted(&self) -> bool {
        matches!(self.nodes, Nodes::Compact(_))
    }

    pub fn node_count(&self) -> usize {
        match &self.nodes {
            Nodes::Built(n) => n.len(),
            Nodes::Compact(n) => n.len(),
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn root_bounds(&self) -> Aabb {
        if self.node_count() == 0 {
            return Aabb::EMPTY;
        }
        self.with_layout(|l| *l.bounds(0))
    }

    /// Original triangle indices in each leaf, in node order.
    pub fn leaves(&self) -> Vec<Vec<u32>> {
        self.with_layout(|l| {
            (0..l.len()).filter_map(|i| l.kind(i).ok()).map(|(first, count)| self.tri_indices[first..first + count].to_vec()).collect()
        })
    }

    pub fn leaf_bounds(&self) -> Vec<Aabb> {
        self.with_layout(|l| (0..l.len()).filter(|&i| l.kind(i).is_ok()).map(|i| *l.bounds(i)).collect())
    }

    pub fn stats(&self) -> BvhStats {
        self.with_layout(|l| bvh::stats(l))
    }

    /// Text summary of the topology (node count, depth, SAH cost).
    pub fn dump(&self) -> String {
        format!("blas geometry {} compacted {}\n{}", self.geometry.0, self.is_compacted(), self.stats().dump())
    }

    pub fn footprint(&self) -> Footprint {
        let nodes = match &self.nodes {
            Nodes::Built(n) => n.len() * size_of::<BuildNode>(),
            Nodes::Compact(n) => n.len() * size_of::<BvhNode>(),
        };
        let scratch =
            self.scratch.as_ref().map(|s| s.bounds.len() * size_of::<Aabb>() + s.centroids.len() * size_of::<Vec3>()).unwrap_or(0);
        Footprint {
            nodes,
            indices: self.tri_indices.len() * size_of::<u32>(),
            triangles: self.triangles.len() * size_of::<[Vec3; 3]>(),
            scratch,
        }
    }

    /// Exhaustive containment check over every node.
    pub fn check_containment(&self) -> Result<(), String> {
        self.with_layout(|l| bvh::check_containment(l, |slot| Aabb::from_points(self.slot_triangle(slot))))
    }

    /// Triangle vertices indexed by the geometry's own triangle order.
    pub fn original_triangles(&self) -> Vec<[Vec3; 3]> {
        if !self.is_compacted() {
            return self.triangles.clone();
        }
        let mut out = vec![[Vec3::ZERO; 3]; self.triangles.len()];
        for (slot, &t) in self.tri_indices.iter().enumerate() {
            out[t as usize] = self.triangles[slot];
        }
        out
    }

    fn slot_triangle(&self, slot: usize) -> &[Vec3; 3] {
        if self.is_compacted() {
            &self.triangles[slot]
        } else {
            &self.triangles[self.tri_indices[slot] as usize]
        }
    }

    fn with_layout<R>(&self, f: impl FnOnce(&dyn NodeLayout) -> R) -> R {
        match &self.nodes {
            Nodes::Built(n) => f(n),
            Nodes::Compact(n) => f(n),
        }
    }

    /// Closest triangle along `origin + t·dir` in `[t_min, t_max]`, as
    /// `(t, triangle, u, v)`. Ties at equal `t` go to the lower triangle index.
    pub fn closest_hit(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<(f64, u32, f64, f64)> {
        match &self.nodes {
            Nodes::Built(n) => self.closest_in(n, origin, dir, t_min, t_max),
            Nodes::Compact(n) => self.closest_in(n, origin, dir, t_min, t_max),
        }
    }

    pub fn any_hit(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> bool {
        match &self.nodes {
            Nodes::Built(n) => self.any_in(n, origin, dir, t_min, t_max),
            Nodes::Compact(n) => self.any_in(n, origin, dir, t_min, t_max),
        }
    }

    fn closest_in<L: NodeLayout + ?Sized>(
        &self,
        nodes: &L,
        origin: Vec3,
        dir: Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<(f64, u32, f64, f64)> {
        if nodes.len() == 0 {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, u32, f64, f64)> = None;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        if let Some(t) = nodes.bounds(0).hit(origin, inv, t_min, t_max) {
            stack.push((0, t));
        }
        while let Some((i, entry)) = stack.pop() {
            let limit = best.map_or(t_max, |b| b.0);
            // Equal distances must still be visited for the index tie-break.
            if entry > limit {
                continue;
            }
            match nodes.kind(i) {
                Ok((first, count)) => {
                    for slot in first..first + count {
                        let tri = self.slot_triangle(slot);
                        if let Some((t, u, v)) = intersect_triangle(origin, dir, tri, t_min, limit) {
                            let id = self.tri_indices[slot];
                            let better = match best {
                                None => true,
                                Some((bt, bid, _, _)) => t < bt || (t == bt && id < bid),
                            };
                            if better {
                                best = Some((t, id, u, v));
                            }
                        }
                    }
                }
                Err((l, r)) => {
                    let limit = best.map_or(t_max, |b| b.0);
                    let hl = nodes.bounds(l).hit(origin, inv, t_min, limit);
                    let hr = nodes.bounds(r).hit(origin, inv, t_min, limit);
                    match (hl, hr) {
                        (Some(a), Some(b)) => {
                            // Push the farther child first so the nearer one is popped next.
                            if a <= b {
                                stack.push((r, b));
                                stack.push((l, a));
                            } else {
                                stack.push((l, a));
                                stack.push((r, b));
                            }
                        }
                        (Some(a), None) => stack.push((l, a)),
                        (None, Some(b)) => stack.push((r, b)),
                        (None, None) => {}
                    }
                }
            }
        }
        best
    }

    fn any_in<L: NodeLayout + ?Sized>(&self, nodes: &L, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> bool {
        if nodes.len() == 0 {
            return false;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            if nodes.bounds(i).hit(origin, inv, t_min, t_max).is_none() {
                continue;
            }
            match nodes.kind(i) {
                Ok((first, count)) => {
                    if (first..first + count).any(|s| intersect_triangle(origin, dir, self.slot_triangle(s), t_min, t_max).is_some()) {
                        return true;
                    }
                }
                Err((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        false
    }

    /// Stable byte encoding of the structure, used for determinism checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.geometry.0.to_le_bytes());
        out.push(self.is_compacted() as u8);
        self.with_layout(|l| {
            for i in 0..l.len() {
                push_aabb(&mut out, l.bounds(i));
                let (a, b) = match l.kind(i) {
                    Ok((f, c)) => (f as u32, c as u32),
                    Err((x, y)) => (x as u32, (y as u32) | 0x8000_0000),
                };
                out.extend_from_slice(&a.to_le_bytes());
                out.extend_from_slice(&b.to_le_bytes());
            }
        });
        for t in &self.tri_indices {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out
    }
}

pub(crate) fn push_aabb(out: &mut Vec<u8>, b: &Aabb) {
    for v in [b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z] {
        out.extend_from_slice(&v.to_le_bytes());
    }
}
