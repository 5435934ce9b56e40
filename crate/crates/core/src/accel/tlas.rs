use std::sync::Arc;

use super::bvh::{self, BvhNode, BvhStats, NodeLayout};
use super::{Aabb, Blas, Hit, Ray, SHADOW_ORIGIN_OFFSET, SHADOW_T_EPSILON};
use crate::math::{Mat4, Vec3};
use crate::scene::{Scene, SceneError, WorldTransforms};

/// One placement of a bottom-level structure in the world.
#[derive(Debug, Clone)]
pub struct TlasInstance {
    pub blas: Arc<Blas>,
    /// Object to world.
    pub transform: Mat4,
    pub inverse: Mat4,
    pub node_name: String,
    pub instance_id: u32,
}

impl TlasInstance {
    /// `None` when `transform` is singular.
    pub fn new(blas: Arc<Blas>, transform: Mat4, node_name: impl Into<String>, instance_id: u32) -> Option<Self> {
        let inverse = transform.inverse()?;
        Some(TlasInstance { blas, transform, inverse, node_name: node_name.into(), instance_id })
    }

    /// World box from the eight transformed corners of the object-space root box.
    pub fn world_bounds(&self) -> Aabb {
        let root = self.blas.root_bounds();
        if root.is_empty() {
            return Aabb::EMPTY;
        }
        Aabb::from_points(&root.corners().map(|c| self.transform.transform_point(c)))
    }
}

/// Top-level structure, rebuilt from scratch for every frame.
#[derive(Debug, Clone)]
pub struct Tlas {
    nodes: Vec<BvhNode>,
    /// Leaf slot → index into `instances`.
    order: Vec<u32>,
    instances: Vec<TlasInstance>,
    frame: u64,
}

pub fn build_tlas(instances: Vec<TlasInstance>, frame: u64) -> Tlas {
    let bounds: Vec<Aabb> = instances.iter().map(TlasInstance::world_bounds).collect();
    let centroids: Vec<Vec3> = bounds.iter().map(Aabb::centroid).collect();
    let built = bvh::build(&bounds, &centroids);
    Tlas { nodes: bvh::flatten_depth_first(&built.nodes), order: built.order, instances, frame }
}

/// One instance per mesh-bearing node, in node order. `blases` is indexed by geometry id.
pub fn instances_for_scene(scene: &Scene, world: &WorldTransforms, blases: &[Arc<Blas>]) -> Result<Vec<TlasInstance>, SceneError> {
    scene
        .mesh_nodes()
        .enumerate()
        .map(|(i, (id, node, m))| {
            let blas = blases
                .get(m.geometry.0 as usize)
                .cloned()
                .ok_or_else(|| SceneError::validation(&node.name, format!("no acceleration structure for geometry {}", m.geometry.0)))?;
            TlasInstance::new(blas, world.get(id), &node.name, i as u32)
                .ok_or_else(|| SceneError::validation(&node.name, "world transform is not invertible"))
        })
        .collect()
}

impl Tlas {
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn instances(&self) -> &[TlasInstance] {
        &self.instances
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_bounds(&self) -> Aabb {
        self.nodes.first().map_or(Aabb::EMPTY, |n| n.bounds)
    }

    pub fn stats(&self) -> BvhStats {
        bvh::stats(&self.nodes)
    }

    pub fn dump(&self) -> String {
        format!("tlas frame {} instances {}\n{}", self.frame, self.instances.len(), self.stats().dump())
    }

    pub fn check_containment(&self) -> Result<(), String> {
        bvh::check_containment(&self.nodes, |slot| self.instances[self.order[slot] as usize].world_bounds())
    }

    /// Ids of instances whose world box contains `p`.
    pub fn point_query(&self, p: Vec3) -> Vec<u32> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if !self.nodes.bounds(i).contains_point(p) {
                continue;
            }
            match self.nodes.kind(i) {
                Ok((first, count)) => {
                    for slot in first..first + count {
                        let inst = &self.instances[self.order[slot] as usize];
                        if inst.world_bounds().contains_point(p) {
                            out.push(inst.instance_id);
                        }
                    }
                }
                Err((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.frame.to_le_bytes());
        for n in &self.nodes {
            super::blas::push_aabb(&mut out, &n.bounds);
            out.extend_from_slice(&n.offset.to_le_bytes());
            out.extend_from_slice(&n.count.to_le_bytes());
        }
        for o in &self.order {
            out.extend_from_slice(&o.to_le_bytes());
        }
        for inst in &self.instances {
            out.extend_from_slice(&inst.instance_id.to_le_bytes());
            out.extend_from_slice(&inst.blas.geometry().0.to_le_bytes());
            for v in inst.transform.m {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

pub fn ray_closest_hit(tlas: &Tlas, ray: &Ray) -> Option<Hit> {
    let nodes = &tlas.nodes;
    if nodes.is_empty() {
        return None;
    }
    let (o, d) = (ray.origin, ray.direction);
    let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
    let mut best: Option<Hit> = None;
    let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
    if let Some(t) = nodes[0].bounds.hit(o, inv, ray.t_min, ray.t_max) {
        stack.push((0, t));
    }
    while let Some((i, entry)) = stack.pop() {
        let limit = best.map_or(ray.t_max, |b| b.t);
        if entry > limit {
            continue;
        }
        match nodes.kind(i) {
            Ok((first, count)) => {
                for slot in first..first + count {
                    let inst = &tlas.instances[tlas.order[slot] as usize];
                    let limit = best.map_or(ray.t_max, |b| b.t);
                    // Affine inverse keeps the parameterisation, so t stays a world distance.
                    let lo = inst.inverse.transform_point(o);
                    let ld = inst.inverse.transform_vector(d);
                    if let Some((t, triangle, u, v)) = inst.blas.closest_hit(lo, ld, ray.t_min, limit) {
                        let hit = Hit { t, instance: inst.instance_id, triangle, u, v };
                        if best.is_none_or(|b| hit.precedes(&b)) {
                            best = Some(hit);
                        }
                    }
                }
            }
            Err((l, r)) => {
                let hl = nodes[l].bounds.hit(o, inv, ray.t_min, limit);
                let hr = nodes[r].bounds.hit(o, inv, ray.t_min, limit);
                match (hl, hr) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push((r, b));
                        stack.push((l, a));
                    }
                    (Some(a), Some(b)) => {
                        stack.push((l, a));
                        stack.push((r, b));
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

/// True when anything lies within `[t_min, t_max]`; stops at the first hit.
pub fn ray_any_hit(tlas: &Tlas, ray: &Ray) -> bool {
    let nodes = &tlas.nodes;
    if nodes.is_empty() {
        return false;
    }
    let (o, d) = (ray.origin, ray.direction);
    let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        if nodes[i].bounds.hit(o, inv, ray.t_min, ray.t_max).is_none() {
            continue;
        }
        match nodes.kind(i) {
            Ok((first, count)) => {
                for slot in first..first + count {
                    let inst = &tlas.instances[tlas.order[slot] as usize];
                    let lo = inst.inverse.transform_point(o);
                    let ld = inst.inverse.transform_vector(d);
                    if inst.blas.any_hit(lo, ld, ray.t_min, ray.t_max) {
                        return true;
                    }
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

/// 1.0 when `light_pos` is visible from the offset surface point, else 0.0.
pub fn shadow_visibility(tlas: &Tlas, point: Vec3, normal: Vec3, light_pos: Vec3) -> f64 {
    let origin = point + normal * SHADOW_ORIGIN_OFFSET;
    let to_light = light_pos - origin;
    let distance = to_light.length();
    let t_max = distance - SHADOW_T_EPSILON;
    let Ok(ray) = Ray::new(origin, to_light, SHADOW_T_EPSILON, t_max) else {
        return 1.0;
    };
    if ray_any_hit(tlas, &ray) {
        0.0
    } else {
        1.0
    }
}
