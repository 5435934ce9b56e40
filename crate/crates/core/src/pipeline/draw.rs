use crate::math::Mat4;
use crate::scene::{GeometryId, MaterialId, NodeId, Scene, Vertex, WorldTransforms};

/// One mesh instance ready for submission.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawCommand {
    pub material: MaterialId,
    /// Vertex-arena segment holding the geometry.
    pub segment: u32,
    pub node: NodeId,
    pub node_name: String,
    pub geometry: GeometryId,
    pub transform: Mat4,
}

impl DrawCommand {
    pub fn sort_key(&self) -> (u32, u32) {
        (self.material.0, self.segment)
    }
}

/// One command per mesh-bearing node, ordered by (material, segment), then node name.
pub fn build_draw_list(scene: &Scene, world: &WorldTransforms) -> Vec<DrawCommand> {
    let mut draws: Vec<DrawCommand> = scene
        .mesh_nodes()
        .map(|(id, node, m)| DrawCommand {
            material: m.material,
            segment: m.geometry.0,
            node: id,
            node_name: node.name.clone(),
            geometry: m.geometry,
            transform: world.get(id),
        })
        .collect();
    draws.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then_with(|| a.node_name.cmp(&b.node_name)));
    draws
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArenaSegment {
    pub base: u32,
    pub count: u32,
}

/// Every geometry's vertices in one array; segment `g` belongs to geometry `g`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexArena {
    pub vertices: Vec<Vertex>,
    pub segments: Vec<ArenaSegment>,
}

pub fn pack_vertex_arena(scene: &Scene) -> VertexArena {
    let total = scene.geometries.iter().map(|g| g.vertices.len()).sum();
    let mut arena = VertexArena { vertices: Vec::with_capacity(total), segments: Vec::with_capacity(scene.geometries.len()) };
    for g in &scene.geometries {
        arena.segments.push(ArenaSegment { base: arena.vertices.len() as u32, count: g.vertices.len() as u32 });
        arena.vertices.extend_from_slice(&g.vertices);
    }
    arena
}

/// Where the main pass pulls vertex attributes from.
pub trait VertexFetch: Sync {
    fn vertices(&self, geometry: GeometryId) -> &[Vertex];
}

impl VertexFetch for VertexArena {
    fn vertices(&self, geometry: GeometryId) -> &[Vertex] {
        let s = self.segments[geometry.0 as usize];
        &self.vertices[s.base as usize..(s.base + s.count) as usize]
    }
}

/// Per-geometry arrays, bypassing the arena.
impl VertexFetch for Scene {
    fn vertices(&self, geometry: GeometryId) -> &[Vertex] {
        &self.geometries[geometry.0 as usize].vertices
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::scene::{presets, MeshInstance};

    #[test]
    fn arena_offsets() {
        let mut s = Scene::new();
        let tri = presets::facing_triangle(1.0);
        let mut six = tri.clone();
        six.vertices.extend(tri.vertices.clone());
        six.triangles.push([3, 4, 5]);
        s.add_geometry(tri);
        s.add_geometry(six);
        let a = pack_vertex_arena(&s);
        assert_eq!(a.segments, vec![ArenaSegment { base: 0, count: 3 }, ArenaSegment { base: 3, count: 6 }]);
        assert_eq!(a.vertices.len(), 9);
        assert_eq!(a.vertices(GeometryId(1)), &s.geometries[1].vertices[..]);
    }

    #[test]
    fn empty_scene_has_empty_arena() {
        assert_eq!(pack_vertex_arena(&Scene::new()), VertexArena::default());
    }

    #[test]
    fn sorted_by_material() {
        let mut s = Scene::new();
        let g = s.add_geometry(presets::facing_triangle(1.0));
        let _m0 = s.add_material(Vec3::ONE, 0.0, 1.0);
        let a = s.add_material(Vec3::ONE, 0.0, 1.0);
        let b = s.add_material(Vec3::ONE, 0.0, 1.0);
        for (name, m) in [("n0", b), ("n1", a), ("n2", b)] {
            s.add_node(name, None, Mat4::IDENTITY, Some(MeshInstance { geometry: g, material: m }));
        }
        let world = s.compute_world_transforms().unwrap();
        let d = build_draw_list(&s, &world);
        let order: Vec<(&str, u32)> = d.iter().map(|c| (c.node_name.as_str(), c.material.0)).collect();
        assert_eq!(order, vec![("n1", 1), ("n0", 2), ("n2", 2)]);
    }
}
