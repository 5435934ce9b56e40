//! Scene graph: a node hierarchy pointing into global, type-specific
//! containers of geometries, materials, lights and cameras.

mod gltf;
pub mod presets;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::TransformSnapshot;
use crate::math::{Mat4, Rgb, Vec3};

pub use self::gltf::{export_gltf, load_gltf, parse_gltf_subset, parse_gltf_with_base};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed glTF JSON at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported glTF feature: {0}")]
    Unsupported(String),
    #[error("invalid scene at {node}: {message}")]
    Validation { node: String, message: String },
    #[error("node hierarchy contains a cycle through {0}")]
    Cycle(String),
    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SceneError {
    pub(crate) fn validation(node: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::Validation { node: node.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeometryId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MaterialId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub position: Vec3,
    pub normal: Vec3,
    pub uv: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshGeometry {
    pub vertices: Vec<Vertex>,
    pub triangles: Vec<[u32; 3]>,
}

impl MeshGeometry {
    /// Checks index bounds and the non-empty triangle list.
    pub fn validate(&self, owner: &str) -> Result<(), SceneError> {
        if self.triangles.is_empty() {
            return Err(SceneError::validation(owner, "geometry has no triangles"));
        }
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(SceneError::validation(owner, format!("triangle {t:?} indexes past {n} vertices")));
        }
        Ok(())
    }

    pub fn triangle_positions(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [self.vertices[a as usize].position, self.vertices[b as usize].position, self.vertices[c as usize].position]
    }

    /// Replaces every vertex normal with the area-weighted average of its face normals.
    pub fn generate_normals(&mut self) {
        let mut acc = vec![Vec3::ZERO; self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i as usize].position);
            // Unnormalised cross product carries twice the face area.
            let n = (b - a).cross(c - a);
            for &i in t {
                acc[i as usize] += n;
            }
        }
        for (v, n) in self.vertices.iter_mut().zip(acc) {
            v.normal = fallback_normal(n);
        }
    }

    pub fn renormalize(&mut self) {
        for v in &mut self.vertices {
            v.normal = fallback_normal(v.normal);
        }
    }
}

fn fallback_normal(n: Vec3) -> Vec3 {
    let len = n.length();
    if len > 1e-12 && len.is_finite() {
        n / len
    } else {
        Vec3::Z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialPbr {
    pub base_color: Rgb,
    pub metallic: f64,
    pub roughness: f64,
    pub material_id: MaterialId,
}

impl MaterialPbr {
    pub fn new(id: u32, base_color: Rgb, metallic: f64, roughness: f64) -> Self {
        MaterialPbr {
            base_color: base_color.clamp(0.0, 1.0),
            metallic: metallic.clamp(0.0, 1.0),
            roughness: roughness.clamp(0.0, 1.0),
            material_id: MaterialId(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLight {
    /// World-space position; tracks `node` when the light is attached to one.
    pub position: Vec3,
    pub intensity: Rgb,
    pub node: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub node: NodeId,
    pub vertical_fov: f64,
    pub near: f64,
    pub far: f64,
}

impl Camera {
    pub fn projection(&self, aspect: f64) -> Mat4 {
        Mat4::perspective(self.vertical_fov, aspect, self.near, self.far)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshInstance {
    pub geometry: GeometryId,
    pub material: MaterialId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub name: String,
    pub parent: Option<NodeId>,
    pub local: Mat4,
    pub mesh_instance: Option<MeshInstance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub geometries: Vec<MeshGeometry>,
    pub materials: Vec<MaterialPbr>,
    pub lights: Vec<PointLight>,
    pub cameras: Vec<Camera>,
    pub nodes: Vec<SceneNode>,
    pub clear_color: Rgb,
    /// World matrices written by external pose updates. They replace the
    /// composed `parent · local` for that node; descendants compose from them.
    #[serde(default)]
    pub world_overrides: BTreeMap<NodeId, Mat4>,
}

impl Default for Scene {
    fn default() -> Self {
        Scene::new()
    }
}

/// World matrix per node, indexed by `NodeId`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTransforms {
    pub by_node: Vec<Mat4>,
}

impl WorldTransforms {
    pub fn get(&self, id: NodeId) -> Mat4 {
        self.by_node[id.0 as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ApplyReport {
    pub matched: usize,
    pub unmatched: usize,
}

impl Scene {
    pub fn new() -> Self {
        Scene {
            geometries: Vec::new(),
            materials: Vec::new(),
            lights: Vec::new(),
            cameras: Vec::new(),
            nodes: Vec::new(),
            clear_color: Vec3::ZERO,
            world_overrides: BTreeMap::new(),
        }
    }

    pub fn add_geometry(&mut self, mut geometry: MeshGeometry) -> GeometryId {
        geometry.renormalize();
        self.geometries.push(geometry);
        GeometryId(self.geometries.len() as u32 - 1)
    }

    pub fn add_material(&mut self, base_color: Rgb, metallic: f64, roughness: f64) -> MaterialId {
        let id = self.materials.len() as u32;
        self.materials.push(MaterialPbr::new(id, base_color, metallic, roughness));
        MaterialId(id)
    }

    pub fn add_node(
        &mut self,
        name: impl Into<String>,
        parent: Option<NodeId>,
        local: Mat4,
        mesh_instance: Option<MeshInstance>,
    ) -> NodeId {
        self.nodes.push(SceneNode { name: name.into(), parent, local, mesh_instance });
        NodeId(self.nodes.len() as u32 - 1)
    }

    pub fn add_camera(&mut self, name: impl Into<String>, world: Mat4, vertical_fov: f64, near: f64, far: f64) -> NodeId {
        let node = self.add_node(name, None, world, None);
        self.cameras.push(Camera { node, vertical_fov, near, far });
        node
    }

    pub fn add_point_light(&mut self, position: Vec3, intensity: Rgb) {
        self.lights.push(PointLight { position, intensity: intensity.max(Vec3::ZERO), node: None });
    }

    pub fn node(&self, id: NodeId) -> &SceneNode {
        &self.nodes[id.0 as usize]
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(|i| NodeId(i as u32))
    }

    pub fn find_camera(&self, name: &str) -> Option<&Camera> {
        let node = self.find_node(name)?;
        self.cameras.iter().find(|c| c.node == node)
    }

    pub fn mesh_nodes(&self) -> impl Iterator<Item = (NodeId, &SceneNode, MeshInstance)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.mesh_instance.map(|m| (NodeId(i as u32), n, m)))
    }

    pub fn instance_count(&self) -> usize {
        self.mesh_nodes().count()
    }

    /// Triangles summed over mesh instances (instanced geometry counts once per instance).
    pub fn triangle_count(&self) -> usize {
        self.mesh_nodes().map(|(_, _, m)| self.geometries[m.geometry.0 as usize].triangles.len()).sum()
    }

    /// Structural checks: unique names, resolvable references, valid geometry.
    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if seen.insert(node.name.as_str(), i).is_some() {
                return Err(SceneError::validation(&node.name, "duplicate node name"));
            }
            if let Some(p) = node.parent {
                if p.0 as usize >= self.nodes.len() {
                    return Err(SceneError::validation(&node.name, format!("parent {} does not exist", p.0)));
                }
            }
            if let Some(m) = node.mesh_instance {
                if m.geometry.0 as usize >= self.geometries.len() {
                    return Err(SceneError::validation(&node.name, format!("geometry {} does not exist", m.geometry.0)));
                }
                if m.material.0 as usize >= self.materials.len() {
                    return Err(SceneError::validation(&node.name, format!("material {} does not exist", m.material.0)));
                }
            }
        }
        for (i, g) in self.geometries.iter().enumerate() {
            g.validate(&format!("geometry {i}"))?;
        }
        for c in &self.cameras {
            let name = self.nodes.get(c.node.0 as usize).map(|n| n.name.clone()).unwrap_or_else(|| format!("camera node {}", c.node.0));
            if c.node.0 as usize >= self.nodes.len() {
                return Err(SceneError::validation(name, "camera node does not exist"));
            }
            if !(c.near > 0.0 && c.far > c.near) {
                return Err(SceneError::validation(name, "camera requires 0 < near < far"));
            }
            if !(c.vertical_fov > 0.0 && c.vertical_fov < std::f64::consts::PI) {
                return Err(SceneError::validation(name, "camera fov outside (0, pi)"));
            }
        }
        self.compute_world_transforms().map(|_| ())
    }

    /// `world(n) = world(parent(n)) · local(n)`, with pose overrides taking the
    /// place of the composed matrix for overridden nodes.
    pub fn compute_world_transforms(&self) -> Result<WorldTransforms, SceneError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Unvisited,
            InProgress,
            Done,
        }
        let n = self.nodes.len();
        let mut marks = vec![Mark::Unvisited; n];
        let mut world = vec![Mat4::IDENTITY; n];
        let mut stack = Vec::new();
        for start in 0..n {
            if marks[start] == Mark::Done {
                continue;
            }
            // Walk up to the first resolved ancestor, then resolve top-down.
            stack.clear();
            let mut cur = Some(start);
            while let Some(i) = cur {
                match marks[i] {
                    Mark::Done => break,
                    Mark::InProgress => return Err(SceneError::Cycle(self.nodes[i].name.clone())),
                    Mark::Unvisited => {
                        marks[i] = Mark::InProgress;
                        stack.push(i);
                        cur = self.nodes[i].parent.map(|p| p.0 as usize);
                    }
                }
            }
            while let Some(i) = stack.pop() {
                let node = &self.nodes[i];
                world[i] = match self.world_overrides.get(&NodeId(i as u32)) {
                    Some(m) => *m,
                    None => match node.parent {
                        Some(p) => world[p.0 as usize] * node.local,
                        None => node.local,
                    },
                };
                marks[i] = Mark::Done;
            }
        }
        Ok(WorldTransforms { by_node: world })
    }

    pub fn world_transform_map(&self) -> Result<BTreeMap<String, Mat4>, SceneError> {
        let w = self.compute_world_transforms()?;
        Ok(self.nodes.iter().zip(w.by_node).map(|(n, m)| (n.name.clone(), m)).collect())
    }

    /// Overwrites world matrices of nodes named in the snapshot.
    pub fn apply_transform_table(&mut self, snapshot: &TransformSnapshot) -> ApplyReport {
        let index: HashMap<&str, NodeId> = self.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), NodeId(i as u32))).collect();
        let mut report = ApplyReport::default();
        let mut updates = Vec::new();
        for (name, m) in &snapshot.transforms {
            match index.get(name.as_str()) {
                Some(&id) => {
                    updates.push((id, *m));
                    report.matched += 1;
                }
                None => report.unmatched += 1,
            }
        }
        self.world_overrides.extend(updates);
        report
    }

    /// World-space positions of the lights under the given transforms.
    pub fn light_positions(&self, world: &WorldTransforms) -> Vec<Vec3> {
        self.lights
            .iter()
            .map(|l| match l.node {
                Some(n) => world.get(n).transform_point(Vec3::ZERO),
                None => l.position,
            })
            .collect()
    }

    /// Axis-aligned bounds of all mesh instances in world space.
    pub fn world_bounds(&self, world: &WorldTransforms) -> Option<(Vec3, Vec3)> {
        let mut bounds: Option<(Vec3, Vec3)> = None;
        for (id, _, m) in self.mesh_nodes() {
            let w = world.get(id);
            for v in &self.geometries[m.geometry.0 as usize].vertices {
                let p = w.transform_point(v.position);
                bounds = Some(match bounds {
                    Some((lo, hi)) => (lo.min(p), hi.max(p)),
                    None => (p, p),
                });
            }
        }
        bounds
    }

    /// Clones every mesh-bearing node `2^doublings - 1` times, each clone a new
    /// root instance of the same geometry shifted along a fixed X/Z grid whose
    /// spacing is a small fraction of the scene extent, so clones stay in view.
    pub fn duplicate_geometry(&self, doublings: u32) -> Result<Scene, SceneError> {
        let mut out = self.clone();
        if doublings == 0 {
            return Ok(out);
        }
        let world = self.compute_world_transforms()?;
        let (lo, hi) = self.world_bounds(&world).unwrap_or((Vec3::ZERO, Vec3::ZERO));
        let extent = hi - lo;
        let step_x = extent.x.max(1.0) * CLONE_STEP;
        let step_z = extent.z.max(1.0) * CLONE_STEP;
        let copies = (1usize << doublings) - 1;
        let originals: Vec<(NodeId, MeshInstance)> = self.mesh_nodes().map(|(id, _, m)| (id, m)).collect();
        for clone in 1..=copies {
            let offset = Vec3::new((clone % CLONE_GRID_WIDTH) as f64 * step_x, 0.0, -((clone / CLONE_GRID_WIDTH) as f64) * step_z);
            let shift = Mat4::translation(offset);
            for &(id, m) in &originals {
                let name = format!("{}~{clone}", self.node(id).name);
                out.add_node(name, None, shift * world.get(id), Some(m));
            }
        }
        Ok(out)
    }

    pub fn to_debug_dump(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialises")
    }

    pub fn from_debug_dump(text: &str) -> Result<Scene, SceneError> {
        serde_json::from_str(text)
            .map_err(|e| SceneError::Parse { offset: gltf::byte_offset(text.as_bytes(), e.line(), e.column()), message: e.to_string() })
    }
}

const CLONE_GRID_WIDTH: usize = 8;
const CLONE_STEP: f64 = 1.0 / 64.0;
