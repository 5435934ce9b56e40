//! glTF 2.0 subset reader and writer.
//!
//! Supported: nodes (matrix or TRS), triangle meshes with float32
//! POSITION/NORMAL/TEXCOORD_0 and uint16/uint32 indices, factor-only
//! metallic-roughness materials, perspective cameras and point lights from
//! `KHR_lights_punctual`. Buffers are embedded data URIs or sidecar files.
//! Anything else that changes how the asset renders is rejected.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    Camera, GeometryId, MaterialId, MaterialPbr, MeshGeometry, MeshInstance, NodeId, PointLight, Scene, SceneError, SceneNode, Vertex,
};
use crate::math::{Mat4, Vec3};

const LIGHTS_EXT: &str = "KHR_lights_punctual";
const FLOAT: u32 = 5126;
const UNSIGNED_SHORT: u32 = 5123;
const UNSIGNED_INT: u32 = 5125;
const TRIANGLES: u32 = 4;

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Root {
    asset: Asset,
    #[serde(default)]
    nodes: Vec<GNode>,
    #[serde(default)]
    meshes: Vec<GMesh>,
    #[serde(default)]
    accessors: Vec<GAccessor>,
    #[serde(default)]
    buffer_views: Vec<GBufferView>,
    #[serde(default)]
    buffers: Vec<GBuffer>,
    #[serde(default)]
    materials: Vec<GMaterial>,
    #[serde(default)]
    cameras: Vec<GCamera>,
    #[serde(default)]
    skins: Vec<Value>,
    #[serde(default)]
    animations: Vec<Value>,
    #[serde(default)]
    textures: Vec<Value>,
    #[serde(default)]
    images: Vec<Value>,
    #[serde(default)]
    extensions_required: Vec<String>,
    #[serde(default)]
    extensions: Option<RootExtensions>,
    #[serde(default)]
    extras: Option<Value>,
}

#[derive(Deserialize)]
struct Asset {
    version: String,
}

#[derive(Deserialize)]
struct RootExtensions {
    #[serde(rename = "KHR_lights_punctual")]
    lights: Option<LightsExt>,
}

#[derive(Deserialize)]
struct LightsExt {
    #[serde(default)]
    lights: Vec<GLight>,
}

#[derive(Deserialize)]
struct GLight {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default = "one3")]
    color: [f64; 3],
    #[serde(default = "one")]
    intensity: f64,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase")]
struct GNode {
    name: Option<String>,
    #[serde(default)]
    children: Vec<usize>,
    matrix: Option<[f64; 16]>,
    translation: Option<[f64; 3]>,
    rotation: Option<[f64; 4]>,
    scale: Option<[f64; 3]>,
    mesh: Option<usize>,
    camera: Option<usize>,
    skin: Option<usize>,
    weights: Option<Vec<f64>>,
    extensions: Option<NodeExtensions>,
}

#[derive(Deserialize, Default)]
struct NodeExtensions {
    #[serde(rename = "KHR_lights_punctual")]
    light: Option<NodeLight>,
}

#[derive(Deserialize, Default)]
struct NodeLight {
    light: usize,
}

#[derive(Deserialize)]
struct GMesh {
    primitives: Vec<GPrimitive>,
}

#[derive(Deserialize)]
struct GPrimitive {
    attributes: BTreeMap<String, usize>,
    indices: Option<usize>,
    material: Option<usize>,
    mode: Option<u32>,
    targets: Option<Vec<Value>>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GAccessor {
    buffer_view: Option<usize>,
    #[serde(default)]
    byte_offset: usize,
    component_type: u32,
    count: usize,
    #[serde(rename = "type")]
    kind: String,
    sparse: Option<Value>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GBufferView {
    buffer: usize,
    #[serde(default)]
    byte_offset: usize,
    byte_length: usize,
    byte_stride: Option<usize>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GBuffer {
    uri: Option<String>,
    byte_length: usize,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GMaterial {
    pbr_metallic_roughness: Option<GPbr>,
    normal_texture: Option<Value>,
    occlusion_texture: Option<Value>,
    emissive_texture: Option<Value>,
    alpha_mode: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GPbr {
    #[serde(default = "one4")]
    base_color_factor: [f64; 4],
    #[serde(default = "one")]
    metallic_factor: f64,
    #[serde(default = "one")]
    roughness_factor: f64,
    base_color_texture: Option<Value>,
    metallic_roughness_texture: Option<Value>,
}

#[derive(Deserialize)]
struct GCamera {
    #[serde(rename = "type")]
    kind: String,
    perspective: Option<GPerspective>,
}

#[derive(Deserialize)]
struct GPerspective {
    yfov: f64,
    znear: f64,
    zfar: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn one3() -> [f64; 3] {
    [1.0; 3]
}
fn one4() -> [f64; 4] {
    [1.0; 4]
}

/// Far plane used for cameras that declare an infinite projection.
const INFINITE_FAR_RATIO: f64 = 1.0e5;

/// Parses a glTF JSON document whose buffers are all embedded data URIs.
pub fn parse_gltf_subset(bytes: &[u8]) -> Result<Scene, SceneError> {
    parse_gltf_with_base(bytes, None)
}

/// Reads a `.gltf` file, resolving sidecar buffers next to it.
pub fn load_gltf(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
    parse_gltf_with_base(&bytes, path.parent())
}

pub fn parse_gltf_with_base(bytes: &[u8], base_dir: Option<&Path>) -> Result<Scene, SceneError> {
    if bytes.starts_with(b"glTF") {
        return Err(SceneError::Unsupported("binary GLB container".into()));
    }
    let root: Root = serde_json::from_slice(bytes)
        .map_err(|e| SceneError::Parse { offset: byte_offset(bytes, e.line(), e.column()), message: e.to_string() })?;
    Importer::new(root, base_dir)?.run()
}

/// Converts serde_json's 1-based line/column into a byte offset.
pub(crate) fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for _ in 1..line {
        match bytes[offset..].iter().position(|&b| b == b'\n') {
            Some(p) => offset += p + 1,
            None => return bytes.len(),
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}

struct Importer<'a> {
    root: Root,
    base_dir: Option<&'a Path>,
    buffers: Vec<Vec<u8>>,
    scene: Scene,
    /// (glTF mesh, primitive) → geometry
    geometry_cache: HashMap<(usize, usize), GeometryId>,
    default_material: Option<MaterialId>,
}

impl<'a> Importer<'a> {
    fn new(root: Root, base_dir: Option<&'a Path>) -> Result<Self, SceneError> {
        if !root.asset.version.starts_with("2.") {
            return Err(SceneError::Unsupported(format!("glTF version {}", root.asset.version)));
        }
        if let Some(ext) = root.extensions_required.iter().find(|e| e.as_str() != LIGHTS_EXT) {
            return Err(SceneError::Unsupported(format!("required extension {ext}")));
        }
        for (feature, present) in [
            ("skins", !root.skins.is_empty()),
            ("animations", !root.animations.is_empty()),
            ("textures", !root.textures.is_empty()),
            ("images", !root.images.is_empty()),
        ] {
            if present {
                return Err(SceneError::Unsupported(feature.into()));
            }
        }
        Ok(Importer { root, base_dir, buffers: Vec::new(), scene: Scene::new(), geometry_cache: HashMap::new(), default_material: None })
    }

    fn run(mut self) -> Result<Scene, SceneError> {
        self.load_buffers()?;
        self.load_materials()?;
        if let Some(color) =
            self.root.extras.as_ref().and_then(|e| e.get("clear_color")).and_then(|c| serde_json::from_value::<[f64; 3]>(c.clone()).ok())
        {
            self.scene.clear_color = Vec3::from_array(color).max(Vec3::ZERO);
        }

        let count = self.root.nodes.len();
        let mut parents: Vec<Option<NodeId>> = vec![None; count];
        for (i, node) in self.root.nodes.iter().enumerate() {
            for &child in &node.children {
                let name = node_name(node, i);
                if child >= count {
                    return Err(SceneError::validation(name, format!("child index {child} out of range")));
                }
                if parents[child].is_some() {
                    return Err(SceneError::validation(node_name(&self.root.nodes[child], child), "node has more than one parent"));
                }
                parents[child] = Some(NodeId(i as u32));
            }
        }

        #[allow(clippy::needless_range_loop)]
        for i in 0..count {
            let (name, local) = {
                let node = &self.root.nodes[i];
                let name = node_name(node, i);
                if node.skin.is_some() {
                    return Err(SceneError::Unsupported(format!("skinning on node {name}")));
                }
                if node.weights.is_some() {
                    return Err(SceneError::Unsupported(format!("morph target weights on node {name}")));
                }
                (name.clone(), node_local(node, &name)?)
            };
            self.scene.nodes.push(SceneNode { name, parent: parents[i], local, mesh_instance: None });
        }

        let mut extra_nodes = Vec::new();
        for i in 0..count {
            let name = self.scene.nodes[i].name.clone();
            let (mesh, camera, light) = {
                let n = &self.root.nodes[i];
                (n.mesh, n.camera, n.extensions.as_ref().and_then(|e| e.light.as_ref()).map(|l| l.light))
            };
            if let Some(mesh) = mesh {
                let instances = self.mesh_instances(mesh, &name)?;
                for (k, inst) in instances.into_iter().enumerate() {
                    if k == 0 {
                        self.scene.nodes[i].mesh_instance = Some(inst);
                    } else {
                        extra_nodes.push(SceneNode {
                            name: format!("{name}#{k}"),
                            parent: Some(NodeId(i as u32)),
                            local: Mat4::IDENTITY,
                            mesh_instance: Some(inst),
                        });
                    }
                }
            }
            if let Some(cam) = camera {
                let c = self.root.cameras.get(cam).ok_or_else(|| SceneError::validation(&name, format!("camera {cam} out of range")))?;
                if c.kind != "perspective" {
                    return Err(SceneError::Unsupported(format!("{} camera on node {name}", c.kind)));
                }
                let p = c.perspective.as_ref().ok_or_else(|| SceneError::validation(&name, "perspective camera without parameters"))?;
                self.scene.cameras.push(Camera {
                    node: NodeId(i as u32),
                    vertical_fov: p.yfov,
                    near: p.znear,
                    far: p.zfar.unwrap_or(p.znear * INFINITE_FAR_RATIO),
                });
            }
            if let Some(light) = light {
                let lights = self.root.extensions.as_ref().and_then(|e| e.lights.as_ref());
                let l = lights
                    .and_then(|l| l.lights.get(light))
                    .ok_or_else(|| SceneError::validation(&name, format!("light {light} out of range")))?;
                if l.kind != "point" {
                    return Err(SceneError::Unsupported(format!("{} light on node {name}", l.kind)));
                }
                self.scene.lights.push(PointLight {
                    position: Vec3::ZERO,
                    intensity: (Vec3::from_array(l.color) * l.intensity).max(Vec3::ZERO),
                    node: Some(NodeId(i as u32)),
                });
            }
        }
        self.scene.nodes.extend(extra_nodes);

        self.scene.validate()?;
        let world = self.scene.compute_world_transforms()?;
        let positions = self.scene.light_positions(&world);
        for (light, p) in self.scene.lights.iter_mut().zip(positions) {
            light.position = p;
        }
        Ok(self.scene)
    }

    fn load_buffers(&mut self) -> Result<(), SceneError> {
        for (i, b) in self.root.buffers.iter().enumerate() {
            let uri = b.uri.as_deref().ok_or_else(|| SceneError::Unsupported(format!("buffer {i} without uri (GLB binary chunk)")))?;
            let data = if let Some(rest) = uri.strip_prefix("data:") {
                let (_, payload) =
                    rest.split_once(";base64,").ok_or_else(|| SceneError::Unsupported(format!("buffer {i} data URI without base64")))?;
                base64::engine::general_purpose::STANDARD
                    .decode(payload)
                    .map_err(|e| SceneError::validation(format!("buffer {i}"), format!("bad base64: {e}")))?
            } else {
                let dir =
                    self.base_dir.ok_or_else(|| SceneError::Unsupported(format!("external buffer '{uri}' without a base directory")))?;
                let path = dir.join(uri);
                std::fs::read(&path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })?
            };
            if data.len() < b.byte_length {
                return Err(SceneError::validation(
                    format!("buffer {i}"),
                    format!("holds {} bytes, declares {}", data.len(), b.byte_length),
                ));
            }
            self.buffers.push(data);
        }
        Ok(())
    }

    fn load_materials(&mut self) -> Result<(), SceneError> {
        for (i, m) in self.root.materials.iter().enumerate() {
            if m.normal_texture.is_some() || m.occlusion_texture.is_some() || m.emissive_texture.is_some() {
                return Err(SceneError::Unsupported(format!("textures on material {i}")));
            }
            if matches!(m.alpha_mode.as_deref(), Some("BLEND") | Some("MASK")) {
                return Err(SceneError::Unsupported(format!("alpha mode on material {i}")));
            }
            let (base, metallic, roughness) = match &m.pbr_metallic_roughness {
                Some(p) => {
                    if p.base_color_texture.is_some() || p.metallic_roughness_texture.is_some() {
                        return Err(SceneError::Unsupported(format!("textures on material {i}")));
                    }
                    let c = p.base_color_factor;
                    (Vec3::new(c[0], c[1], c[2]), p.metallic_factor, p.roughness_factor)
                }
                None => (Vec3::ONE, 1.0, 1.0),
            };
            self.scene.materials.push(MaterialPbr::new(i as u32, base, metallic, roughness));
        }
        Ok(())
    }

    fn default_material(&mut self) -> MaterialId {
        if let Some(id) = self.default_material {
            return id;
        }
        // glTF default material: white, fully metallic, fully rough.
        let id = self.scene.add_material(Vec3::ONE, 1.0, 1.0);
        self.default_material = Some(id);
        id
    }

    fn mesh_instances(&mut self, mesh: usize, node: &str) -> Result<Vec<MeshInstance>, SceneError> {
        let prim_count =
            self.root.meshes.get(mesh).ok_or_else(|| SceneError::validation(node, format!("mesh {mesh} out of range")))?.primitives.len();
        if prim_count == 0 {
            return Err(SceneError::validation(node, format!("mesh {mesh} has no primitives")));
        }
        let mut out = Vec::with_capacity(prim_count);
        for p in 0..prim_count {
            let material = match self.root.meshes[mesh].primitives[p].material {
                Some(m) if m < self.root.materials.len() => MaterialId(m as u32),
                Some(m) => return Err(SceneError::validation(node, format!("material {m} out of range"))),
                None => self.default_material(),
            };
            let geometry = match self.geometry_cache.get(&(mesh, p)) {
                Some(&g) => g,
                None => {
                    let geometry = self.read_primitive(mesh, p).map_err(|e| match e {
                        PrimError::Invalid(msg) => SceneError::validation(node, format!("mesh {mesh} primitive {p}: {msg}")),
                        PrimError::Unsupported(f) => SceneError::Unsupported(f),
                    })?;
                    self.scene.geometries.push(geometry);
                    let id = GeometryId(self.scene.geometries.len() as u32 - 1);
                    self.geometry_cache.insert((mesh, p), id);
                    id
                }
            };
            out.push(MeshInstance { geometry, material });
        }
        Ok(out)
    }

    fn read_primitive(&self, mesh: usize, p: usize) -> Result<MeshGeometry, PrimError> {
        let prim = &self.root.meshes[mesh].primitives[p];
        if prim.mode.unwrap_or(TRIANGLES) != TRIANGLES {
            return Err(PrimError::Unsupported(format!("primitive mode {}", prim.mode.unwrap_or(0))));
        }
        if prim.targets.as_ref().is_some_and(|t| !t.is_empty()) {
            return Err(PrimError::Unsupported("morph targets".into()));
        }
        if let Some(attr) = prim.attributes.keys().find(|k| k.starts_with("JOINTS_") || k.starts_with("WEIGHTS_")) {
            return Err(PrimError::Unsupported(format!("skinning attribute {attr}")));
        }
        let pos_idx = *prim.attributes.get("POSITION").ok_or_else(|| PrimError::invalid("missing POSITION"))?;
        let positions = self.read_floats(pos_idx, "VEC3")?;
        let count = positions.len() / 3;
        let normals = prim.attributes.get("NORMAL").map(|&a| self.read_floats(a, "VEC3")).transpose()?;
        let uvs = prim.attributes.get("TEXCOORD_0").map(|&a| self.read_floats(a, "VEC2")).transpose()?;
        if normals.as_ref().is_some_and(|n| n.len() != positions.len()) || uvs.as_ref().is_some_and(|u| u.len() / 2 != count) {
            return Err(PrimError::invalid("attribute counts disagree"));
        }
        let indices = match prim.indices {
            Some(a) => self.read_indices(a)?,
            None => (0..count as u32).collect(),
        };
        if indices.len() % 3 != 0 {
            return Err(PrimError::Invalid(format!("{} indices is not a whole number of triangles", indices.len())));
        }
        let vertices = (0..count)
            .map(|i| Vertex {
                position: Vec3::new(positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]),
                normal: normals.as_ref().map(|n| Vec3::new(n[3 * i], n[3 * i + 1], n[3 * i + 2])).unwrap_or(Vec3::ZERO),
                uv: uvs.as_ref().map(|u| [u[2 * i].clamp(0.0, 1.0), u[2 * i + 1].clamp(0.0, 1.0)]).unwrap_or([0.0, 0.0]),
            })
            .collect();
        let triangles: Vec<[u32; 3]> = indices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let mut geometry = MeshGeometry { vertices, triangles };
        if let Err(SceneError::Validation { message, .. }) = geometry.validate("") {
            return Err(PrimError::Invalid(message));
        }
        // Degenerate authored normals fall back to generated ones.
        if normals.is_some() && geometry.vertices.iter().all(|v| v.normal.length() > 1e-12) {
            geometry.renormalize();
        } else {
            geometry.generate_normals();
        }
        Ok(geometry)
    }

    fn accessor_bytes(&self, index: usize, elem_size: usize) -> Result<(Vec<&[u8]>, usize), PrimError> {
        let acc = self.accessor(index)?;
        let Some(view_idx) = acc.buffer_view else {
            return Ok((Vec::new(), acc.count));
        };
        let view = self
            .root
            .buffer_views
            .get(view_idx)
            .ok_or_else(|| PrimError::Invalid(format!("accessor {index}: buffer view {view_idx} out of range")))?;
        let buffer = self
            .buffers
            .get(view.buffer)
            .ok_or_else(|| PrimError::Invalid(format!("buffer view {view_idx}: buffer {} out of range", view.buffer)))?;
        let stride = view.byte_stride.unwrap_or(elem_size);
        if stride < elem_size {
            return Err(PrimError::Invalid(format!("buffer view {view_idx}: stride {stride} below element size {elem_size}")));
        }
        if view.byte_offset + view.byte_length > buffer.len() {
            return Err(PrimError::Invalid(format!("buffer view {view_idx} exceeds its buffer")));
        }
        let needed = if acc.count == 0 { 0 } else { acc.byte_offset + stride * (acc.count - 1) + elem_size };
        if needed > view.byte_length {
            return Err(PrimError::Invalid(format!("accessor {index} exceeds buffer view {view_idx}")));
        }
        let base = view.byte_offset + acc.byte_offset;
        let elems = (0..acc.count).map(|i| &buffer[base + i * stride..base + i * stride + elem_size]).collect();
        Ok((elems, acc.count))
    }

    fn accessor(&self, index: usize) -> Result<&GAccessor, PrimError> {
        let acc = self.root.accessors.get(index).ok_or_else(|| PrimError::Invalid(format!("accessor {index} out of range")))?;
        if acc.sparse.is_some() {
            return Err(PrimError::Unsupported("sparse accessors".into()));
        }
        Ok(acc)
    }

    fn read_floats(&self, index: usize, kind: &str) -> Result<Vec<f64>, PrimError> {
        let acc = self.accessor(index)?;
        if acc.component_type != FLOAT {
            return Err(PrimError::Unsupported(format!("component type {} for vertex attribute", acc.component_type)));
        }
        if acc.kind != kind {
            return Err(PrimError::Invalid(format!("accessor {index} is {} where {kind} is required", acc.kind)));
        }
        let width = if kind == "VEC3" { 3 } else { 2 };
        let (elems, count) = self.accessor_bytes(index, width * 4)?;
        if elems.is_empty() {
            return Ok(vec![0.0; count * width]);
        }
        Ok(elems.iter().flat_map(|e| e.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect())
    }

    fn read_indices(&self, index: usize) -> Result<Vec<u32>, PrimError> {
        let acc = self.accessor(index)?;
        if acc.kind != "SCALAR" {
            return Err(PrimError::Invalid(format!("index accessor {index} is {}", acc.kind)));
        }
        let size = match acc.component_type {
            UNSIGNED_SHORT => 2,
            UNSIGNED_INT => 4,
            other => return Err(PrimError::Unsupported(format!("index component type {other}"))),
        };
        let (elems, count) = self.accessor_bytes(index, size)?;
        if elems.is_empty() {
            return Ok(vec![0; count]);
        }
        Ok(elems
            .iter()
            .map(|e| if size == 2 { u16::from_le_bytes([e[0], e[1]]) as u32 } else { u32::from_le_bytes([e[0], e[1], e[2], e[3]]) })
            .collect())
    }
}

enum PrimError {
    Invalid(String),
    Unsupported(String),
}

impl PrimError {
    fn invalid(msg: &str) -> Self {
        PrimError::Invalid(msg.to_owned())
    }
}

fn node_name(node: &GNode, index: usize) -> String {
    node.name.clone().unwrap_or_else(|| format!("node{index}"))
}

fn node_local(node: &GNode, name: &str) -> Result<Mat4, SceneError> {
    let m = if let Some(m) = node.matrix {
        if node.translation.is_some() || node.rotation.is_some() || node.scale.is_some() {
            return Err(SceneError::validation(name, "node has both matrix and TRS"));
        }
        Mat4::from_cols_array(m)
    } else {
        Mat4::from_trs(
            Vec3::from_array(node.translation.unwrap_or([0.0; 3])),
            node.rotation.unwrap_or([0.0, 0.0, 0.0, 1.0]),
            Vec3::from_array(node.scale.unwrap_or([1.0; 3])),
        )
    };
    if !m.is_affine() {
        return Err(SceneError::validation(name, "node transform is not affine"));
    }
    Ok(m)
}

/// Writes the scene as a glTF document with one embedded buffer.
///
/// Geometry is stored as float32, so re-importing is exact only for
/// values representable in single precision. Pose overrides are not
/// exported.
pub fn export_gltf(scene: &Scene) -> String {
    let mut bin: Vec<u8> = Vec::new();
    let mut views = Vec::new();
    let mut accessors = Vec::new();
    let mut push_view = |bin: &mut Vec<u8>, data: Vec<u8>, target: u32| -> usize {
        while !bin.len().is_multiple_of(4) {
            bin.push(0);
        }
        views.push(json!({"buffer": 0, "byteOffset": bin.len(), "byteLength": data.len(), "target": target}));
        bin.extend_from_slice(&data);
        views.len() - 1
    };

    let mut meshes = Vec::new();
    let mut mesh_of: HashMap<(u32, u32), usize> = HashMap::new();
    let mut geometry_accessors = Vec::new();
    for g in &scene.geometries {
        let floats =
            |f: &dyn Fn(&Vertex) -> Vec<f64>| -> Vec<u8> { g.vertices.iter().flat_map(f).flat_map(|x| (x as f32).to_le_bytes()).collect() };
        let pos = push_view(&mut bin, floats(&|v| v.position.to_array().to_vec()), 34962);
        let nrm = push_view(&mut bin, floats(&|v| v.normal.to_array().to_vec()), 34962);
        let uv = push_view(&mut bin, floats(&|v| v.uv.to_vec()), 34962);
        let idx = push_view(&mut bin, g.triangles.iter().flatten().flat_map(|i| i.to_le_bytes()).collect(), 34963);
        let (lo, hi) = g
            .vertices
            .iter()
            .fold((Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY)), |(lo, hi), v| (lo.min(v.position), hi.max(v.position)));
        let base = accessors.len();
        let n = g.vertices.len();
        accessors.push(json!({"bufferView": pos, "componentType": FLOAT, "count": n, "type": "VEC3",
            "min": [lo.x as f32, lo.y as f32, lo.z as f32], "max": [hi.x as f32, hi.y as f32, hi.z as f32]}));
        accessors.push(json!({"bufferView": nrm, "componentType": FLOAT, "count": n, "type": "VEC3"}));
        accessors.push(json!({"bufferView": uv, "componentType": FLOAT, "count": n, "type": "VEC2"}));
        accessors.push(json!({"bufferView": idx, "componentType": UNSIGNED_INT, "count": g.triangles.len() * 3, "type": "SCALAR"}));
        geometry_accessors.push(base);
    }

    let mut nodes: Vec<Value> = Vec::new();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); scene.nodes.len()];
    for (i, n) in scene.nodes.iter().enumerate() {
        if let Some(p) = n.parent {
            children[p.0 as usize].push(i);
        }
    }
    let mut cameras = Vec::new();
    let mut lights = Vec::new();
    for (i, n) in scene.nodes.iter().enumerate() {
        let mut node = json!({"name": n.name});
        if n.local != Mat4::IDENTITY {
            node["matrix"] = json!(n.local.m);
        }
        if !children[i].is_empty() {
            node["children"] = json!(children[i]);
        }
        if let Some(m) = n.mesh_instance {
            let key = (m.geometry.0, m.material.0);
            let next = meshes.len();
            let mesh = *mesh_of.entry(key).or_insert(next);
            if mesh == next {
                let a = geometry_accessors[m.geometry.0 as usize];
                meshes.push(json!({"primitives": [{
                    "attributes": {"POSITION": a, "NORMAL": a + 1, "TEXCOORD_0": a + 2},
                    "indices": a + 3, "material": m.material.0, "mode": TRIANGLES}]}));
            }
            node["mesh"] = json!(mesh);
        }
        if let Some(c) = scene.cameras.iter().find(|c| c.node.0 as usize == i) {
            node["camera"] = json!(cameras.len());
            cameras.push(json!({"type": "perspective", "perspective": {"yfov": c.vertical_fov, "znear": c.near, "zfar": c.far}}));
        }
        nodes.push(node);
    }
    for (li, l) in scene.lights.iter().enumerate() {
        let peak = l.intensity.max_component();
        let (color, intensity) = if peak > 0.0 { (l.intensity / peak, peak) } else { (Vec3::ONE, 0.0) };
        lights.push(json!({"type": "point", "color": color.to_array(), "intensity": intensity}));
        let ext = json!({LIGHTS_EXT: {"light": li}});
        match l.node {
            Some(n) => nodes[n.0 as usize]["extensions"] = ext,
            None => {
                nodes.push(json!({"name": format!("light{li}"),
                    "translation": l.position.to_array(), "extensions": ext}));
            }
        }
    }
    let materials: Vec<Value> = scene
        .materials
        .iter()
        .map(|m| {
            json!({"pbrMetallicRoughness": {
                "baseColorFactor": [m.base_color.x, m.base_color.y, m.base_color.z, 1.0],
                "metallicFactor": m.metallic, "roughnessFactor": m.roughness}})
        })
        .collect();
    let roots: Vec<usize> = (0..nodes.len()).filter(|&i| i >= scene.nodes.len() || scene.nodes[i].parent.is_none()).collect();

    let mut doc = json!({
        "asset": {"version": "2.0", "generator": "simrender"},
        "scene": 0,
        "scenes": [{"nodes": roots}],
        "nodes": nodes,
        "meshes": meshes,
        "materials": materials,
        "accessors": accessors,
        "bufferViews": views,
        "buffers": [{"byteLength": bin.len(), "uri": format!("data:application/octet-stream;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(&bin))}],
        "extras": {"clear_color": scene.clear_color.to_array()},
    });
    if !cameras.is_empty() {
        doc["cameras"] = json!(cameras);
    }
    if !lights.is_empty() {
        doc["extensionsUsed"] = json!([LIGHTS_EXT]);
        doc["extensions"] = json!({LIGHTS_EXT: {"lights": lights}});
    }
    serde_json::to_string_pretty(&doc).expect("glTF document serialises")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embed(bytes: &[u8]) -> String {
        format!("data:application/octet-stream;base64,{}", base64::engine::general_purpose::STANDARD.encode(bytes))
    }

    fn triangle_buffer() -> Vec<u8> {
        let mut b = Vec::new();
        for p in [[0.0f32, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] {
            for c in p {
                b.extend_from_slice(&c.to_le_bytes());
            }
        }
        for i in [0u16, 1, 2] {
            b.extend_from_slice(&i.to_le_bytes());
        }
        b.extend_from_slice(&[0, 0]);
        b
    }

    fn minimal(extra_nodes: &str, accessor: usize) -> String {
        format!(
            r#"{{
  "asset": {{"version": "2.0"}},
  "nodes": [{{"name": "tri", "mesh": 0}}{extra_nodes}],
  "meshes": [{{"primitives": [{{"attributes": {{"POSITION": {accessor}}}, "indices": 1}}]}}],
  "accessors": [
    {{"bufferView": 0, "componentType": 5126, "count": 3, "type": "VEC3"}},
    {{"bufferView": 1, "componentType": 5123, "count": 3, "type": "SCALAR"}}
  ],
  "bufferViews": [
    {{"buffer": 0, "byteOffset": 0, "byteLength": 36}},
    {{"buffer": 0, "byteOffset": 36, "byteLength": 6}}
  ],
  "buffers": [{{"byteLength": 44, "uri": "{}"}}]
}}"#,
            embed(&triangle_buffer())
        )
    }

    #[test]
    fn minimal_triangle() {
        let s = parse_gltf_subset(minimal("", 0).as_bytes()).unwrap();
        assert_eq!(s.nodes.len(), 1);
        assert_eq!(s.geometries.len(), 1);
        assert_eq!(s.geometries[0].vertices.len(), 3);
        assert_eq!(s.geometries[0].triangles, vec![[0, 1, 2]]);
        // generated from the face: +Z
        assert!((s.geometries[0].vertices[0].normal - Vec3::Z).length() < 1e-12);
        // default material appended
        assert_eq!(s.materials.len(), 1);
        assert_eq!(s.materials[0].metallic, 1.0);
    }

    #[test]
    fn parent_child_chain() {
        let text = minimal(r#", {"name": "child", "translation": [0, 2, 0]}"#, 0)
            .replace(r#"{"name": "tri", "mesh": 0}"#, r#"{"name": "tri", "mesh": 0, "children": [1]}"#);
        let s = parse_gltf_subset(text.as_bytes()).unwrap();
        assert_eq!(s.nodes[1].parent, Some(NodeId(0)));
    }

    #[test]
    fn accessor_out_of_range_names_node() {
        let err = parse_gltf_subset(minimal("", 7).as_bytes()).unwrap_err();
        match err {
            SceneError::Validation { node, message } => {
                assert_eq!(node, "tri");
                assert!(message.contains("accessor 7"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = b"{\n  \"asset\": {\"version\": \"2.0\"},\n  oops\n}";
        match parse_gltf_subset(text).unwrap_err() {
            SceneError::Parse { offset, .. } => assert_eq!(text[offset], b'o'),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn skinning_is_unsupported() {
        let text = minimal("", 0).replace(r#""mesh": 0}"#, r#""mesh": 0, "skin": 0}"#);
        match parse_gltf_subset(text.as_bytes()).unwrap_err() {
            SceneError::Unsupported(f) => assert!(f.contains("skin"), "{f}"),
            other => panic!("unexpected {other:?}"),
        }
        let text = minimal("", 0).replace(r#""asset""#, r#""skins": [{"joints": [0]}], "asset""#);
        assert!(matches!(parse_gltf_subset(text.as_bytes()), Err(SceneError::Unsupported(_))));
    }

    #[test]
    fn required_unknown_extension_is_unsupported() {
        let text = minimal("", 0).replace(r#""asset""#, r#""extensionsRequired": ["KHR_draco_mesh_compression"], "asset""#);
        match parse_gltf_subset(text.as_bytes()).unwrap_err() {
            SceneError::Unsupported(f) => assert!(f.contains("draco")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sidecar_buffer_resolves_against_base() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("tri.bin"), triangle_buffer()).unwrap();
        let text = minimal("", 0).replace(&embed(&triangle_buffer()), "tri.bin");
        std::fs::write(dir.path().join("tri.gltf"), &text).unwrap();
        let s = load_gltf(dir.path().join("tri.gltf")).unwrap();
        assert_eq!(s.triangle_count(), 1);
        assert!(matches!(parse_gltf_subset(text.as_bytes()), Err(SceneError::Unsupported(_))));
    }

    #[test]
    fn materials_lights_and_cameras() {
        let text = minimal(
            r#", {"name": "lamp", "translation": [1, 2, 3], "extensions": {"KHR_lights_punctual": {"light": 0}}},
                {"name": "cam", "camera": 0}"#,
            0,
        )
        .replace(r#""indices": 1}"#, r#""indices": 1, "material": 0}"#)
        .replace(
            r#""asset""#,
            r#""materials": [{"pbrMetallicRoughness": {"baseColorFactor": [2, 0.5, -1, 1], "metallicFactor": 0.25, "roughnessFactor": 0.75}}],
               "cameras": [{"type": "perspective", "perspective": {"yfov": 0.8, "znear": 0.1}}],
               "extensions": {"KHR_lights_punctual": {"lights": [{"type": "point", "color": [1, 0.5, 0], "intensity": 4}]}},
               "asset""#,
        );
        let s = parse_gltf_subset(text.as_bytes()).unwrap();
        let m = s.materials[0];
        assert_eq!(m.base_color, Vec3::new(1.0, 0.5, 0.0));
        assert_eq!((m.metallic, m.roughness), (0.25, 0.75));
        assert_eq!(s.lights[0].position, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(s.lights[0].intensity, Vec3::new(4.0, 2.0, 0.0));
        assert_eq!(s.cameras[0].near, 0.1);
        assert!(s.cameras[0].far > s.cameras[0].near);
    }

    #[test]
    fn spot_lights_are_unsupported() {
        let text = minimal(r#", {"name": "lamp", "extensions": {"KHR_lights_punctual": {"light": 0}}}"#, 0)
            .replace(r#""asset""#, r#""extensions": {"KHR_lights_punctual": {"lights": [{"type": "spot"}]}}, "asset""#);
        assert!(matches!(parse_gltf_subset(text.as_bytes()), Err(SceneError::Unsupported(_))));
    }

    #[test]
    fn export_then_import_preserves_structure() {
        let s = crate::scene::presets::shadow_test_scene();
        let back = parse_gltf_subset(export_gltf(&s).as_bytes()).unwrap();
        assert_eq!(back.nodes.len(), s.nodes.len() + s.lights.iter().filter(|l| l.node.is_none()).count());
        assert_eq!(back.geometries.len(), s.geometries.len());
        assert_eq!(back.triangle_count(), s.triangle_count());
        assert_eq!(back.cameras.len(), s.cameras.len());
        for (a, b) in back.lights.iter().zip(&s.lights) {
            assert!((a.position - b.position).length() < 1e-9);
            assert!((a.intensity - b.intensity).length() < 1e-9);
        }
        let (wa, wb) = (back.world_transform_map().unwrap(), s.world_transform_map().unwrap());
        for (name, m) in &wb {
            assert!(wa[name].max_abs_diff(m) < 1e-12);
        }
    }
}
