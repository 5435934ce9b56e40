//! Procedural meshes and the small scenes used by the CLI, benchmarks and tests.

use std::f64::consts::PI;

use super::{MeshGeometry, MeshInstance, Scene, Vertex};
use crate::math::{Mat4, Vec3};

fn vertex(position: Vec3, normal: Vec3, u: f64, v: f64) -> Vertex {
    Vertex { position, normal, uv: [u, v] }
}

/// Square in the XZ plane centred on the origin, facing +Y.
pub fn quad(size: f64) -> MeshGeometry {
    let h = size * 0.5;
    let vertices = vec![
        vertex(Vec3::new(-h, 0.0, -h), Vec3::Y, 0.0, 0.0),
        vertex(Vec3::new(h, 0.0, -h), Vec3::Y, 1.0, 0.0),
        vertex(Vec3::new(h, 0.0, h), Vec3::Y, 1.0, 1.0),
        vertex(Vec3::new(-h, 0.0, h), Vec3::Y, 0.0, 1.0),
    ];
    MeshGeometry { vertices, triangles: vec![[0, 2, 1], [0, 3, 2]] }
}

/// Axis-aligned box with flat-shaded faces (24 vertices, 12 triangles).
pub fn cuboid(center: Vec3, half: Vec3) -> MeshGeometry {
    let mut vertices = Vec::with_capacity(24);
    let mut triangles = Vec::with_capacity(12);
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut n = [0.0; 3];
            n[axis] = sign;
            let normal = Vec3::from_array(n);
            let (u_axis, v_axis) = ((axis + 1) % 3, (axis + 2) % 3);
            let base = vertices.len() as u32;
            for (du, dv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let mut p = [0.0; 3];
                p[axis] = sign;
                p[u_axis] = du;
                p[v_axis] = dv;
                let p = Vec3::from_array(p).mul_elem(half) + center;
                vertices.push(vertex(p, normal, (du + 1.0) * 0.5, (dv + 1.0) * 0.5));
            }
            if sign > 0.0 {
                triangles.push([base, base + 1, base + 2]);
                triangles.push([base, base + 2, base + 3]);
            } else {
                triangles.push([base, base + 2, base + 1]);
                triangles.push([base, base + 3, base + 2]);
            }
        }
    }
    MeshGeometry { vertices, triangles }
}

pub fn cube(half: f64) -> MeshGeometry {
    cuboid(Vec3::ZERO, Vec3::splat(half))
}

/// Latitude/longitude sphere with smooth normals.
pub fn uv_sphere(radius: f64, segments: u32, rings: u32) -> MeshGeometry {
    let mut vertices = Vec::new();
    for r in 0..=rings {
        let v = r as f64 / rings as f64;
        let theta = v * PI;
        for s in 0..=segments {
            let u = s as f64 / segments as f64;
            let phi = u * 2.0 * PI;
            let n = Vec3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
            vertices.push(vertex(n * radius, n, u, v));
        }
    }
    let row = segments + 1;
    let mut triangles = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let a = r * row + s;
            let b = a + row;
            if r != 0 {
                triangles.push([a, a + 1, b]);
            }
            if r != rings - 1 {
                triangles.push([a + 1, b + 1, b]);
            }
        }
    }
    MeshGeometry { vertices, triangles }
}

/// Single triangle in the plane z = 0 facing +Z, centroid at the origin.
pub fn facing_triangle(size: f64) -> MeshGeometry {
    let s = size;
    let vertices = vec![
        vertex(Vec3::new(-s, -s, 0.0), Vec3::Z, 0.0, 0.0),
        vertex(Vec3::new(2.0 * s, -s, 0.0), Vec3::Z, 1.0, 0.0),
        vertex(Vec3::new(-s, 2.0 * s, 0.0), Vec3::Z, 0.0, 1.0),
    ];
    MeshGeometry { vertices, triangles: vec![[0, 1, 2]] }
}

/// One camera-facing triangle, one point light, one camera named `camera`.
pub fn triangle_scene() -> Scene {
    let mut s = Scene::new();
    s.clear_color = Vec3::new(0.02, 0.02, 0.03);
    let g = s.add_geometry(facing_triangle(1.0));
    let m = s.add_material(Vec3::new(0.8, 0.3, 0.2), 0.0, 0.6);
    s.add_node("triangle", None, Mat4::IDENTITY, Some(MeshInstance { geometry: g, material: m }));
    s.add_point_light(Vec3::new(0.5, 1.0, 3.0), Vec3::splat(12.0));
    s.add_camera("camera", Mat4::translation(Vec3::new(0.0, 0.0, 4.0)), 0.9, 0.1, 100.0);
    s
}

/// Geometry of the plane + sphere + point light shadow scene.
#[derive(Debug, Clone, Copy)]
pub struct ShadowSceneLayout {
    pub floor_size: f64,
    pub sphere_center: Vec3,
    pub sphere_radius: f64,
    pub light: Vec3,
}

pub const SHADOW_LAYOUT: ShadowSceneLayout =
    ShadowSceneLayout { floor_size: 12.0, sphere_center: Vec3::new(0.0, 1.5, 0.0), sphere_radius: 0.75, light: Vec3::new(0.0, 4.0, 0.0) };

pub fn shadow_test_scene() -> Scene {
    let l = SHADOW_LAYOUT;
    let mut s = Scene::new();
    let floor = s.add_geometry(quad(l.floor_size));
    let sphere = s.add_geometry(uv_sphere(l.sphere_radius, 96, 48));
    let grey = s.add_material(Vec3::splat(0.6), 0.0, 0.8);
    let gold = s.add_material(Vec3::new(1.0, 0.71, 0.29), 1.0, 0.35);
    s.add_node("floor", None, Mat4::IDENTITY, Some(MeshInstance { geometry: floor, material: grey }));
    s.add_node("sphere", None, Mat4::translation(l.sphere_center), Some(MeshInstance { geometry: sphere, material: gold }));
    s.add_point_light(l.light, Vec3::splat(30.0));
    s.add_camera("camera", Mat4::camera_to_world(Vec3::new(0.0, 5.0, 7.0), Vec3::new(0.0, 0.5, 0.0), Vec3::Y), 0.9, 0.1, 100.0);
    s
}

/// The scene used by the scaling benchmark: a floor, a grid of spheres
/// sharing one geometry, a few boxes, two lights.
pub fn bench_scene() -> Scene {
    let mut s = Scene::new();
    s.clear_color = Vec3::new(0.03, 0.03, 0.05);
    let floor = s.add_geometry(quad(16.0));
    let sphere = s.add_geometry(uv_sphere(0.6, 160, 80));
    let boxy = s.add_geometry(cube(0.5));
    let floor_mat = s.add_material(Vec3::splat(0.5), 0.0, 0.9);
    let materials = [
        s.add_material(Vec3::new(0.91, 0.92, 0.92), 1.0, 0.3),
        s.add_material(Vec3::new(1.0, 0.71, 0.29), 1.0, 0.25),
        s.add_material(Vec3::new(0.95, 0.64, 0.54), 1.0, 0.4),
        s.add_material(Vec3::new(0.7, 0.1, 0.1), 0.0, 0.2),
        s.add_material(Vec3::new(0.1, 0.3, 0.7), 0.0, 0.8),
    ];
    s.add_node("floor", None, Mat4::IDENTITY, Some(MeshInstance { geometry: floor, material: floor_mat }));
    let mut k = 0;
    for row in 0..3 {
        for col in 0..4 {
            let p = Vec3::new(-3.0 + 2.0 * col as f64, 0.6, -2.0 + 2.0 * row as f64);
            let material = materials[k % materials.len()];
            s.add_node(format!("sphere{k}"), None, Mat4::translation(p), Some(MeshInstance { geometry: sphere, material }));
            k += 1;
        }
    }
    for (i, x) in [-4.5, 4.5].into_iter().enumerate() {
        for (j, z) in [-3.0, 3.0].into_iter().enumerate() {
            let material = materials[(i * 2 + j + 3) % materials.len()];
            let local = Mat4::translation(Vec3::new(x, 0.5, z)) * Mat4::rotation_y(0.4 * (i * 2 + j) as f64);
            s.add_node(format!("box{}", i * 2 + j), None, local, Some(MeshInstance { geometry: boxy, material }));
        }
    }
    s.add_point_light(Vec3::new(-3.0, 6.0, 4.0), Vec3::splat(60.0));
    s.add_point_light(Vec3::new(4.0, 5.0, -2.0), Vec3::new(30.0, 26.0, 20.0));
    s.add_camera("camera", Mat4::camera_to_world(Vec3::new(0.0, 7.0, 11.0), Vec3::new(0.0, 0.0, 0.0), Vec3::Y), 0.8, 0.1, 200.0);
    s
}

/// Object-space centre of the interchange demo cube.
pub const DEMO_CUBE_CENTER: Vec3 = Vec3::new(1.5, 0.0, 0.0);
pub const DEMO_CUBE_HALF: f64 = 0.3;
pub const DEMO_CAMERA_DISTANCE: f64 = 20.0;
pub const DEMO_CAMERA_FOV: f64 = 0.3;

/// A single node `cube` whose geometry sits off its origin, so a rotation
/// about Z moves it on screen; camera `camera` looks down -Z from +Z.
pub fn interchange_demo_scene() -> Scene {
    let mut s = Scene::new();
    let g = s.add_geometry(cuboid(DEMO_CUBE_CENTER, Vec3::new(DEMO_CUBE_HALF, DEMO_CUBE_HALF, 0.05)));
    let m = s.add_material(Vec3::new(0.9, 0.9, 0.9), 0.0, 0.7);
    s.add_node("cube", None, Mat4::IDENTITY, Some(MeshInstance { geometry: g, material: m }));
    s.add_point_light(Vec3::new(0.0, 0.0, 6.0), Vec3::splat(40.0));
    s.add_camera("camera", Mat4::translation(Vec3::new(0.0, 0.0, DEMO_CAMERA_DISTANCE)), DEMO_CAMERA_FOV, 1.0, 100.0);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for s in [triangle_scene(), shadow_test_scene(), bench_scene(), interchange_demo_scene()] {
            s.validate().unwrap();
            assert!(!s.cameras.is_empty());
        }
    }

    #[test]
    fn sphere_is_closed_and_outward() {
        let g = uv_sphere(1.0, 16, 8);
        g.validate("sphere").unwrap();
        assert_eq!(g.triangles.len(), 16 * 8 * 2 - 2 * 16);
        for t in 0..g.triangles.len() {
            let [a, b, c] = g.triangle_positions(t);
            let n = (b - a).cross(c - a);
            if n.length() > 1e-12 {
                assert!(n.dot(a + b + c) > 0.0, "triangle {t} faces inward");
            }
        }
    }

    #[test]
    fn cube_faces_outward() {
        let g = cube(1.0);
        for t in 0..12 {
            let [a, b, c] = g.triangle_positions(t);
            assert!((b - a).cross(c - a).dot(a + b + c) > 0.0);
        }
    }
}
