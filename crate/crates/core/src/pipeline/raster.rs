//! Main pass: vertex transform, near/guard-band clipping, fixed-point
//! edge-function rasterisation with the top-left rule, per-sample depth test,
//! one shading evaluation per (pixel, triangle).

use rayon::prelude::*;

use super::draw::{DrawCommand, VertexFetch};
use super::framebuffer::{sample_positions, HdrFramebuffer};
use super::{RenderConfig, RenderError, ShadingMode};
use crate::accel::{shadow_visibility, Tlas};
use crate::math::{Mat4, Vec3};
use crate::scene::{Camera, Scene, WorldTransforms};
use crate::shading::{display_encode, linear_to_srgb, shade_direct, LightSample, ShadingSample};

/// Sub-pixel precision: 1/256 pixel.
const SUBPIXEL: i64 = 256;
/// Triangles are clipped this many pixels outside the image so fixed-point
/// coordinates stay small.
const GUARD_BAND_PX: f64 = 8192.0;
const BAND_ROWS: usize = 8;

pub struct MainPassInput<'a> {
    pub scene: &'a Scene,
    pub world: &'a WorldTransforms,
    pub tlas: &'a Tlas,
    pub vertices: &'a dyn VertexFetch,
    pub draws: &'a [DrawCommand],
    pub config: &'a RenderConfig,
}

#[derive(Clone, Copy)]
struct ClipVertex {
    clip: [f64; 4],
    world: Vec3,
    normal: Vec3,
}

impl ClipVertex {
    fn lerp(&self, o: &ClipVertex, t: f64) -> ClipVertex {
        let mut clip = [0.0; 4];
        for (i, c) in clip.iter_mut().enumerate() {
            *c = self.clip[i] + (o.clip[i] - self.clip[i]) * t;
        }
        ClipVertex { clip, world: self.world.lerp(o.world, t), normal: self.normal.lerp(o.normal, t) }
    }
}

/// Post-divide vertex: fixed-point screen position plus attributes over w.
#[derive(Clone, Copy)]
struct ScreenVertex {
    x: i64,
    y: i64,
    z: f64,
    inv_w: f64,
    world_w: Vec3,
    normal_w: Vec3,
}

#[derive(Clone, Copy)]
struct Triangle {
    v: [u32; 3],
    /// Doubled area in fixed point, always positive.
    area: i64,
    bias: [i64; 3],
    /// Inclusive pixel bounds: x0, y0, x1, y1.
    bbox: [i32; 4],
    material: u32,
}

struct DrawGeometry {
    verts: Vec<ScreenVertex>,
    tris: Vec<Triangle>,
}

struct Context<'a> {
    input: &'a MainPassInput<'a>,
    view_proj: Mat4,
    width: usize,
    height: usize,
    guard_x: f64,
    guard_y: f64,
    camera_pos: Vec3,
    lights: Vec<(Vec3, Vec3)>,
    samples: Vec<(i64, i64)>,
}

fn resolve_camera<'a>(scene: &'a Scene, config: &RenderConfig) -> Result<&'a Camera, RenderError> {
    match &config.camera {
        Some(name) => scene.find_camera(name).ok_or_else(|| RenderError::Config(format!("no camera named {name:?}"))),
        None => scene.cameras.first().ok_or_else(|| RenderError::Config("scene has no camera".into())),
    }
}

/// Renders the draws into `fb`, which is resized and cleared first.
pub fn main_pass(input: &MainPassInput<'_>, fb: &mut HdrFramebuffer) -> Result<(), RenderError> {
    let cfg = input.config;
    cfg.validate()?;
    let camera = resolve_camera(input.scene, cfg)?;
    let cam_world = input.world.get(camera.node);
    let view = cam_world.inverse().ok_or_else(|| RenderError::Config("camera transform is not invertible".into()))?;
    let (width, height) = (cfg.width as usize, cfg.height as usize);
    let view_proj = camera.projection(width as f64 / height as f64) * view;
    let clear = linear_to_srgb(cfg.clear_color.unwrap_or(input.scene.clear_color));
    let samples = cfg.msaa as usize;
    fb.reset(width, height, samples, [clear.x as f32, clear.y as f32, clear.z as f32]);

    let light_pos = input.scene.light_positions(input.world);
    let ctx = Context {
        input,
        view_proj,
        width,
        height,
        guard_x: 1.0 + 2.0 * GUARD_BAND_PX / width as f64,
        guard_y: 1.0 + 2.0 * GUARD_BAND_PX / height as f64,
        camera_pos: cam_world.transform_point(Vec3::ZERO),
        lights: input.scene.lights.iter().zip(light_pos).map(|(l, p)| (p, l.intensity)).collect(),
        samples: sample_positions(cfg.msaa).iter().map(|&(x, y)| ((x * SUBPIXEL as f64) as i64, (y * SUBPIXEL as f64) as i64)).collect(),
    };

    let geometry: Vec<DrawGeometry> = input.draws.par_iter().map(|d| setup_draw(&ctx, d)).collect();

    let band_count = height.div_ceil(BAND_ROWS);
    let mut bands: Vec<Vec<(u32, u32)>> = vec![Vec::new(); band_count];
    for (gi, g) in geometry.iter().enumerate() {
        for (ti, t) in g.tris.iter().enumerate() {
            for band in bands.iter_mut().take(t.bbox[3] as usize / BAND_ROWS + 1).skip(t.bbox[1] as usize / BAND_ROWS) {
                band.push((gi as u32, ti as u32));
            }
        }
    }

    let band_len = BAND_ROWS * width * samples;
    fb.color
        .par_chunks_mut(band_len)
        .zip(fb.depth.par_chunks_mut(band_len))
        .zip(bands.par_iter())
        .enumerate()
        .for_each(|(b, ((color, depth), list))| raster_band(&ctx, &geometry, list, b * BAND_ROWS, color, depth));
    Ok(())
}

const OUT_NEAR: u16 = 1;
/// Bits that force clipping; the rest only mark sides of the visible frustum.
const CLIP_BITS: u16 = 0x1f;

fn outcode(c: &[f64; 4], gx: f64, gy: f64) -> u16 {
    let [x, y, z, w] = *c;
    let mut code = 0;
    if z < 0.0 {
        code |= OUT_NEAR;
    }
    if x > gx * w {
        code |= 2;
    }
    if x < -gx * w {
        code |= 4;
    }
    if y > gy * w {
        code |= 8;
    }
    if y < -gy * w {
        code |= 16;
    }
    if x > w {
        code |= 32;
    }
    if x < -w {
        code |= 64;
    }
    if y > w {
        code |= 128;
    }
    if y < -w {
        code |= 256;
    }
    code
}

/// True when every point lies outside one plane of the view frustum.
fn outside_frustum(clip: &[[f64; 4]]) -> bool {
    let planes: [fn(&[f64; 4]) -> f64; 6] = [|c| c[3] - c[0], |c| c[3] + c[0], |c| c[3] - c[1], |c| c[3] + c[1], |c| c[2], |c| c[3] - c[2]];
    planes.iter().any(|p| clip.iter().all(|c| p(c) < 0.0))
}

fn setup_draw(ctx: &Context<'_>, d: &DrawCommand) -> DrawGeometry {
    let scene = ctx.input.scene;
    let source = ctx.input.vertices.vertices(d.geometry);
    let tris = &scene.geometries[d.geometry.0 as usize].triangles;
    let mvp = ctx.view_proj * d.transform;
    let nm = d.transform.normal_matrix();
    let clip: Vec<ClipVertex> = source
        .iter()
        .map(|v| ClipVertex {
            clip: mvp.mul_vec4([v.position.x, v.position.y, v.position.z, 1.0]),
            world: d.transform.transform_point(v.position),
            normal: nm.transform_vector(v.normal),
        })
        .collect();
    let mut out = DrawGeometry { verts: Vec::new(), tris: Vec::new() };
    if ctx.input.config.frustum_culling {
        let corners: Vec<[f64; 4]> = clip.iter().map(|c| c.clip).collect();
        if outside_frustum(&corners) {
            return out;
        }
    }
    let codes: Vec<u16> = clip.iter().map(|c| outcode(&c.clip, ctx.guard_x, ctx.guard_y)).collect();
    let mut remap = vec![u32::MAX; clip.len()];
    let material = d.material.0;
    for t in tris {
        let [a, b, c] = t.map(|i| i as usize);
        let (ca, cb, cc) = (codes[a], codes[b], codes[c]);
        if ca & cb & cc != 0 {
            continue;
        }
        if (ca | cb | cc) & CLIP_BITS == 0 {
            let idx = [a, b, c].map(|i| {
                if remap[i] == u32::MAX {
                    remap[i] = out.verts.len() as u32;
                    out.verts.push(project(ctx, &clip[i]));
                }
                remap[i]
            });
            emit(ctx, &mut out, idx, material);
            continue;
        }
        let poly = clip_polygon(vec![clip[a], clip[b], clip[c]], ctx.guard_x, ctx.guard_y);
        if poly.len() < 3 {
            continue;
        }
        let base = out.verts.len() as u32;
        out.verts.extend(poly.iter().map(|v| project(ctx, v)));
        for k in 1..poly.len() as u32 - 1 {
            emit(ctx, &mut out, [base, base + k, base + k + 1], material);
        }
    }
    out
}

type ClipPlane<'a> = &'a dyn Fn(&[f64; 4]) -> f64;

fn clip_polygon(mut poly: Vec<ClipVertex>, gx: f64, gy: f64) -> Vec<ClipVertex> {
    let planes: [ClipPlane; 5] = [&|c| c[2], &|c| gx * c[3] - c[0], &|c| gx * c[3] + c[0], &|c| gy * c[3] - c[1], &|c| gy * c[3] + c[1]];
    for plane in planes {
        if poly.is_empty() {
            break;
        }
        let mut next = Vec::with_capacity(poly.len() + 1);
        for i in 0..poly.len() {
            let (p, q) = (&poly[i], &poly[(i + 1) % poly.len()]);
            let (dp, dq) = (plane(&p.clip), plane(&q.clip));
            if dp >= 0.0 {
                next.push(*p);
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                next.push(p.lerp(q, dp / (dp - dq)));
            }
        }
        poly = next;
    }
    poly
}

fn project(ctx: &Context<'_>, v: &ClipVertex) -> ScreenVertex {
    let inv_w = 1.0 / v.clip[3];
    let sx = (v.clip[0] * inv_w * 0.5 + 0.5) * ctx.width as f64;
    let sy = (0.5 - v.clip[1] * inv_w * 0.5) * ctx.height as f64;
    ScreenVertex {
        x: (sx * SUBPIXEL as f64).round() as i64,
        y: (sy * SUBPIXEL as f64).round() as i64,
        z: v.clip[2] * inv_w,
        inv_w,
        world_w: v.world * inv_w,
        normal_w: v.normal * inv_w,
    }
}

fn orient(a: &ScreenVertex, b: &ScreenVertex, px: i64, py: i64) -> i64 {
    (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
}

/// Edges whose interior lies below (flat top) or to the right (left edges) own their boundary.
fn is_top_left(a: &ScreenVertex, b: &ScreenVertex) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    (dy == 0 && dx > 0) || dy < 0
}

fn emit(ctx: &Context<'_>, out: &mut DrawGeometry, mut v: [u32; 3], material: u32) {
    let p = |i: u32| &out.verts[i as usize];
    let mut area = orient(p(v[0]), p(v[1]), p(v[2]).x, p(v[2]).y);
    if area == 0 {
        return;
    }
    // Counter-clockwise in NDC (front facing) comes out negative with y down.
    if area > 0 && ctx.input.config.back_face_culling {
        return;
    }
    if area < 0 {
        v.swap(1, 2);
        area = -area;
    }
    let [a, b, c] = v.map(|i| *p(i));
    let min_x = a.x.min(b.x).min(c.x);
    let max_x = a.x.max(b.x).max(c.x);
    let min_y = a.y.min(b.y).min(c.y);
    let max_y = a.y.max(b.y).max(c.y);
    let x0 = min_x.div_euclid(SUBPIXEL).max(0);
    let y0 = min_y.div_euclid(SUBPIXEL).max(0);
    let x1 = max_x.div_euclid(SUBPIXEL).min(ctx.width as i64 - 1);
    let y1 = max_y.div_euclid(SUBPIXEL).min(ctx.height as i64 - 1);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let bias = [(b, c), (c, a), (a, b)].map(|(s, e)| if is_top_left(&s, &e) { 0 } else { -1 });
    out.tris.push(Triangle { v, area, bias, bbox: [x0 as i32, y0 as i32, x1 as i32, y1 as i32], material });
}

fn raster_band(ctx: &Context<'_>, geometry: &[DrawGeometry], list: &[(u32, u32)], row0: usize, color: &mut [[f32; 3]], depth: &mut [f32]) {
    let w = ctx.width;
    let ns = ctx.samples.len();
    let rows = color.len() / (w * ns);
    let row1 = row0 + rows; // exclusive
                            // Visibility first, then one shade per surviving (pixel, triangle).
    let mut ids = vec![u64::MAX; color.len()];
    for &(gi, ti) in list {
        let g = &geometry[gi as usize];
        let t = &g.tris[ti as usize];
        let [a, b, c] = t.v.map(|i| &g.verts[i as usize]);
        let y_start = (t.bbox[1] as usize).max(row0);
        let y_end = (t.bbox[3] as usize + 1).min(row1);
        let id = (gi as u64) << 32 | ti as u64;
        for py in y_start..y_end {
            for px in t.bbox[0] as usize..=t.bbox[2] as usize {
                let base = ((py - row0) * w + px) * ns;
                for (k, &(ox, oy)) in ctx.samples.iter().enumerate() {
                    let sx = px as i64 * SUBPIXEL + ox;
                    let sy = py as i64 * SUBPIXEL + oy;
                    let e0 = orient(b, c, sx, sy);
                    let e1 = orient(c, a, sx, sy);
                    let e2 = orient(a, b, sx, sy);
                    if e0 + t.bias[0] < 0 || e1 + t.bias[1] < 0 || e2 + t.bias[2] < 0 {
                        continue;
                    }
                    let z = ((e0 as f64 * a.z + e1 as f64 * b.z + e2 as f64 * c.z) / t.area as f64) as f32;
                    if z < depth[base + k] {
                        depth[base + k] = z;
                        ids[base + k] = id;
                    }
                }
            }
        }
    }
    for py in row0..row1 {
        for px in 0..w {
            let base = ((py - row0) * w + px) * ns;
            for k in 0..ns {
                let id = ids[base + k];
                if id == u64::MAX {
                    continue;
                }
                if let Some(j) = (0..k).find(|&j| ids[base + j] == id) {
                    color[base + k] = color[base + j];
                    continue;
                }
                let g = &geometry[(id >> 32) as usize];
                let t = &g.tris[(id & 0xffff_ffff) as usize];
                let v = t.v.map(|i| &g.verts[i as usize]);
                color[base + k] = shade_fragment(ctx, t, v, px, py);
            }
        }
    }
}

/// Perspective-correct attributes at the pixel centre, then the material model.
fn shade_fragment(ctx: &Context<'_>, t: &Triangle, v: [&ScreenVertex; 3], px: usize, py: usize) -> [f32; 3] {
    let [a, b, c] = v;
    let cx = px as i64 * SUBPIXEL + SUBPIXEL / 2;
    let cy = py as i64 * SUBPIXEL + SUBPIXEL / 2;
    let area = t.area as f64;
    let mut l = [orient(b, c, cx, cy) as f64 / area, orient(c, a, cx, cy) as f64 / area, orient(a, b, cx, cy) as f64 / area];
    let inv_w = [a.inv_w, b.inv_w, c.inv_w];
    let mut denom = l[0] * inv_w[0] + l[1] * inv_w[1] + l[2] * inv_w[2];
    let min_w = inv_w[0].min(inv_w[1]).min(inv_w[2]);
    if denom.is_nan() || denom <= 0.5 * min_w {
        // Extrapolating far outside a grazing triangle: fall back to its nearest point.
        for x in &mut l {
            *x = x.max(0.0);
        }
        let s = l[0] + l[1] + l[2];
        for x in &mut l {
            *x /= s;
        }
        denom = l[0] * inv_w[0] + l[1] * inv_w[1] + l[2] * inv_w[2];
    }
    let material = &ctx.input.scene.materials[t.material as usize];
    let out = match ctx.input.config.shading {
        ShadingMode::Flat => linear_to_srgb(material.base_color),
        ShadingMode::Lit => {
            let position = (a.world_w * l[0] + b.world_w * l[1] + c.world_w * l[2]) / denom;
            let normal = (a.normal_w * l[0] + b.normal_w * l[1] + c.normal_w * l[2]) / denom;
            let sample = ShadingSample::new(position, normal, *material, ctx.camera_pos - position);
            let lights: Vec<LightSample> = ctx
                .lights
                .iter()
                .map(|&(lp, intensity)| {
                    let facing = sample.normal.dot(lp - position) > 0.0;
                    let visibility = if !facing {
                        0.0
                    } else if ctx.input.config.shadows {
                        shadow_visibility(ctx.input.tlas, position, sample.normal, lp)
                    } else {
                        1.0
                    };
                    LightSample { position: lp, intensity, visibility }
                })
                .collect();
            display_encode(shade_direct(&sample, &lights))
        }
    };
    [out.x as f32, out.y as f32, out.z as f32]
}
