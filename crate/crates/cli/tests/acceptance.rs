//! Prints one PASS/FAIL line per acceptance criterion and exits non-zero
//! when any of them fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use simrender_core::accel::*;
use simrender_core::interchange::*;
use simrender_core::math::{Mat4, Vec3};
use simrender_core::pipeline::{fxaa_pass, luma, FrameLoop, LdrImage, PoseUpdate, RenderConfig, ShadingMode};
use simrender_core::scene::presets::{self, SHADOW_LAYOUT};
use simrender_core::scene::{GeometryId, MeshGeometry, MeshInstance, Scene, Vertex};
use simrender_core::shading::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_simrender")
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/golden").join(name)
}

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name)
}

fn bless() -> bool {
    std::env::var_os("SIMRENDER_BLESS").is_some()
}

fn run(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| format!("spawn: {e}"))?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn random_unit_upper(rng: &mut impl Rng, n: Vec3) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let l = v.length();
        if l > 1e-3 && l <= 1.0 && v.dot(n) > 1e-3 {
            return v / l;
        }
    }
}

fn brdf_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..1000 {
        let n = random_unit_upper(&mut rng, Vec3::Y).lerp(Vec3::Y, 0.3).normalize();
        let (wi, wo) = (random_unit_upper(&mut rng, n), random_unit_upper(&mut rng, n));
        let f0 = Vec3::new(rng.gen(), rng.gen(), rng.gen());
        let p = BrdfParams::new(n, wi, wo, f0, rng.gen_range(0.01..=1.0));
        let (a, b) = (cook_torrance_specular(&p), cook_torrance_specular(&p.swapped()));
        for c in 0..3 {
            worst_rel = worst_rel.max((a[c] - b[c]).abs() / a[c].abs().max(b[c].abs()).max(1e-300));
        }
    }
    ensure(worst_rel <= 1e-12, || format!("reciprocity error {worst_rel:e}"))?;

    let f0 = Vec3::new(0.04, 0.5, 0.9);
    ensure(fresnel_schlick(1.0, f0) == f0 && fresnel_schlick(0.0, f0) == Vec3::ONE, || "Fresnel endpoints".into())?;

    // Uniform hemisphere sampling: cos(theta) uniform on [0, 1], pdf 1 / (2 pi).
    let mut worst_norm: f64 = 0.0;
    for alpha in [0.3, 0.6, 1.0] {
        let n = 1_000_000;
        let sum: f64 = (0..n)
            .map(|_| {
                let c: f64 = rng.gen();
                let a2 = alpha * alpha;
                let dd = c * c * (a2 - 1.0) + 1.0;
                let d = ggx_ndf(c, alpha);
                let oracle = a2 / (PI * dd * dd);
                assert!((d - oracle).abs() <= 1e-12 * oracle.max(1.0));
                d * c * 2.0 * PI
            })
            .sum();
        worst_norm = worst_norm.max((sum / n as f64 - 1.0).abs());
    }
    ensure(worst_norm < 0.02, || format!("NDF normalisation off by {worst_norm:.4}"))?;

    let mut worst_albedo: f64 = 0.0;
    for _ in 0..200 {
        let alpha: f64 = rng.gen_range(0.1..=1.0);
        let f0 = Vec3::new(rng.gen(), rng.gen(), rng.gen());
        let wo = random_unit_upper(&mut rng, Vec3::Z);
        let a2 = alpha * alpha;
        let samples = 100_000;
        let mut sum = Vec3::ZERO;
        for _ in 0..samples {
            let (u, v): (f64, f64) = (rng.gen(), rng.gen());
            let cos_t = ((1.0 - u) / (1.0 + (a2 - 1.0) * u)).sqrt();
            let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
            let phi = 2.0 * PI * v;
            let h = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), cos_t);
            let o_h = wo.dot(h);
            if o_h <= 0.0 {
                continue;
            }
            let wi = h * (2.0 * o_h) - wo;
            if wi.z <= 0.0 {
                continue;
            }
            let dd = cos_t * cos_t * (a2 - 1.0) + 1.0;
            let pdf = a2 / (PI * dd * dd) * cos_t / (4.0 * o_h);
            sum += cook_torrance_specular(&BrdfParams::new(Vec3::Z, wi, wo, f0, alpha)) * (wi.z / pdf);
        }
        worst_albedo = worst_albedo.max((sum / samples as f64).max_component());
    }
    ensure(worst_albedo <= 1.05, || format!("specular albedo {worst_albedo:.4}"))?;
    Ok(format!("reciprocity {worst_rel:.1e}, NDF integral within {:.2}%, max albedo {worst_albedo:.4}", worst_norm * 100.0))
}

fn colour_pipeline() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..1024 {
        let x = i as f64 / 1023.0;
        worst = worst.max((linear_to_srgb_channel(srgb_to_linear_channel(x)) - x).abs());
        worst = worst.max((srgb_to_linear_channel(linear_to_srgb_channel(x)) - x).abs());
    }
    ensure(worst <= 1e-6, || format!("sRGB round trip error {worst:e}"))?;
    let r = reinhard_tonemap(Vec3::new(0.0, 1.0, 3.0));
    ensure(r == Vec3::new(0.0, 0.5, 0.75), || format!("Reinhard gave {r:?}"))?;
    Ok(format!("round trip {worst:.1e}, Reinhard exact"))
}

fn soup(rng: &mut impl Rng, count: usize) -> MeshGeometry {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for t in 0..count {
        let c = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        for _ in 0..3 {
            let p = c + Vec3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
            vertices.push(Vertex { position: p, normal: Vec3::Y, uv: [0.0, 0.0] });
        }
        triangles.push([3 * t as u32, 3 * t as u32 + 1, 3 * t as u32 + 2]);
    }
    MeshGeometry { vertices, triangles }
}

fn place(blas: Arc<Blas>) -> Vec<TlasInstance> {
    let a = Mat4::translation(Vec3::new(-3.0, 0.5, 0.0)) * Mat4::rotation_y(0.4);
    let b = Mat4::translation(Vec3::new(3.5, -0.5, 1.0)) * Mat4::rotation_x(-0.7) * Mat4::scale(Vec3::new(1.2, 0.8, 1.0));
    vec![TlasInstance::new(blas.clone(), a, "a", 0).unwrap(), TlasInstance::new(blas, b, "b", 1).unwrap()]
}

fn bvh_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mesh = soup(&mut rng, 500);
    let built = Arc::new(build_blas(GeometryId(0), &mesh));
    let compact = Arc::new(compact_blas((*built).clone()));
    let world = world_triangles(&place(compact.clone()));
    let tlas = build_tlas(place(compact.clone()), 0);
    let tlas_uncompacted = build_tlas(place(built.clone()), 0);
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let o = Vec3::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
        let target = Vec3::new(rng.gen_range(-7.0..7.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        let ray = Ray::new(o, target - o, 0.0, 100.0).map_err(|e| e.to_string())?;
        let fast = ray_closest_hit(&tlas, &ray);
        match (fast, brute_force_closest_hit(&world, &ray)) {
            (None, None) => {}
            (Some(f), Some(s)) => {
                hits += 1;
                ensure((f.instance, f.triangle) == (s.instance, s.triangle), || format!("hit identity {f:?} vs {s:?}"))?;
                worst = worst.max((f.t - s.t).abs() / s.t);
            }
            (f, s) => return Err(format!("hit/miss disagreement {f:?} vs {s:?}")),
        }
        ensure(ray_closest_hit(&tlas_uncompacted, &ray) == fast, || "compaction changed a query".into())?;
        ensure(
            built.closest_hit(ray.origin, ray.direction, 0.0, 100.0) == compact.closest_hit(ray.origin, ray.direction, 0.0, 100.0),
            || "compaction changed a BLAS query".into(),
        )?;
    }
    ensure(worst <= 1e-6, || format!("relative t error {worst:e}"))?;
    ensure(compact.footprint().total() < built.footprint().total(), || "compaction did not shrink".into())?;
    let rebuilt = build_tlas(place(compact), 0);
    ensure(rebuilt.to_bytes() == tlas.to_bytes(), || "TLAS rebuild differs".into())?;
    Ok(format!("{hits}/1000 hits identical, max rel t error {worst:.1e}, rebuild byte-identical"))
}

fn shadow_grid() -> Outcome {
    let scene = presets::shadow_test_scene();
    let world = scene.compute_world_transforms().map_err(|e| e.to_string())?;
    let blases: Vec<Arc<Blas>> =
        scene.geometries.iter().enumerate().map(|(i, g)| Arc::new(compact_blas(build_blas(GeometryId(i as u32), g)))).collect();
    let tlas = build_tlas(instances_for_scene(&scene, &world, &blases).map_err(|e| e.to_string())?, 0);
    let l = SHADOW_LAYOUT;
    let (mut disagree, mut inside) = (0, 0);
    for i in 0..10 {
        for j in 0..10 {
            let p = Vec3::new(-2.0 + 0.4 * (i as f64 + 0.5), 0.0, -2.0 + 0.4 * (j as f64 + 0.5));
            let d = l.light - p;
            let t = ((l.sphere_center - p).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            let analytic = (p + d * t - l.sphere_center).length() < l.sphere_radius;
            let traced = shadow_visibility(&tlas, p, Vec3::Y, l.light) == 0.0;
            inside += analytic as usize;
            disagree += (analytic != traced) as usize;
        }
    }
    ensure(disagree <= 1, || format!("{disagree} cells disagree"))?;
    Ok(format!("{inside} shadowed cells, {disagree} disagreements"))
}

fn render_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for (tag, threads) in [("a", None), ("b", None), ("t1", Some("1")), ("t3", Some("3"))] {
        let prefix = dir.path().join(tag);
        let mut args = vec!["render", "--scene", "builtin:shadow", "--width", "64", "--height", "64", "--out", prefix.to_str().unwrap()];
        if let Some(t) = threads {
            args.extend(["--threads", t]);
        }
        run(&args)?;
        files.push(std::fs::read(format!("{}-frame-0000.ppm", prefix.display())).map_err(|e| e.to_string())?);
    }
    ensure(files.iter().all(|f| *f == files[0]), || "renders differ".into())?;
    let hash: String = Sha256::digest(&files[0]).iter().map(|b| format!("{b:02x}")).collect();
    let path = golden("render_shadow_64.sha256");
    if bless() {
        std::fs::write(&path, format!("{hash}\n")).map_err(|e| e.to_string())?;
    }
    let expect = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    ensure(expect.trim() == hash, || format!("hash {hash} does not match golden {}", expect.trim()))?;
    Ok(format!("4 renders identical, sha256 {}", &hash[..16]))
}

fn render(scene: Scene, cfg: RenderConfig) -> Result<LdrImage, String> {
    let mut lp = FrameLoop::new(scene, cfg).map_err(|e| e.to_string())?;
    Ok(lp.render_frame(PoseUpdate::Unchanged).map_err(|e| e.to_string())?.image)
}

fn slanted_edge(angle: f64) -> (Scene, Vec<(f64, f64)>) {
    let c = Vec3::new(-0.13, 0.07, 0.0);
    let dir = Vec3::new(angle.cos(), angle.sin(), 0.0);
    let perp = Vec3::new(angle.sin(), -angle.cos(), 0.0);
    let corners = [c - dir * 20.0, c + dir * 20.0, c + perp * 20.0];
    let mut s = Scene::new();
    s.clear_color = Vec3::ZERO;
    let v = |p: Vec3| Vertex { position: p, normal: Vec3::Z, uv: [0.0, 0.0] };
    let g = s.add_geometry(MeshGeometry { vertices: corners.iter().map(|&p| v(p)).collect(), triangles: vec![[0, 1, 2]] });
    let m = s.add_material(Vec3::ONE, 0.0, 0.5);
    s.add_node("edge", None, Mat4::IDENTITY, Some(MeshInstance { geometry: g, material: m }));
    s.add_camera("camera", Mat4::translation(Vec3::new(0.0, 0.0, 4.0)), 0.9, 0.1, 100.0);
    let f = 1.0 / 0.45f64.tan();
    let mut poly: Vec<(f64, f64)> = corners.iter().map(|p| ((p.x * f / 8.0 + 0.5) * 64.0, (0.5 - p.y * f / 8.0) * 64.0)).collect();
    let (a, b, c) = (poly[0], poly[1], poly[2]);
    if (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0) < 0.0 {
        poly.reverse();
    }
    (s, poly)
}

/// Exact area of the unit pixel at (x, y) inside a counter-clockwise convex polygon.
fn pixel_coverage(poly: &[(f64, f64)], x: f64, y: f64) -> f64 {
    let mut cell = vec![(x, y), (x + 1.0, y), (x + 1.0, y + 1.0), (x, y + 1.0)];
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let mut next = Vec::new();
        for j in 0..cell.len() {
            let (p, q) = (cell[j], cell[(j + 1) % cell.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                next.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                next.push((p.0 + (q.0 - p.0) * t, p.1 + (q.1 - p.1) * t));
            }
        }
        cell = next;
    }
    let n = cell.len();
    (0..n).map(|j| cell[j].0 * cell[(j + 1) % n].1 - cell[(j + 1) % n].0 * cell[j].1).sum::<f64>().abs() * 0.5
}

fn staircase(img: &LdrImage) -> f64 {
    let mut s = 0.0;
    for y in 0..img.height {
        for x in 0..img.width {
            let l = luma(img.get(x, y));
            if x + 1 < img.width {
                s += (luma(img.get(x + 1, y)) - l).powi(2);
            }
            if y + 1 < img.height {
                s += (luma(img.get(x, y + 1)) - l).powi(2);
            }
        }
    }
    s
}

fn anti_aliasing() -> Outcome {
    let base = RenderConfig { width: 64, height: 64, fxaa: false, shading: ShadingMode::Flat, ..RenderConfig::default() };
    let mut summary = Vec::new();
    for angle in [0.31, 0.9, 2.2] {
        let (scene, poly) = slanted_edge(angle);
        let mut errors = Vec::new();
        for msaa in [1, 2, 4, 8] {
            let img = render(scene.clone(), RenderConfig { msaa, ..base.clone() })?;
            let (mut err, mut n) = (0.0, 0);
            for y in 0..64 {
                for x in 0..64 {
                    let a = pixel_coverage(&poly, x as f64, y as f64);
                    if a > 1e-9 && a < 1.0 - 1e-9 {
                        err += (img.get(x, y)[0] as f64 / 255.0 - a).abs();
                        n += 1;
                    }
                }
            }
            errors.push(err / n as f64);
        }
        ensure(errors.windows(2).all(|w| w[1] <= w[0]), || format!("coverage error increases at angle {angle}: {errors:?}"))?;
        let aliased = render(scene, RenderConfig { msaa: 1, ..base.clone() })?;
        let (before, after) = (staircase(&aliased), staircase(&fxaa_pass(&aliased)));
        ensure(after < before, || format!("FXAA staircase {before} -> {after} at angle {angle}"))?;
        summary.push(format!("{:.3}->{:.3}", errors[0], errors[3]));
    }
    for fill in [[0, 0, 0], [128, 64, 200], [255, 255, 255]] {
        let flat = LdrImage::new(40, 30, fill);
        ensure(fxaa_pass(&flat) == flat, || "FXAA changed a flat image".into())?;
    }
    Ok(format!("coverage error 1x->8x {}; FXAA reduces staircase, flat no-op", summary.join(", ")))
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn scaling_trend() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("bench.csv");
    let scene = asset("bench_scene.gltf");
    run(&[
        "bench",
        "--scene",
        scene.to_str().unwrap(),
        "--doublings",
        "5",
        "--frames",
        "20",
        "--width",
        "256",
        "--height",
        "256",
        "--out",
        csv.to_str().unwrap(),
    ])?;
    let text = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    ensure(
        lines.next()
            == Some("doublings,triangles,tlas_mean_ms,tlas_std,main_mean_ms,main_std,post_mean_ms,post_std,overlay_mean_ms,overlay_std"),
        || "CSV header".into(),
    )?;
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|f| f.parse::<f64>().unwrap_or(f64::NAN)).collect()).collect();
    ensure(rows.len() == 6 && rows.iter().all(|r| r.len() == 10 && r.iter().all(|v| v.is_finite())), || format!("bad rows:\n{text}"))?;
    ensure(rows.windows(2).all(|w| w[1][1] == 2.0 * w[0][1]), || "triangle counts do not double".into())?;
    let col = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
    let tri = ranks(&col(1));
    let rho_tlas = pearson(&tri, &ranks(&col(2)));
    let rho_main = pearson(&tri, &ranks(&col(4)));
    let post = col(6)[5] / col(6)[0] - 1.0;
    let overlay = col(8)[5] / col(8)[0] - 1.0;
    let detail =
        format!("rho tlas {rho_tlas:.3}, rho main {rho_main:.3}, post d5/d0 {:+.1}%, overlay d5/d0 {:+.1}%", post * 100.0, overlay * 100.0);
    ensure(rho_tlas > 0.9 && rho_main > 0.9 && post.abs() <= 0.2 && overlay.abs() <= 0.2, || format!("{detail}\n{text}"))?;
    Ok(detail)
}

fn table_layout_bytes(names: &[&str], generation: u64, matrices: &[[f64; 16]]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&0x4156_4931u32.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(names.len() as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&generation.to_le_bytes());
    out.extend_from_slice(&[0; 40]);
    for (name, m) in names.iter().zip(matrices) {
        let mut field = [0u8; 64];
        field[..name.len()].copy_from_slice(name.as_bytes());
        out.extend_from_slice(&field);
        for v in m {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn stub_matrix(k: f64, theta: f64) -> [f64; 16] {
    let (s, c) = theta.sin_cos();
    [c, s, 0.0, 0.0, -s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, k, 0.0, 0.0, 1.0]
}

fn read_ppm(path: &Path) -> Result<LdrImage, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let text = String::from_utf8_lossy(&bytes[..bytes.len().min(32)]).into_owned();
    let mut parts = text.splitn(4, '\n');
    let (magic, dims, max) = (parts.next(), parts.next(), parts.next());
    ensure(magic == Some("P6") && max == Some("255"), || "not a binary PPM".into())?;
    let dims: Vec<usize> = dims.unwrap_or("").split(' ').filter_map(|d| d.parse().ok()).collect();
    let header = 3 + dims.iter().map(|d| d.to_string().len()).sum::<usize>() + 2 + 4;
    let (w, h) = (dims[0], dims[1]);
    let body = &bytes[header..];
    ensure(body.len() == w * h * 3, || "PPM size mismatch".into())?;
    Ok(LdrImage::from_fn(w, h, |x, y| {
        let i = (y * w + x) * 3;
        [body[i], body[i + 1], body[i + 2]]
    }))
}

fn interchange() -> Outcome {
    let pid = std::process::id();

    let names = ["base", "arm"];
    let roster: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let region = format!("simrender-acceptance-{pid}-golden");
    let mut w = create_table(&region, &roster, CreateMode::Reclaim).map_err(|e| e.to_string())?;
    w.write_frame(&physics_stub_step(7, &roster)).map_err(|e| e.to_string())?;
    let bytes = w.region_bytes();
    drop(w);
    let built = table_layout_bytes(&names, 2, &[stub_matrix(0.0, 0.7), stub_matrix(1.0, 1.7)]);
    ensure(bytes == built, || "region bytes differ from the layout description".into())?;
    let golden_dump = std::fs::read_to_string(golden("table_2node.hex")).map_err(|e| e.to_string())?;
    ensure(hex_dump(&bytes) == golden_dump, || "hex dump differs from golden".into())?;

    let region = format!("simrender-acceptance-{pid}-hammer");
    let roster: Vec<String> = ["probe", "a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
    let mut w = create_table(&region, &roster, CreateMode::Reclaim).map_err(|e| e.to_string())?;
    let r = attach_table(&region).map_err(|e| e.to_string())?;
    let stop = Arc::new(AtomicBool::new(false));
    let writes = Arc::new(AtomicUsize::new(0));
    let writer = {
        let (stop, writes, roster) = (stop.clone(), writes.clone(), roster.clone());
        std::thread::spawn(move || {
            let mut seq = 0u32;
            while !stop.load(Ordering::Relaxed) {
                seq += 1;
                let frame: Vec<(String, Mat4)> = roster
                    .iter()
                    .enumerate()
                    .map(|(k, n)| {
                        let mut m = Mat4::rotation_z(seq as f64 * 0.01 + k as f64);
                        m.set(0, 3, seq as f64);
                        (n.clone(), m)
                    })
                    .collect();
                w.write_frame(&frame).unwrap();
                writes.store(seq as usize, Ordering::Relaxed);
            }
        })
    };
    let (mut reads, mut torn) = (0, 0);
    while reads < 100_000 {
        let Ok(snap) = r.read_frame() else { continue };
        reads += 1;
        let sentinel = snap.get("probe").map_or(f64::NAN, |m| m.get(0, 3));
        let ok = sentinel == (snap.generation / 2) as f64 && snap.transforms.iter().all(|(_, m)| m.get(0, 3) == sentinel);
        torn += !ok as usize;
    }
    stop.store(true, Ordering::Relaxed);
    writer.join().map_err(|_| "writer panicked".to_string())?;
    ensure(torn == 0, || format!("{torn} torn snapshots"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let prefix = dir.path().join("demo");
    let shm = format!("simrender-acceptance-{pid}-demo");
    let stdout = run(&["interchange-demo", "--shm", &shm, "--frames", "4", "--out", prefix.to_str().unwrap()])?;
    let f = 1.0 / (presets::DEMO_CAMERA_FOV / 2.0).tan();
    let dist = presets::DEMO_CAMERA_DISTANCE;
    let mut worst: f64 = 0.0;
    let mut ticks = Vec::new();
    for line in stdout.lines().filter(|l| l.starts_with("frame ")) {
        let fields: Vec<&str> = line.split(' ').collect();
        let frame: u64 = fields[1].parse().map_err(|_| format!("bad line {line:?}"))?;
        let tick: u64 = fields[5].parse().map_err(|_| format!("frame {frame} has no pose tick"))?;
        let img = read_ppm(&PathBuf::from(format!("{}-frame-{frame:04}.ppm", prefix.display())))?;
        let bg = luma(img.get(0, 0));
        let peak = img.pixels.iter().map(|&p| luma(p)).fold(0.0, f64::max);
        let cut = 0.5 * (bg + peak);
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..img.height {
            for x in 0..img.width {
                if luma(img.get(x, y)) > cut {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1.0;
                }
            }
        }
        ensure(n > 0.0, || format!("frame {frame}: cube not visible"))?;
        let theta = 0.1 * tick as f64;
        let c = presets::DEMO_CUBE_CENTER;
        let (wx, wy) = (c.x * theta.cos() - c.y * theta.sin(), c.x * theta.sin() + c.y * theta.cos());
        let ex = (wx * f / dist * 0.5 + 0.5) * img.width as f64;
        let ey = (0.5 - wy * f / dist * 0.5) * img.height as f64;
        worst = worst.max(((sx / n - ex).powi(2) + (sy / n - ey).powi(2)).sqrt());
        ticks.push(tick);
    }
    ensure(ticks.len() == 4, || format!("expected 4 frames, got {}", ticks.len()))?;
    ensure(ticks.windows(2).all(|w| w[1] > w[0]), || format!("ticks not increasing: {ticks:?}"))?;
    ensure(worst <= 1.0, || format!("centroid off by {worst:.3} px"))?;
    Ok(format!(
        "golden dump matches, {reads} reads over {} writes with 0 torn, centroid error {worst:.3} px at ticks {ticks:?}",
        writes.load(Ordering::Relaxed)
    ))
}

fn lifecycle() -> Outcome {
    let cfg = RenderConfig { width: 16, height: 16, ..RenderConfig::default() };
    let mut lp = FrameLoop::new(presets::triangle_scene(), cfg).map_err(|e| e.to_string())?;
    let ran = Arc::new(AtomicUsize::new(0));
    let mut after_frame = Vec::new();
    for frame in 0..5 {
        lp.render_frame(PoseUpdate::Unchanged).map_err(|e| e.to_string())?;
        if frame == 0 {
            let ran = ran.clone();
            lp.resources_mut().defer_frame("probe", move || {
                ran.fetch_add(1, Ordering::SeqCst);
            });
        }
        after_frame.push(ran.load(Ordering::SeqCst));
    }
    ensure(after_frame == [0, 0, 1, 1, 1], || format!("probe ran counts per frame {after_frame:?}"))?;
    let report = lp.shutdown();
    let probe: Vec<_> = report.events.iter().filter(|e| e.label == "probe").collect();
    ensure(probe.len() == 1 && probe[0].frame == Some(2), || format!("probe events {probe:?}"))?;
    let mut labels: Vec<&str> = report.events.iter().map(|e| e.label.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    ensure(report.registered == report.ran && labels.len() == report.events.len(), || {
        format!("registered {} ran {} events {}", report.registered, report.ran, report.events.len())
    })?;
    Ok(format!("probe ran at frame 2, {} finalizers each ran once", report.ran))
}

type Criterion = (u32, &'static str, fn() -> Outcome, Option<f64>);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "BRDF suite", brdf_suite, Some(30.0)),
        (2, "colour pipeline", colour_pipeline, None),
        (3, "BVH oracle equivalence", bvh_oracle, Some(10.0)),
        (4, "shadow correctness", shadow_grid, None),
        (5, "rendering determinism", render_determinism, None),
        (6, "anti-aliasing", anti_aliasing, None),
        (7, "scaling trend", scaling_trend, Some(300.0)),
        (8, "interchange", interchange, None),
        (9, "lifecycle", lifecycle, None),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, check, budget) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let mut outcome = check();
        let secs = start.elapsed().as_secs_f64();
        if let (Ok(_), Some(limit)) = (&outcome, budget) {
            if secs > limit {
                outcome = Err(format!("took {secs:.1} s, limit {limit} s"));
            }
        }
        match outcome {
            Ok(detail) => println!("criterion {n} {name}: PASS ({detail}; {secs:.1} s)"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({why}; {secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
