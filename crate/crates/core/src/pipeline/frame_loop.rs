use std::sync::Arc;
use std::time::{Duration, Instant};

use super::draw::{build_draw_list, pack_vertex_arena, VertexArena};
use super::framebuffer::{resolve_msaa_into, HdrFramebuffer, LdrImage};
use super::fxaa::fxaa_into;
use super::lifecycle::{FrameResources, LifecycleReport};
use super::overlay::{overlay_pass, overlay_text, FrameStats};
use super::raster::{main_pass, MainPassInput};
use super::{RenderConfig, RenderError};
use crate::accel::{build_blas, build_tlas, compact_blas, instances_for_scene, Blas};
use crate::interchange::{TableReader, TransformSnapshot};
use crate::math::Vec3;
use crate::scene::{GeometryId, Scene};

pub const TIMING_CSV_HEADER: &str = "frame,tlas_build_ms,main_pass_ms,post_process_ms,overlay_ms";

/// Wall-clock stage durations of one frame. Post-processing is resolve plus FXAA.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub frame: u64,
    pub tlas_build_ms: f64,
    pub main_pass_ms: f64,
    pub post_process_ms: f64,
    pub overlay_ms: f64,
}

impl FrameTiming {
    pub fn csv_row(&self) -> String {
        format!("{},{:.6},{:.6},{:.6},{:.6}", self.frame, self.tlas_build_ms, self.main_pass_ms, self.post_process_ms, self.overlay_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PoseUpdate {
    Snapshot(TransformSnapshot),
    Unchanged,
    /// The source could not deliver; the previous poses stay in effect.
    Unavailable(String),
}

pub trait PoseSource {
    fn poll(&mut self) -> PoseUpdate;
}

impl PoseSource for TableReader {
    fn poll(&mut self) -> PoseUpdate {
        if !self.is_attached() {
            return PoseUpdate::Unavailable("shared region was removed".into());
        }
        match self.read_frame() {
            Ok(s) => PoseUpdate::Snapshot(s),
            Err(e) => PoseUpdate::Unavailable(e.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub frame: u64,
    pub image: LdrImage,
    pub timing: FrameTiming,
    /// Generation of the pose snapshot in effect, if any was ever applied.
    pub pose_generation: Option<u64>,
    pub camera: Vec3,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Per-slot images reused from two frames earlier.
struct Attachments {
    samples: HdrFramebuffer,
    resolved: LdrImage,
    filtered: LdrImage,
    luma: Vec<f64>,
}

impl Attachments {
    fn new() -> Self {
        Attachments {
            samples: HdrFramebuffer::new(1, 1, 1, [0.0; 3]),
            resolved: LdrImage::new(0, 0, [0; 3]),
            filtered: LdrImage::new(0, 0, [0; 3]),
            luma: Vec::new(),
        }
    }
}

/// Long-lived renderer state: per-geometry BLASes, the vertex arena and the
/// two recycled frame slots.
pub struct FrameLoop {
    scene: Scene,
    config: RenderConfig,
    blases: Vec<Arc<Blas>>,
    arena: Arc<VertexArena>,
    resources: FrameResources,
    attachments: [Option<Attachments>; 2],
    pool: Option<rayon::ThreadPool>,
    frame: u64,
    pose_warnings: usize,
    last_warning: Option<String>,
    pose_generation: Option<u64>,
    last_frame_ms: f64,
}

impl FrameLoop {
    pub fn new(scene: Scene, config: RenderConfig) -> Result<Self, RenderError> {
        config.validate()?;
        scene.validate()?;
        let pool = match config.threads {
            Some(n) => {
                Some(rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| RenderError::Config(format!("thread pool: {e}")))?)
            }
            None => None,
        };
        let blases: Vec<Arc<Blas>> =
            scene.geometries.iter().enumerate().map(|(i, g)| Arc::new(compact_blas(build_blas(GeometryId(i as u32), g)))).collect();
        let arena = Arc::new(pack_vertex_arena(&scene));
        let mut resources = FrameResources::new();
        for b in &blases {
            let b = b.clone();
            resources.defer_main(format!("blas {}", b.geometry().0), move || drop(b));
        }
        let a = arena.clone();
        resources.defer_main("vertex arena", move || drop(a));
        Ok(FrameLoop {
            scene,
            config,
            blases,
            arena,
            resources,
            attachments: [None, None],
            pool,
            frame: 0,
            pose_warnings: 0,
            last_warning: None,
            pose_generation: None,
            last_frame_ms: 0.0,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    pub fn resources_mut(&mut self) -> &mut FrameResources {
        &mut self.resources
    }

    pub fn next_frame(&self) -> u64 {
        self.frame
    }

    pub fn pose_warnings(&self) -> usize {
        self.pose_warnings
    }

    pub fn last_warning(&self) -> Option<&str> {
        self.last_warning.as_deref()
    }

    pub fn render_frame(&mut self, poses: PoseUpdate) -> Result<FrameOutput, RenderError> {
        let start = Instant::now();
        let frame = self.frame;
        let slot = self.resources.begin_frame(frame);
        match poses {
            PoseUpdate::Snapshot(s) => {
                self.scene.apply_transform_table(&s);
                self.pose_generation = Some(s.generation);
            }
            PoseUpdate::Unchanged => {}
            PoseUpdate::Unavailable(msg) => {
                self.pose_warnings += 1;
                self.last_warning = Some(msg);
            }
        }
        let world = self.scene.compute_world_transforms()?;

        let t = Instant::now();
        let tlas = Arc::new(build_tlas(instances_for_scene(&self.scene, &world, &self.blases)?, frame));
        let tlas_build_ms = ms(t.elapsed());

        let draws = build_draw_list(&self.scene, &world);
        let mut att = self.attachments[slot].take().unwrap_or_else(Attachments::new);
        let t = Instant::now();
        let input = MainPassInput {
            scene: &self.scene,
            world: &world,
            tlas: &tlas,
            vertices: self.arena.as_ref(),
            draws: &draws,
            config: &self.config,
        };
        match &self.pool {
            Some(pool) => pool.install(|| main_pass(&input, &mut att.samples))?,
            None => main_pass(&input, &mut att.samples)?,
        }
        let main_pass_ms = ms(t.elapsed());

        let t = Instant::now();
        resolve_msaa_into(&att.samples, &mut att.resolved);
        if self.config.fxaa {
            fxaa_into(&att.resolved, &mut att.filtered, &mut att.luma);
        }
        let post_process_ms = ms(t.elapsed());
        let image = if self.config.fxaa { &mut att.filtered } else { &mut att.resolved };

        let camera = self.camera_position(&world);
        let t = Instant::now();
        if self.config.overlay {
            let stats = FrameStats { frame, frame_time_ms: self.last_frame_ms, camera };
            overlay_pass(image, &overlay_text(&stats));
        }
        let overlay_ms = ms(t.elapsed());
        let image = image.clone();

        self.attachments[slot] = Some(att);
        self.resources.defer_frame(format!("frame {frame} tlas"), move || drop(tlas));
        self.frame += 1;
        self.last_frame_ms = ms(start.elapsed());
        Ok(FrameOutput {
            frame,
            image,
            timing: FrameTiming { frame, tlas_build_ms, main_pass_ms, post_process_ms, overlay_ms },
            pose_generation: self.pose_generation,
            camera,
        })
    }

    fn camera_position(&self, world: &crate::scene::WorldTransforms) -> Vec3 {
        let cam = match &self.config.camera {
            Some(n) => self.scene.find_camera(n),
            None => self.scene.cameras.first(),
        };
        cam.map_or(Vec3::ZERO, |c| world.get(c.node).transform_point(Vec3::ZERO))
    }

    /// Runs every outstanding finalizer and reports the counts.
    pub fn shutdown(self) -> LifecycleReport {
        let FrameLoop { resources, blases, arena, .. } = self;
        drop((blases, arena));
        resources.shutdown()
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub timings: Vec<FrameTiming>,
    pub pose_warnings: usize,
    pub last_warning: Option<String>,
    pub lifecycle: LifecycleReport,
}

/// Renders `frames` frames, handing each to `sink` (typically an image
/// writer). With `config.target_fps` set, each frame is padded to the period.
pub fn run_frame_loop(
    scene: Scene,
    config: RenderConfig,
    frames: u64,
    mut poses: Option<&mut dyn PoseSource>,
    mut sink: impl FnMut(&FrameOutput) -> Result<(), RenderError>,
) -> Result<RunReport, RenderError> {
    let period = config.target_fps.map(|f| Duration::from_secs_f64(1.0 / f));
    let mut lp = FrameLoop::new(scene, config)?;
    let mut timings = Vec::with_capacity(frames as usize);
    for _ in 0..frames {
        let start = Instant::now();
        let update = match poses.as_deref_mut() {
            Some(p) => p.poll(),
            None => PoseUpdate::Unchanged,
        };
        let out = lp.render_frame(update)?;
        sink(&out)?;
        timings.push(out.timing);
        if let Some(p) = period {
            if let Some(rest) = p.checked_sub(start.elapsed()) {
                std::thread::sleep(rest);
            }
        }
    }
    let pose_warnings = lp.pose_warnings();
    let last_warning = lp.last_warning().map(str::to_string);
    let lifecycle = lp.shutdown();
    Ok(RunReport { timings, pose_warnings, last_warning, lifecycle })
}
