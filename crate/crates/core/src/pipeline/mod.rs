//! Frame loop: scene update, sorted draws, main pass (raster, shading,
//! shadow rays, tone map), MSAA resolve, FXAA, stats overlay, image output.

mod draw;
mod frame_loop;
mod framebuffer;
mod fxaa;
mod image_io;
mod lifecycle;
mod overlay;
mod raster;

use crate::math::Rgb;

pub use draw::{build_draw_list, pack_vertex_arena, ArenaSegment, DrawCommand, VertexArena, VertexFetch};
pub use frame_loop::{run_frame_loop, FrameLoop, FrameOutput, FrameTiming, PoseSource, PoseUpdate, RunReport, TIMING_CSV_HEADER};
pub use framebuffer::{quantize, resolve_mean, resolve_msaa, resolve_msaa_into, sample_positions, HdrFramebuffer, LdrImage};
pub use fxaa::{fxaa_into, fxaa_pass, luma, EDGE_MIN, EDGE_REL, MAX_SUBPIXEL_BLEND};
pub use image_io::{encode_png, encode_ppm, write_image, ImageFormat};
pub use lifecycle::{DeletionQueue, FinalizerEvent, FrameResources, LifecycleReport};
pub use overlay::{overlay_pass, overlay_text, FrameStats, GLYPH_SIZE};
pub use raster::{main_pass, MainPassInput};

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
    #[error("failed to write {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How fragments are coloured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShadingMode {
    /// Direct lighting, optional shadow rays, Reinhard tone map, sRGB encode.
    #[default]
    Lit,
    /// Base colour, sRGB encoded, no lighting or tone map.
    Flat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    /// 1, 2, 4 or 8.
    pub msaa: u32,
    pub fxaa: bool,
    pub shadows: bool,
    pub overlay: bool,
    /// Overrides the scene's clear colour (linear RGB).
    pub clear_color: Option<Rgb>,
    /// Paces the loop when set; unpaced otherwise.
    pub target_fps: Option<f64>,
    pub frustum_culling: bool,
    pub back_face_culling: bool,
    /// Camera node name; the first camera when unset.
    pub camera: Option<String>,
    pub shading: ShadingMode,
    /// Worker threads for the main pass; the global pool when unset.
    pub threads: Option<usize>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width: 256,
            height: 256,
            msaa: 4,
            fxaa: true,
            shadows: true,
            overlay: false,
            clear_color: None,
            target_fps: None,
            frustum_culling: false,
            back_face_culling: false,
            camera: None,
            shading: ShadingMode::Lit,
            threads: None,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::Config(format!("resolution {}x{} must be at least 1x1", self.width, self.height)));
        }
        if self.width > 16384 || self.height > 16384 {
            return Err(RenderError::Config(format!("resolution {}x{} exceeds 16384", self.width, self.height)));
        }
        if ![1, 2, 4, 8].contains(&self.msaa) {
            return Err(RenderError::Config(format!("msaa must be 1, 2, 4 or 8, got {}", self.msaa)));
        }
        if let Some(fps) = self.target_fps {
            if !(fps > 0.0 && fps.is_finite()) {
                return Err(RenderError::Config(format!("target frame rate must be positive, got {fps}")));
            }
        }
        if self.threads == Some(0) {
            return Err(RenderError::Config("thread count must be at least 1".into()));
        }
        Ok(())
    }
}
