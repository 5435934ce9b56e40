//! Headless renderer for simulation scenes: glTF-subset scene graph,
//! Cook-Torrance shading, two-level BVH shadow rays, an MSAA rasterizer
//! with FXAA and a stats overlay, and a shared-memory transform table fed by
//! an external physics process.

pub mod accel;
pub mod bench;
pub mod interchange;
pub mod math;
pub mod pipeline;
pub mod scene;
pub mod shading;
