//! Writes the bundled glTF scenes: `cargo run --example export_assets -- <dir>`.

use std::path::PathBuf;

use simrender_core::scene::{export_gltf, presets};

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "assets".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, scene) in [
        ("triangle.gltf", presets::triangle_scene()),
        ("shadow_scene.gltf", presets::shadow_test_scene()),
        ("bench_scene.gltf", presets::bench_scene()),
        ("demo_cube.gltf", presets::interchange_demo_scene()),
    ] {
        std::fs::write(dir.join(name), export_gltf(&scene))?;
        println!("{}", dir.join(name).display());
    }
    Ok(())
}
