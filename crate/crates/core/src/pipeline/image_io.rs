use std::path::Path;

use super::framebuffer::LdrImage;
use super::RenderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Png => "png",
        }
    }
}

/// Binary P6: `P6\n{w} {h}\n255\n` followed by row-major RGB.
pub fn encode_ppm(img: &LdrImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve(img.pixels.len() * 3);
    for p in &img.pixels {
        out.extend_from_slice(p);
    }
    out
}

pub fn encode_png(img: &LdrImage) -> Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&img.as_bytes())?;
    writer.finish()?;
    Ok(out)
}

pub fn write_image(img: &LdrImage, path: &Path, format: ImageFormat) -> Result<(), RenderError> {
    let io = |source| RenderError::Io { path: path.display().to_string(), source };
    let bytes = match format {
        ImageFormat::Ppm => encode_ppm(img),
        ImageFormat::Png => encode_png(img).map_err(|e| io(std::io::Error::other(e)))?,
    };
    std::fs::write(path, bytes).map_err(io)
}
