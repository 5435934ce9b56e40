use font8x8::{UnicodeFonts, BASIC_FONTS};

use super::framebuffer::LdrImage;
use crate::math::Vec3;

pub const GLYPH_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub frame: u64,
    pub frame_time_ms: f64,
    pub camera: Vec3,
}

pub fn overlay_text(stats: &FrameStats) -> Vec<String> {
    vec![
        format!("frame {}", stats.frame),
        format!("{:.2} ms", stats.frame_time_ms),
        format!("cam {:.2} {:.2} {:.2}", stats.camera.x, stats.camera.y, stats.camera.z),
    ]
}

/// Draws `lines` top-left in white on black cells; clipped at the image edges.
/// Characters outside the font's basic range render as '?'.
pub fn overlay_pass(img: &mut LdrImage, lines: &[String]) {
    for (row, line) in lines.iter().enumerate() {
        let y0 = row * GLYPH_SIZE;
        if y0 >= img.height {
            break;
        }
        for (col, ch) in line.chars().enumerate() {
            let x0 = col * GLYPH_SIZE;
            if x0 >= img.width {
                break;
            }
            let glyph = BASIC_FONTS.get(ch).or_else(|| BASIC_FONTS.get('?')).unwrap_or([0; 8]);
            for (gy, bits) in glyph.iter().enumerate() {
                let y = y0 + gy;
                if y >= img.height {
                    break;
                }
                for gx in 0..GLYPH_SIZE {
                    let x = x0 + gx;
                    if x >= img.width {
                        break;
                    }
                    let on = bits & (1 << gx) != 0;
                    img.set(x, y, if on { [255; 3] } else { [0; 3] });
                }
            }
        }
    }
}
