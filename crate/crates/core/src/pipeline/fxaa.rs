use super::framebuffer::{quantize, LdrImage};

pub const EDGE_MIN: f64 = 0.0312;
pub const EDGE_REL: f64 = 0.125;
pub const MAX_SUBPIXEL_BLEND: f64 = 0.75;

pub fn luma(c: [u8; 3]) -> f64 {
    (0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64) / 255.0
}

/// Luma-edge blend. Every interior pixel runs the full evaluation, so the
/// cost does not depend on image content; border pixels are copied.
pub fn fxaa_pass(img: &LdrImage) -> LdrImage {
    let mut out = LdrImage::new(0, 0, [0; 3]);
    fxaa_into(img, &mut out, &mut Vec::new());
    out
}

/// As [`fxaa_pass`], writing into `out` and using `lum` as scratch.
pub fn fxaa_into(img: &LdrImage, out: &mut LdrImage, lum: &mut Vec<f64>) {
    let (w, h) = (img.width, img.height);
    out.clone_from(img);
    if w < 3 || h < 3 {
        return;
    }
    lum.clear();
    lum.extend(img.pixels.iter().map(|&p| luma(p)));
    let at = |x: usize, y: usize| lum[y * w + x];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let l = at(x, y);
            let (n, s, e, wv) = (at(x, y - 1), at(x, y + 1), at(x + 1, y), at(x - 1, y));
            let (nw, ne, sw, se) = (at(x - 1, y - 1), at(x + 1, y - 1), at(x - 1, y + 1), at(x + 1, y + 1));
            let max = l.max(n).max(s).max(e).max(wv);
            let min = l.min(n).min(s).min(e).min(wv);
            let contrast = max - min;
            // Second differences across rows detect horizontal edges, across columns vertical ones.
            let horizontal = 2.0 * (n + s - 2.0 * l).abs() + (nw + sw - 2.0 * wv).abs() + (ne + se - 2.0 * e).abs();
            let vertical = 2.0 * (wv + e - 2.0 * l).abs() + (nw + ne - 2.0 * n).abs() + (sw + se - 2.0 * s).abs();
            let (nx, ny) = if horizontal >= vertical {
                if (n - l).abs() >= (s - l).abs() {
                    (x, y - 1)
                } else {
                    (x, y + 1)
                }
            } else if (wv - l).abs() >= (e - l).abs() {
                (x - 1, y)
            } else {
                (x + 1, y)
            };
            let avg4 = (n + s + e + wv) * 0.25;
            let blend = if contrast > 0.0 { ((avg4 - l).abs() / contrast).clamp(0.0, MAX_SUBPIXEL_BLEND) } else { 0.0 };
            if contrast < EDGE_MIN.max(EDGE_REL * max) {
                continue;
            }
            let c = img.get(x, y);
            let o = img.get(nx, ny);
            let mixed = [0, 1, 2].map(|k| {
                let a = c[k] as f64 / 255.0;
                let b = o[k] as f64 / 255.0;
                quantize(a + (b - a) * blend)
            });
            out.set(x, y, mixed);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_image_unchanged() {
        let img = LdrImage::new(9, 7, [90, 140, 30]);
        assert_eq!(fxaa_pass(&img), img);
    }

    #[test]
    fn vertical_step_blends_adjacent_columns_only() {
        let img = LdrImage::from_fn(10, 6, |x, _| if x < 5 { [0; 3] } else { [255; 3] });
        let out = fxaa_pass(&img);
        for y in 1..5 {
            assert!(out.get(4, y)[0] > 0);
            assert!(out.get(5, y)[0] < 255);
            for x in (0..3).chain(7..10) {
                assert_eq!(out.get(x, y), img.get(x, y));
            }
        }
        assert_eq!(out.get(4, 0), [0; 3]);
    }

    #[test]
    fn tiny_images_pass_through() {
        let img = LdrImage::from_fn(2, 2, |x, y| [(x * 200) as u8, (y * 100) as u8, 0]);
        assert_eq!(fxaa_pass(&img), img);
    }
}
