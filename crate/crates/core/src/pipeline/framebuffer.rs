use crate::math::Rgb;

const SAMPLES_1: [(f64, f64); 1] = [(0.5, 0.5)];
const SAMPLES_2: [(f64, f64); 2] = [(0.25, 0.25), (0.75, 0.75)];
const SAMPLES_4: [(f64, f64); 4] = [(0.375, 0.125), (0.875, 0.375), (0.125, 0.625), (0.625, 0.875)];
// Standard 8x pattern, offsets from the centre in 1/16 pixel.
const SAMPLES_8: [(f64, f64); 8] = [
    (0.5 + 1.0 / 16.0, 0.5 - 3.0 / 16.0),
    (0.5 - 1.0 / 16.0, 0.5 + 3.0 / 16.0),
    (0.5 + 5.0 / 16.0, 0.5 + 1.0 / 16.0),
    (0.5 - 3.0 / 16.0, 0.5 - 5.0 / 16.0),
    (0.5 - 5.0 / 16.0, 0.5 + 5.0 / 16.0),
    (0.5 - 7.0 / 16.0, 0.5 - 1.0 / 16.0),
    (0.5 + 3.0 / 16.0, 0.5 + 7.0 / 16.0),
    (0.5 + 7.0 / 16.0, 0.5 - 7.0 / 16.0),
];

/// Sample positions within a pixel, `(x, y)` in `[0, 1)` with y pointing down.
///
/// # Panics
/// For counts other than 1, 2, 4 and 8.
pub fn sample_positions(samples: u32) -> &'static [(f64, f64)] {
    match samples {
        1 => &SAMPLES_1,
        2 => &SAMPLES_2,
        4 => &SAMPLES_4,
        8 => &SAMPLES_8,
        n => panic!("unsupported sample count {n}"),
    }
}

/// Multisampled colour and depth. Colour holds display-referred values.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrFramebuffer {
    pub width: usize,
    pub height: usize,
    pub samples: usize,
    /// `(y * width + x) * samples + s`
    pub color: Vec<[f32; 3]>,
    pub depth: Vec<f32>,
}

impl HdrFramebuffer {
    pub fn new(width: usize, height: usize, samples: usize, clear: [f32; 3]) -> Self {
        let mut fb = HdrFramebuffer { width: 0, height: 0, samples: 0, color: Vec::new(), depth: Vec::new() };
        fb.reset(width, height, samples, clear);
        fb
    }

    /// Resizes if needed and clears colour to `clear`, depth to +∞.
    pub fn reset(&mut self, width: usize, height: usize, samples: usize, clear: [f32; 3]) {
        let n = width * height * samples;
        self.width = width;
        self.height = height;
        self.samples = samples;
        self.color.clear();
        self.color.resize(n, clear);
        self.depth.clear();
        self.depth.resize(n, f32::INFINITY);
    }

    pub fn index(&self, x: usize, y: usize, s: usize) -> usize {
        (y * self.width + x) * self.samples + s
    }

    pub fn sample(&self, x: usize, y: usize, s: usize) -> [f32; 3] {
        self.color[self.index(x, y, s)]
    }
}

/// 8-bit RGB, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdrImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl LdrImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        LdrImage { width, height, pixels: vec![fill; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        LdrImage { width, height, pixels }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn as_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flatten().copied().collect()
    }
}

/// Round half up to 8 bits.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Per-pixel mean of the samples, before quantisation.
pub fn resolve_mean(fb: &HdrFramebuffer) -> Vec<Rgb> {
    let n = fb.samples.max(1);
    fb.color
        .chunks_exact(n)
        .map(|px| {
            let mut acc = [0.0f64; 3];
            for s in px {
                for c in 0..3 {
                    acc[c] += s[c] as f64;
                }
            }
            Rgb::new(acc[0] / n as f64, acc[1] / n as f64, acc[2] / n as f64)
        })
        .collect()
}

pub fn resolve_msaa(fb: &HdrFramebuffer) -> LdrImage {
    let mut out = LdrImage::new(0, 0, [0; 3]);
    resolve_msaa_into(fb, &mut out);
    out
}

/// Resolves into `out`, reusing its storage.
pub fn resolve_msaa_into(fb: &HdrFramebuffer, out: &mut LdrImage) {
    let n = fb.samples.max(1);
    out.width = fb.width;
    out.height = fb.height;
    out.pixels.clear();
    out.pixels.extend(fb.color.chunks_exact(n).map(|px| {
        let mut acc = [0.0f64; 3];
        for s in px {
            for c in 0..3 {
                acc[c] += s[c] as f64;
            }
        }
        acc.map(|v| quantize(v / n as f64))
    }));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_tables_lie_inside_the_pixel() {
        for n in [1, 2, 4, 8] {
            let s = sample_positions(n);
            assert_eq!(s.len(), n as usize);
            for &(x, y) in s {
                assert!((0.0..1.0).contains(&x) && (0.0..1.0).contains(&y));
                // exactly representable in 1/256 pixel fixed point
                assert_eq!((x * 256.0).fract(), 0.0);
                assert_eq!((y * 256.0).fract(), 0.0);
            }
        }
    }

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.5 / 255.0), 1);
        assert_eq!(quantize(-1.0), 0);
        assert_eq!(quantize(2.0), 255);
    }

    #[test]
    fn single_sample_resolve_is_quantisation() {
        let mut fb = HdrFramebuffer::new(2, 1, 1, [0.0; 3]);
        fb.color[1] = [0.2, 0.4, 1.0];
        let img = resolve_msaa(&fb);
        assert_eq!(img.pixels, vec![[0, 0, 0], [quantize(0.2f32 as f64), quantize(0.4f32 as f64), 255]]);
    }

    #[test]
    fn half_covered_pixel_is_mid_grey() {
        let mut fb = HdrFramebuffer::new(1, 1, 4, [0.0; 3]);
        fb.color[0] = [1.0; 3];
        fb.color[2] = [1.0; 3];
        assert_eq!(resolve_mean(&fb)[0], Rgb::splat(0.5));
        assert_eq!(resolve_msaa(&fb).pixels[0], [128; 3]);
    }
}
