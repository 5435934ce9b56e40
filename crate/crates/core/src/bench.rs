//! Scaling benchmark: repeatedly double the scene's instances and record
//! per-stage frame timings.

use crate::pipeline::{FrameLoop, FrameTiming, PoseUpdate, RenderConfig, RenderError};
use crate::scene::Scene;

pub const BENCH_CSV_HEADER: &str =
    "doublings,triangles,tlas_mean_ms,tlas_std,main_mean_ms,main_std,post_mean_ms,post_std,overlay_mean_ms,overlay_std";
pub const MIN_MEASURED_FRAMES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRecord {
    pub doublings: u32,
    pub triangles: usize,
    pub tlas: Stat,
    pub main: Stat,
    pub post: Stat,
    pub overlay: Stat,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.doublings,
            self.triangles,
            self.tlas.mean,
            self.tlas.std,
            self.main.mean,
            self.main.std,
            self.post.mean,
            self.post.std,
            self.overlay.mean,
            self.overlay.std
        )
    }

    pub fn from_csv_row(line: &str) -> Option<BenchRecord> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 10 {
            return None;
        }
        let num = |i: usize| f[i].parse::<f64>().ok();
        let stat = |i: usize| Some(Stat { mean: num(i)?, std: num(i + 1)? });
        Some(BenchRecord {
            doublings: f[0].parse().ok()?,
            triangles: f[1].parse().ok()?,
            tlas: stat(2)?,
            main: stat(4)?,
            post: stat(6)?,
            overlay: stat(8)?,
        })
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> Stat {
    if xs.is_empty() {
        return Stat { mean: 0.0, std: 0.0 };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    Stat { mean, std }
}

/// Ranks starting at 1; tied values share their average rank.
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
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation: Pearson correlation of the ranks. `NaN` when
/// either input is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return f64::NAN;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean_std(&rx).mean, mean_std(&ry).mean);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Rows are emitted for 0..=doublings.
    pub doublings: u32,
    pub frames: usize,
    pub warmup: usize,
    pub render: RenderConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("benchmark needs at least one doubling")]
    NoDoublings,
    #[error("benchmark needs at least {MIN_MEASURED_FRAMES} measured frames, got {0}")]
    TooFewFrames(usize),
    #[error("scene has no mesh instances to benchmark")]
    EmptyScene,
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Scene(#[from] crate::scene::SceneError),
}

/// Runs `warmup + frames` frames for every doubling level and summarises
/// the measured ones; `on_row` sees each record as soon as it is ready.
pub fn run_bench(scene: &Scene, cfg: &BenchConfig, mut on_row: impl FnMut(&BenchRecord)) -> Result<Vec<BenchRecord>, BenchError> {
    if cfg.doublings < 1 {
        return Err(BenchError::NoDoublings);
    }
    if cfg.frames < MIN_MEASURED_FRAMES {
        return Err(BenchError::TooFewFrames(cfg.frames));
    }
    if scene.instance_count() == 0 {
        return Err(BenchError::EmptyScene);
    }
    let mut rows = Vec::new();
    for d in 0..=cfg.doublings {
        let scaled = scene.duplicate_geometry(d)?;
        let triangles = scaled.triangle_count();
        let mut lp = FrameLoop::new(scaled, cfg.render.clone())?;
        let mut measured: Vec<FrameTiming> = Vec::with_capacity(cfg.frames);
        for i in 0..cfg.warmup + cfg.frames {
            let out = lp.render_frame(PoseUpdate::Unchanged)?;
            if i >= cfg.warmup {
                measured.push(out.timing);
            }
        }
        lp.shutdown();
        let stat = |f: fn(&FrameTiming) -> f64| mean_std(&measured.iter().map(f).collect::<Vec<_>>());
        let rec = BenchRecord {
            doublings: d,
            triangles,
            tlas: stat(|t| t.tlas_build_ms),
            main: stat(|t| t.main_pass_ms),
            post: stat(|t| t.post_process_ms),
            overlay: stat(|t| t.overlay_ms),
        };
        on_row(&rec);
        rows.push(rec);
    }
    Ok(rows)
}
