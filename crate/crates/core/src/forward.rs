//! Forward rasterization: projection, tiling and front-to-back blending.

use std::hash::{DefaultHasher, Hash, Hasher};

use rayon::prelude::*;

use crate::camera::{project_splat, CameraView, ProjectParams, ScreenSplat};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::kernel::{ALPHA_MAX, ALPHA_MIN};
use crate::scalar::Real;
use crate::scene::Scene;
use crate::tiles::{bin_and_sort, TileGrid, DEFAULT_TILE_PX};

/// Blending stops before transmittance would fall below this.
pub const T_MIN: f64 = 1e-4;
/// Largest image the rasterizer accepts, in pixels.
pub const MAX_PIXELS: usize = 1 << 28;
/// Marks pixels where nothing was blended.
pub const NO_INSTANCE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderConfig<T> {
    pub project: ProjectParams<T>,
    pub tile_px: usize,
    /// Overrides the scene background when set.
    pub background: Option<[T; 3]>,
    /// Damping `λ` of the opacity gradient by `1 / (1 + λ‖β₂D‖²)`.
    pub opacity_grad_damping: T,
}

impl<T: Real> Default for RenderConfig<T> {
    fn default() -> Self {
        Self {
            project: ProjectParams::default(),
            tile_px: DEFAULT_TILE_PX,
            background: None,
            opacity_grad_damping: T::zero(),
        }
    }
}

/// Rendered image plus everything the backward pass needs to replay it.
#[derive(Clone, Debug)]
pub struct FrameBundle<T> {
    pub color: Image<T>,
    pub final_t: Vec<T>,
    pub n_contrib: Vec<u32>,
    /// Instance-list position of the last blended instance per pixel, or
    /// [`NO_INSTANCE`].
    pub last_idx: Vec<u32>,
    pub splats: Vec<ScreenSplat<T>>,
    pub grid: TileGrid,
    pub background: [T; 3],
    /// Skew projections that fell back to zero skew.
    pub skew_fallbacks: usize,
    pub fingerprint: u64,
}

/// Hash of everything a frame depends on, so a backward pass can refuse a
/// frame rendered from a different snapshot or view.
pub fn fingerprint<T: Real>(scene: &Scene<T>, view: &CameraView<T>) -> u64 {
    let mut h = DefaultHasher::new();
    let mut put = |v: T| v.to_f64_lossy().to_bits().hash(&mut h);
    for g in &scene.primitives {
        g.mu.iter()
            .chain(&g.log_scale)
            .chain(&g.rot)
            .chain(&g.opacity_logits)
            .chain(&g.beta)
            .chain(&g.dir)
            .chain(g.sh.iter().flatten())
            .for_each(|v| put(*v));
    }
    view.c2w.iter().flatten().for_each(|v| put(*v));
    [view.fov_x, view.fov_y, view.near, view.far].into_iter().for_each(&mut put);
    (scene.len(), view.width, view.height, view.convention as u8).hash(&mut h);
    h.finish()
}

/// Per-pixel evaluation of one splat.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PixelEval<T> {
    pub dx: T,
    pub dy: T,
    /// Gaussian envelope `G′`.
    pub g: T,
    /// Skew modulation `1 + erf(z)`.
    pub m: T,
    pub z: T,
    /// `erf(w / √2)` of the opacity boundary.
    pub e: T,
    pub w: T,
    /// Enhanced opacity `o(x)`.
    pub o: T,
    pub alpha: T,
    pub clamped: bool,
}

/// Opacity of splat `s` at pixel `(px, py)`, or `None` when it does not
/// contribute there.
#[inline]
pub(crate) fn eval_pixel<T: Real>(s: &ScreenSplat<T>, px: usize, py: usize) -> Option<PixelEval<T>> {
    let half = T::lit(0.5);
    let dx = T::from_usize_lossy(px) + half - s.mean2d[0];
    let dy = T::from_usize_lossy(py) + half - s.mean2d[1];
    if dx * dx + dy * dy > s.radius * s.radius {
        return None;
    }
    let power = s.conic.power(dx, dy);
    if power > T::zero() {
        return None;
    }
    let g = power.exp();
    let [p1, p2] = s.opacity_pair;
    // o ≤ max(p1, p2) and 1 + erf ≤ 2 bound α before the erf calls
    if T::lit(2.0) * p1.max(p2) * g < T::lit(ALPHA_MIN) {
        return None;
    }
    let z = s.skew2d.dot(dx, dy) / T::SQRT_2();
    let m = T::one() + z.erf();
    let w = s.boundary2d.dot(dx, dy);
    let e = (w / T::SQRT_2()).erf();
    let o = half * ((p1 + p2) + (p1 - p2) * e);
    let raw = o * g * m;
    let max = T::lit(ALPHA_MAX);
    let (alpha, clamped) = if raw > max { (max, true) } else { (raw, false) };
    if alpha < T::lit(ALPHA_MIN) {
        return None;
    }
    Some(PixelEval { dx, dy, g, m, z, e, w, o, alpha, clamped })
}

struct TileOut<T> {
    color: Vec<T>,
    final_t: Vec<T>,
    n_contrib: Vec<u32>,
    last_idx: Vec<u32>,
}

fn blend_tile<T: Real>(grid: &TileGrid, splats: &[ScreenSplat<T>], tile: usize, bg: [T; 3]) -> TileOut<T> {
    let (x0, x1, y0, y1) = grid.tile_rect(tile);
    let (start, end) = grid.ranges[tile];
    let n = (x1 - x0) * (y1 - y0);
    let mut out = TileOut {
        color: Vec::with_capacity(n * 3),
        final_t: Vec::with_capacity(n),
        n_contrib: Vec::with_capacity(n),
        last_idx: Vec::with_capacity(n),
    };
    let t_min = T::lit(T_MIN);
    for py in y0..y1 {
        for px in x0..x1 {
            let mut t = T::one();
            let mut c = [T::zero(); 3];
            let mut count = 0u32;
            let mut last = NO_INSTANCE;
            for inst in start..end {
                let s = &splats[grid.instances[inst] as usize];
                let Some(ev) = eval_pixel(s, px, py) else { continue };
                let next = t * (T::one() - ev.alpha);
                if next < t_min {
                    break;
                }
                let wgt = ev.alpha * t;
                for ch in 0..3 {
                    c[ch] += s.color[ch] * wgt;
                }
                t = next;
                count += 1;
                last = inst as u32;
            }
            for ch in 0..3 {
                out.color.push(c[ch] + t * bg[ch]);
            }
            out.final_t.push(t);
            out.n_contrib.push(count);
            out.last_idx.push(last);
        }
    }
    out
}

/// Projects every primitive of `scene` into `view`.
pub fn project_scene<T: Real>(scene: &Scene<T>, view: &CameraView<T>, cfg: &RenderConfig<T>) -> Vec<ScreenSplat<T>> {
    let ctx = view.context();
    scene
        .primitives
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| project_splat(g, i, &ctx, &cfg.project))
        .collect()
}

/// Renders `scene` from `view`.
pub fn render_forward<T: Real>(scene: &Scene<T>, view: &CameraView<T>, cfg: &RenderConfig<T>) -> Result<FrameBundle<T>> {
    let (w, h) = (view.width, view.height);
    if w.checked_mul(h).is_none_or(|n| n > MAX_PIXELS) || w > u32::MAX as usize {
        return Err(Error::ImageTooLarge { width: w, height: h });
    }
    view.validate()?;
    let splats = project_scene(scene, view, cfg);
    let grid = bin_and_sort(&splats, w, h, cfg.tile_px);
    if grid.instances.len() >= NO_INSTANCE as usize {
        return Err(Error::ImageTooLarge { width: w, height: h });
    }
    let bg = cfg.background.unwrap_or(scene.background);
    let tiles: Vec<TileOut<T>> = (0..grid.tile_count())
        .into_par_iter()
        .map(|tile| blend_tile(&grid, &splats, tile, bg))
        .collect();

    let mut color = Image::new(w, h);
    let mut final_t = vec![T::zero(); w * h];
    let mut n_contrib = vec![0u32; w * h];
    let mut last_idx = vec![NO_INSTANCE; w * h];
    for (tile, out) in tiles.into_iter().enumerate() {
        let (x0, x1, y0, y1) = grid.tile_rect(tile);
        let mut k = 0;
        for py in y0..y1 {
            for px in x0..x1 {
                let p = py * w + px;
                color.data[p * 3..p * 3 + 3].copy_from_slice(&out.color[k * 3..k * 3 + 3]);
                final_t[p] = out.final_t[k];
                n_contrib[p] = out.n_contrib[k];
                last_idx[p] = out.last_idx[k];
                k += 1;
            }
        }
    }
    let skew_fallbacks = splats.iter().map(|s| s.skew_fallbacks as usize).sum();
    Ok(FrameBundle {
        color,
        final_t,
        n_contrib,
        last_idx,
        splats,
        grid,
        background: bg,
        skew_fallbacks,
        fingerprint: fingerprint(scene, view),
    })
}

/// Convenience wrapper returning only the image.
pub fn render_image<T: Real>(scene: &Scene<T>, view: &CameraView<T>, cfg: &RenderConfig<T>) -> Result<Image<T>> {
    Ok(render_forward(scene, view, cfg)?.color)
}
