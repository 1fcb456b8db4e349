//! Screen tiling and per-tile depth ordering of splat instances.

use rayon::prelude::*;

use crate::camera::ScreenSplat;
use crate::scalar::Real;

pub const DEFAULT_TILE_PX: usize = 16;

/// Tiles covering the image and, per tile, a contiguous range of the sorted
/// instance list.
#[derive(Clone, Debug, PartialEq)]
pub struct TileGrid {
    pub tile_px: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub width: usize,
    pub height: usize,
    /// `[start, end)` into `instances`, one entry per tile in row-major order.
    pub ranges: Vec<(usize, usize)>,
    /// Positions into the splat list, sorted by (tile, depth, primitive index).
    pub instances: Vec<u32>,
}

impl TileGrid {
    pub fn tile_count(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Pixel rectangle `[x0, x1) × [y0, y1)` of a tile.
    pub fn tile_rect(&self, tile: usize) -> (usize, usize, usize, usize) {
        let (tx, ty) = (tile % self.tiles_x, tile / self.tiles_x);
        let x0 = tx * self.tile_px;
        let y0 = ty * self.tile_px;
        (x0, (x0 + self.tile_px).min(self.width), y0, (y0 + self.tile_px).min(self.height))
    }

    pub fn tile_instances(&self, tile: usize) -> &[u32] {
        let (a, b) = self.ranges[tile];
        &self.instances[a..b]
    }
}

fn circle_meets_rect<T: Real>(c: [T; 2], r: T, x0: usize, x1: usize, y0: usize, y1: usize) -> bool {
    let clamp = |v: T, lo: usize, hi: usize| v.max(T::from_usize_lossy(lo)).min(T::from_usize_lossy(hi));
    let px = clamp(c[0], x0, x1);
    let py = clamp(c[1], y0, y1);
    let (dx, dy) = (c[0] - px, c[1] - py);
    dx * dx + dy * dy <= r * r
}

/// Duplicates every splat into each tile its radius circle overlaps and
/// sorts the instances by tile, then depth, then primitive index.
pub fn bin_and_sort<T: Real>(splats: &[ScreenSplat<T>], width: usize, height: usize, tile_px: usize) -> TileGrid {
    let tile_px = tile_px.max(1);
    let tiles_x = width.div_ceil(tile_px);
    let tiles_y = height.div_ceil(tile_px);
    let mut keyed: Vec<(u32, T, u32, u32)> = splats
        .par_iter()
        .enumerate()
        .flat_map_iter(|(pos, s)| {
            let r = s.radius;
            let span = |c: T, n: usize| {
                let t = T::from_usize_lossy(tile_px);
                let lo = ((c - r) / t).floor().to_f64_lossy().max(0.0);
                let hi = ((c + r) / t).floor().to_f64_lossy().min(n as f64 - 1.0);
                (lo as i64, hi as i64)
            };
            let (tx0, tx1) = span(s.mean2d[0], tiles_x);
            let (ty0, ty1) = span(s.mean2d[1], tiles_y);
            let mut out = Vec::new();
            for ty in ty0..=ty1 {
                for tx in tx0..=tx1 {
                    let (tx, ty) = (tx as usize, ty as usize);
                    let x0 = tx * tile_px;
                    let y0 = ty * tile_px;
                    let x1 = (x0 + tile_px).min(width);
                    let y1 = (y0 + tile_px).min(height);
                    if circle_meets_rect(s.mean2d, r, x0, x1, y0, y1) {
                        out.push(((ty * tiles_x + tx) as u32, s.depth, s.index as u32, pos as u32));
                    }
                }
            }
            out
        })
        .collect();
    // keys are unique, so the unstable parallel sort is still deterministic
    keyed.par_sort_unstable_by(|p, q| {
        p.0.cmp(&q.0).then(p.1.partial_cmp(&q.1).unwrap_or(std::cmp::Ordering::Equal)).then(p.2.cmp(&q.2))
    });

    let n_tiles = tiles_x * tiles_y;
    let mut ranges = vec![(0usize, 0usize); n_tiles];
    let mut i = 0;
    for (tile, range) in ranges.iter_mut().enumerate() {
        let start = i;
        while i < keyed.len() && keyed[i].0 as usize == tile {
            i += 1;
        }
        *range = (start, i);
    }
    TileGrid {
        tile_px,
        tiles_x,
        tiles_y,
        width,
        height,
        ranges,
        instances: keyed.into_iter().map(|k| k.3).collect(),
    }
}
