//! Single-image fitting: primitives on the plane `z = 1` in front of a
//! fixed camera with a 90° horizontal field of view, so that the plane
//! spans `x ∈ [−1, 1]` across the image width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::camera::{CameraView, Convention};
use crate::dataset::PosedImage;
use crate::error::{Error, Result};
use crate::forward::render_image;
use crate::image::Image;
use crate::linalg::{identity4, Vec3};
use crate::metrics::psnr;
use crate::scalar::Real;
use crate::scene::Scene;
use crate::train::{init_scene, LogLine, TrainConfig, Trainer};

pub const MIN_SIDE: usize = 32;

/// Fixed camera at the origin looking down +z.
pub fn plane_view<T: Real>(width: usize, height: usize) -> Result<CameraView<T>> {
    CameraView::new(identity4(), Convention::OpenCv, width, height, T::FRAC_PI_2())
}

/// Settings for image fits: no densification, faster rates than the
/// multi-view defaults, and trainable skew.
pub fn fit2d_config() -> TrainConfig {
    TrainConfig {
        iterations: 2000,
        lr_position: 2e-3,
        lr_position_final: 2e-5,
        lr_scale: 1e-2,
        lr_rot: 5e-3,
        lr_opacity: 0.05,
        lr_sh: 1e-2,
        lr_beta: 2e-2,
        lr_dir: 2e-2,
        densify_start: usize::MAX,
        densify_end: 0,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Fit2dResult<T> {
    #[serde(skip)]
    pub scene: Scene<T>,
    pub log: Vec<LogLine>,
    pub final_psnr: f64,
}

/// Random primitives on the image plane, colored by the target pixel under
/// each one.
pub fn init_plane_scene<T: Real>(target: &Image<T>, n: usize, sh_degree: usize, background: [T; 3], seed: u64) -> Scene<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aspect = target.height as f64 / target.width as f64;
    let mut points: Vec<Vec3<T>> = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = rng.random_range(-0.95..0.95);
        let y: f64 = rng.random_range(-0.95..0.95) * aspect;
        let px = (((x + 1.0) / 2.0 * target.width as f64) as usize).min(target.width - 1);
        let py = (((y / aspect + 1.0) / 2.0 * target.height as f64) as usize).min(target.height - 1);
        points.push([T::lit(x), T::lit(y), T::one()]);
        colors.push(target.get(px, py));
    }
    init_scene(&points, &colors, sh_degree, background)
}

/// Fits `n_primitives` to `target`. Depth is frozen so everything stays on
/// the plane.
pub fn fit2d<T: Real>(target: &Image<T>, n_primitives: usize, cfg: &TrainConfig, mut log: impl FnMut(&LogLine)) -> Result<Fit2dResult<T>> {
    if target.width < MIN_SIDE || target.height < MIN_SIDE {
        return Err(Error::Config(format!(
            "image must be at least {MIN_SIDE}x{MIN_SIDE}, got {}x{}",
            target.width, target.height
        )));
    }
    let view = plane_view::<T>(target.width, target.height)?;
    let views = vec![PosedImage { name: "target".into(), view: view.clone(), image: target.clone() }];
    let bg = cfg.background.map(T::lit);
    let init = init_plane_scene(target, n_primitives, 0, bg, cfg.seed);
    let mut trainer = Trainer::new(init, &views, cfg.clone())?;
    trainer.extent = 1.0;
    trainer.freeze_depth = true;
    let mut lines = Vec::new();
    trainer.run(|l| {
        log(l);
        lines.push(l.clone());
    })?;
    let out = render_image(&trainer.scene, &view, &trainer.render)?;
    let final_psnr = psnr(&out, target)?.to_f64_lossy();
    Ok(Fit2dResult { scene: trainer.scene, log: lines, final_psnr })
}

/// Left half black, right half white.
pub fn edge_image<T: Real>(width: usize, height: usize) -> Image<T> {
    Image::from_fn(width, height, |x, _| if x < width / 2 { [T::zero(); 3] } else { [T::one(); 3] })
}
