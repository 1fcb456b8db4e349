//! Multi-view fitting and evaluation, plus the synthetic blob scene used to
//! check that a fit recovers something the renderer itself produced.

use serde::Serialize;

use crate::dataset::{frame_name, orbit, Dataset, PosedImage};
use crate::error::{Error, Result};
use crate::forward::{render_image, RenderConfig};
use crate::metrics::{metrics, Metrics};
use crate::scalar::Real;
use crate::scene::{Scene, SkewGaussian};
use crate::train::{random_box_scene, LogLine, TrainConfig, Trainer};

/// Three colored blobs around the origin, one of them skewed.
pub fn blob_scene<T: Real>() -> Scene<T> {
    let l = T::lit;
    let mut s = Scene::new(0);
    let mut a = SkewGaussian::isotropic([l(-0.45), l(0.1), l(0.0)], l(0.3), [l(0.9), l(0.2), l(0.15)], l(0.9), 0);
    a.log_scale = [l(0.35f64.ln()), l(0.2f64.ln()), l(0.25f64.ln())];
    let b = SkewGaussian::isotropic([l(0.4), l(-0.15), l(0.3)], l(0.25), [l(0.15), l(0.85), l(0.25)], l(0.85), 0);
    let mut c = SkewGaussian::isotropic([l(0.1), l(0.35), l(-0.4)], l(0.22), [l(0.2), l(0.3), l(0.9)], l(0.8), 0);
    c.beta = [l(1.5), l(0.0), l(-1.0)];
    c.rot = [l(0.92), l(0.2), l(0.3), l(0.1)];
    c.normalize_rotation();
    s.push(a);
    s.push(b);
    s.push(c);
    s
}

/// Renders `scene` from `n` orbit cameras at radius 3.5 into posed images.
pub fn orbit_dataset<T: Real>(scene: &Scene<T>, n: usize, width: usize, height: usize) -> Result<Vec<PosedImage<T>>> {
    let cfg = RenderConfig::default();
    orbit([T::zero(); 3], T::lit(3.5), T::lit(1.0), n, width, height, T::lit(0.9))?
        .into_iter()
        .enumerate()
        .map(|(i, view)| Ok(PosedImage { name: frame_name(i), image: render_image(scene, &view, &cfg)?, view }))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ViewMetrics {
    pub name: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Clone, Debug, Serialize)]
pub struct Evaluation {
    pub views: Vec<ViewMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

pub fn evaluate<T: Real>(scene: &Scene<T>, views: &[PosedImage<T>], cfg: &RenderConfig<T>) -> Result<Evaluation> {
    let mut out = Vec::with_capacity(views.len());
    for v in views {
        let img = render_image(scene, &v.view, cfg)?;
        out.push(ViewMetrics { name: v.name.clone(), metrics: metrics(&img, &v.image)? });
    }
    let n = out.len().max(1) as f64;
    Ok(Evaluation {
        mean_psnr: out.iter().map(|v| v.metrics.psnr).sum::<f64>() / n,
        mean_ssim: out.iter().map(|v| v.metrics.ssim).sum::<f64>() / n,
        views: out,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiviewResult<T> {
    #[serde(skip)]
    pub scene: Scene<T>,
    pub log: Vec<LogLine>,
    pub test: Evaluation,
    pub n_primitives: usize,
}

/// Trains from `n_init` random primitives in the box `[−1, 1]³` and
/// evaluates on the held-out views.
pub fn fit_multiview<T: Real>(
    data: &Dataset<T>,
    cfg: &TrainConfig,
    n_init: usize,
    mut log: impl FnMut(&LogLine),
) -> Result<MultiviewResult<T>> {
    if data.train.is_empty() {
        return Err(Error::Dataset("no training images".into()));
    }
    let bg = cfg.background.map(T::lit);
    let init = random_box_scene(n_init, [-T::one(); 3], [T::one(); 3], 0, bg, cfg.seed);
    let mut trainer = Trainer::new(init, &data.train, cfg.clone())?;
    let mut lines = Vec::new();
    trainer.run(|l| {
        log(l);
        lines.push(l.clone());
    })?;
    let held_out = if data.test.is_empty() { &data.train } else { &data.test };
    let test = evaluate(&trainer.scene, held_out, &trainer.render)?;
    Ok(MultiviewResult { n_primitives: trainer.scene.len(), scene: trainer.scene, log: lines, test })
}
