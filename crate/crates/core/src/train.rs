//! The training loop: render, loss, backward, update and periodic
//! densification over a set of posed images.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, GroupRates};
use crate::backward::render_backward;
use crate::camera::{KernelMode, ProjectParams};
use crate::dataset::PosedImage;
use crate::densify::{DensifyConfig, DensifyReport, DepthThreshold, Densifier};
use crate::error::{Error, Result};
use crate::forward::{render_forward, RenderConfig};
use crate::linalg::{norm3, sub3, Vec3};
use crate::loss::{loss, regularize, LossWeights};
use crate::metrics::psnr_from_mse;
use crate::scalar::Real;
use crate::scene::{sh_coeff_count, Scene, SkewGaussian};
use crate::tiles::DEFAULT_TILE_PX;

/// Optimizer, densification and loss settings. Plain `f64` so it can be
/// read from the command line or JSON regardless of the training width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Initial position rate, multiplied by the scene extent.
    pub lr_position: f64,
    pub lr_position_final: f64,
    pub lr_scale: f64,
    pub lr_rot: f64,
    pub lr_opacity: f64,
    /// Degree-0 color rate; higher degrees use a twentieth of it.
    pub lr_sh: f64,
    pub lr_beta: f64,
    pub lr_dir: f64,
    pub tau_uv: f64,
    /// Depth-gradient threshold. Unset: 90th percentile at the first
    /// densify step.
    pub tau_z: Option<f64>,
    /// Disables the depth-gradient criterion altogether.
    pub no_depth_criterion: bool,
    pub densify_interval: usize,
    pub densify_start: usize,
    pub densify_end: usize,
    pub prune_alpha: f64,
    pub split_scale_threshold: f64,
    pub max_primitives: usize,
    /// Resets opacities to at most 0.01 at this period; 0 disables.
    pub opacity_reset_interval: usize,
    pub lambda_ssim: f64,
    pub lambda_beta_reg: f64,
    pub lambda_op: f64,
    pub opacity_grad_damping: f64,
    pub kernel: KernelMode,
    pub dilation: f64,
    pub background: [f64; 3],
    pub log_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            lr_position: 1.6e-4,
            lr_position_final: 1.6e-6,
            lr_scale: 5e-3,
            lr_rot: 1e-3,
            lr_opacity: 0.05,
            lr_sh: 2.5e-3,
            lr_beta: 1e-4,
            lr_dir: 1e-4,
            tau_uv: 0.001,
            tau_z: None,
            no_depth_criterion: false,
            densify_interval: 100,
            densify_start: 500,
            densify_end: 15_000,
            prune_alpha: 0.005,
            split_scale_threshold: 0.05,
            max_primitives: 100_000,
            opacity_reset_interval: 0,
            lambda_ssim: 0.2,
            lambda_beta_reg: 1e-4,
            lambda_op: 1e-3,
            opacity_grad_damping: 0.0,
            kernel: KernelMode::Skew,
            dilation: 0.3,
            background: [0.0; 3],
            log_interval: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("lr_position", self.lr_position),
            ("lr_position_final", self.lr_position_final),
            ("lr_scale", self.lr_scale),
            ("lr_rot", self.lr_rot),
            ("lr_opacity", self.lr_opacity),
            ("lr_sh", self.lr_sh),
            ("lr_beta", self.lr_beta),
            ("lr_dir", self.lr_dir),
        ];
        for (name, v) in rates {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be a finite non-negative rate")));
            }
        }
        let thresholds = [
            ("tau_uv", self.tau_uv),
            ("tau_z", self.tau_z.unwrap_or(0.0)),
            ("prune_alpha", self.prune_alpha),
            ("split_scale_threshold", self.split_scale_threshold),
            ("lambda_ssim", self.lambda_ssim),
            ("lambda_beta_reg", self.lambda_beta_reg),
            ("lambda_op", self.lambda_op),
            ("dilation", self.dilation),
        ];
        for (name, v) in thresholds {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be non-negative")));
            }
        }
        if self.lambda_ssim > 1.0 {
            return Err(Error::Config("lambda_ssim must lie in [0, 1]".into()));
        }
        if self.densify_interval == 0 {
            return Err(Error::Config("densify_interval must be positive".into()));
        }
        Ok(())
    }

    pub fn depth_threshold<T: Real>(&self) -> DepthThreshold<T> {
        match (self.no_depth_criterion, self.tau_z) {
            (true, _) => DepthThreshold::Disabled,
            (false, Some(v)) if v.is_infinite() => DepthThreshold::Disabled,
            (false, Some(v)) => DepthThreshold::Fixed(T::lit(v)),
            (false, None) => DepthThreshold::Auto,
        }
    }

    pub fn render_config<T: Real>(&self) -> RenderConfig<T> {
        RenderConfig {
            project: ProjectParams { dilation: T::lit(self.dilation), kernel: self.kernel, ..ProjectParams::default() },
            tile_px: DEFAULT_TILE_PX,
            background: Some(self.background.map(T::lit)),
            opacity_grad_damping: T::lit(self.opacity_grad_damping),
        }
    }

    pub fn loss_weights<T: Real>(&self) -> LossWeights<T> {
        LossWeights {
            lambda_ssim: T::lit(self.lambda_ssim),
            lambda_beta_reg: T::lit(self.lambda_beta_reg),
            lambda_op: T::lit(self.lambda_op),
        }
    }

    /// Exponentially decayed position rate at `iteration`.
    pub fn position_rate(&self, iteration: usize, extent: f64) -> f64 {
        let t = (iteration as f64 / self.iterations.max(1) as f64).clamp(0.0, 1.0);
        if self.lr_position <= 0.0 || self.lr_position_final <= 0.0 {
            return self.lr_position * extent;
        }
        (self.lr_position.ln() * (1.0 - t) + self.lr_position_final.ln() * t).exp() * extent
    }

    pub fn rates<T: Real>(&self, iteration: usize, extent: f64) -> GroupRates<T> {
        let skew = self.kernel == KernelMode::Skew;
        GroupRates {
            position: T::lit(self.position_rate(iteration, extent)),
            scale: T::lit(self.lr_scale),
            rot: T::lit(self.lr_rot),
            opacity: T::lit(self.lr_opacity),
            sh_dc: T::lit(self.lr_sh),
            sh_rest: T::lit(self.lr_sh / 20.0),
            beta: T::lit(if skew { self.lr_beta } else { 0.0 }),
            dir: T::lit(if skew { self.lr_dir } else { 0.0 }),
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLine {
    pub iteration: usize,
    pub loss: f64,
    pub psnr: f64,
    pub n_primitives: usize,
    pub n_cloned: usize,
    pub n_split: usize,
    pub n_pruned: usize,
    /// Densify flags raised by the depth criterion alone.
    pub n_depth_only: usize,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub loss: f64,
    pub psnr: f64,
    pub densified: Option<DensifyReport>,
}

/// Radius of the sphere around the mean camera center that holds every
/// camera, enlarged by 10%.
pub fn camera_extent<T: Real>(views: &[PosedImage<T>]) -> f64 {
    if views.is_empty() {
        return 1.0;
    }
    let centers: Vec<Vec3<f64>> = views.iter().map(|v| v.view.center().map(|c| c.to_f64_lossy())).collect();
    let n = centers.len() as f64;
    let mean: Vec3<f64> = std::array::from_fn(|k| centers.iter().map(|c| c[k]).sum::<f64>() / n);
    let r = centers.iter().map(|c| norm3(sub3(*c, mean))).fold(0.0, f64::max);
    if r > 0.0 {
        1.1 * r
    } else {
        1.0
    }
}

/// Single-writer training state.
pub struct Trainer<'a, T> {
    pub scene: Scene<T>,
    pub cfg: TrainConfig,
    pub render: RenderConfig<T>,
    pub adam: Adam<T>,
    pub densifier: Densifier<T>,
    pub views: &'a [PosedImage<T>],
    pub iteration: usize,
    /// Scene extent multiplying the position rate.
    pub extent: f64,
    /// Zeroes the depth component of every position gradient.
    pub freeze_depth: bool,
    weights: LossWeights<T>,
    rng: ChaCha8Rng,
    order: Vec<usize>,
}

impl<'a, T: Real> Trainer<'a, T> {
    pub fn new(scene: Scene<T>, views: &'a [PosedImage<T>], cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if views.is_empty() {
            return Err(Error::Dataset("no training views".into()));
        }
        let n = scene.len();
        let densify = DensifyConfig {
            tau_uv: T::lit(cfg.tau_uv),
            tau_z: cfg.depth_threshold(),
            prune_alpha: T::lit(cfg.prune_alpha),
            split_scale_threshold: T::lit(cfg.split_scale_threshold),
            clone_step: T::zero(),
            max_screen_radius: None,
            max_world_scale: None,
        };
        let extent = camera_extent(views);
        Ok(Self {
            adam: Adam::new(n, sh_coeff_count(scene.sh_degree)),
            densifier: Densifier::new(densify, n),
            render: cfg.render_config(),
            weights: cfg.loss_weights(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_6169_6e00),
            scene,
            cfg,
            views,
            iteration: 0,
            extent,
            freeze_depth: false,
            order: Vec::new(),
        })
    }

    fn next_view(&mut self) -> usize {
        if self.order.is_empty() {
            self.order = (0..self.views.len()).collect();
            self.order.shuffle(&mut self.rng);
        }
        self.order.pop().expect("refilled above")
    }

    /// Runs one iteration on the next view of the shuffled schedule.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let vi = self.next_view();
        let posed = &self.views[vi];
        let frame = render_forward(&self.scene, &posed.view, &self.render)?;
        let l = loss(&frame.color, &posed.image, &self.scene, &self.weights)?;
        let mut grads = render_backward(&self.scene, &posed.view, &self.render, &frame, &l.d_pixels)?;
        regularize(&self.scene, &self.weights, &mut grads);
        if self.freeze_depth {
            for g in &mut grads.grads {
                g.d_mu[2] = T::zero();
            }
        }
        let it = self.iteration;
        let in_window = it < self.cfg.densify_end;
        if in_window {
            self.densifier.stats.accumulate(&grads);
            self.densifier.stats.observe_radii(&frame);
        }
        let rates = self.cfg.rates(it, self.extent);
        self.adam.step(&mut self.scene, &grads, &rates);
        self.densifier.cfg.clone_step = rates.position;
        self.iteration += 1;

        let mut densified = None;
        let at = self.iteration;
        if in_window && at >= self.cfg.densify_start && at.is_multiple_of(self.cfg.densify_interval) {
            let report = if self.scene.len() < self.cfg.max_primitives {
                let (report, origins) = self.densifier.densify_and_prune(&mut self.scene);
                self.adam.remap(&origins);
                report
            } else {
                let (n_pruned, origins) = self.densifier.prune_only(&mut self.scene);
                self.adam.remap(&origins);
                DensifyReport { n_pruned, ..DensifyReport::default() }
            };
            densified = Some(report);
        }
        if self.cfg.opacity_reset_interval > 0 && at.is_multiple_of(self.cfg.opacity_reset_interval) && at < self.cfg.densify_end {
            self.reset_opacity();
        }
        let mse = frame.color.data.iter().zip(&posed.image.data).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>()
            / T::from_usize_lossy(frame.color.data.len().max(1));
        Ok(StepOutcome { loss: l.total.to_f64_lossy(), psnr: psnr_from_mse(mse).to_f64_lossy(), densified })
    }

    fn reset_opacity(&mut self) {
        let cap = crate::scene::logit(T::lit(0.01));
        for g in &mut self.scene.primitives {
            for l in &mut g.opacity_logits {
                *l = l.min(cap);
            }
        }
    }

    /// Runs until `cfg.iterations`, reporting one line per log interval.
    /// Loss and PSNR are averaged over the interval.
    pub fn run(&mut self, mut log: impl FnMut(&LogLine)) -> Result<()> {
        let mut acc = (0.0, 0.0, 0usize, DensifyReport::default());
        while self.iteration < self.cfg.iterations {
            let o = self.step()?;
            acc.0 += o.loss;
            acc.1 += o.psnr;
            acc.2 += 1;
            if let Some(r) = o.densified {
                acc.3.n_cloned += r.n_cloned;
                acc.3.n_split += r.n_split;
                acc.3.n_pruned += r.n_pruned;
                acc.3.n_depth_only += r.n_depth_only;
            }
            if !o.loss.is_finite() {
                return Err(Error::Config(format!("loss diverged at iteration {}", self.iteration)));
            }
            let interval = self.cfg.log_interval.max(1);
            if self.iteration.is_multiple_of(interval) || self.iteration == self.cfg.iterations {
                let k = acc.2.max(1) as f64;
                log(&LogLine {
                    iteration: self.iteration,
                    loss: acc.0 / k,
                    psnr: acc.1 / k,
                    n_primitives: self.scene.len(),
                    n_cloned: acc.3.n_cloned,
                    n_split: acc.3.n_split,
                    n_pruned: acc.3.n_pruned,
                    n_depth_only: acc.3.n_depth_only,
                });
                acc = (0.0, 0.0, 0, DensifyReport::default());
            }
        }
        Ok(())
    }
}

/// Nearest-neighbor distance of every point, by brute force.
pub fn nearest_distances<T: Real>(points: &[Vec3<T>]) -> Vec<T> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| norm3(sub3(*p, *q)))
                .fold(T::infinity(), |a, b| a.min(b))
        })
        .collect()
}

/// Primitives at `points` with isotropic scales from the nearest-neighbor
/// distance, zero skew, opacity 0.1 and the given colors.
pub fn init_scene<T: Real>(points: &[Vec3<T>], colors: &[[T; 3]], sh_degree: usize, background: [T; 3]) -> Scene<T> {
    let nn = nearest_distances(points);
    let mut scene = Scene::new(sh_degree).with_background(background);
    for (i, p) in points.iter().enumerate() {
        let s = if nn[i].is_finite() && nn[i] > T::zero() { nn[i] } else { T::lit(0.1) };
        scene.push(SkewGaussian::isotropic(*p, s, colors[i], T::lit(0.1), sh_degree));
    }
    scene
}

/// `n` points uniform in the axis-aligned box `[lo, hi]`, gray colored.
pub fn random_box_scene<T: Real>(n: usize, lo: Vec3<T>, hi: Vec3<T>, sh_degree: usize, background: [T; 3], seed: u64) -> Scene<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec3<T>> = (0..n)
        .map(|_| std::array::from_fn(|k| lo[k] + (hi[k] - lo[k]) * T::lit(rng.random::<f64>())))
        .collect();
    let colors = vec![[T::lit(0.5); 3]; n];
    init_scene(&points, &colors, sh_degree, background)
}
