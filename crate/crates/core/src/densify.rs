//! Adaptive density control: clone, split and prune driven by the screen
//! gradient and the depth gradient of each primitive.

use crate::adam::Origin;
use crate::backward::GradientBundle;
use crate::forward::FrameBundle;
use crate::linalg::{add3, dot3, mat3_vec, scale3, sub3, Vec3};
use crate::scalar::Real;
use crate::scene::{sigmoid, Scene, SkewGaussian};

/// Child scale shrink factor of a split.
pub const SPLIT_SHRINK: f64 = 1.6;
/// Percentile of observed depth gradients used when no threshold is given.
pub const AUTO_TAU_Z_PERCENTILE: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DepthThreshold<T> {
    /// Fixed from the first densify step's observations.
    Auto,
    Fixed(T),
    /// Plain screen-gradient criterion.
    Disabled,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensifyConfig<T> {
    pub tau_uv: T,
    pub tau_z: DepthThreshold<T>,
    pub prune_alpha: T,
    pub split_scale_threshold: T,
    /// Step length for the clone offset along the mean positional gradient.
    pub clone_step: T,
    pub max_screen_radius: Option<T>,
    pub max_world_scale: Option<T>,
}

impl<T: Real> Default for DensifyConfig<T> {
    fn default() -> Self {
        Self {
            tau_uv: T::lit(0.001),
            tau_z: DepthThreshold::Auto,
            prune_alpha: T::lit(0.005),
            split_scale_threshold: T::lit(0.05),
            clone_step: T::lit(1.6e-4),
            max_screen_radius: None,
            max_world_scale: None,
        }
    }
}

/// Gradient statistics accumulated between densify steps.
#[derive(Clone, Debug, PartialEq)]
pub struct DensifyStats<T> {
    uv_sum: Vec<T>,
    count: Vec<u32>,
    z_max: Vec<T>,
    d_mu_sum: Vec<Vec3<T>>,
    max_radius: Vec<T>,
}

impl<T: Real> DensifyStats<T> {
    pub fn new(n: usize) -> Self {
        Self {
            uv_sum: vec![T::zero(); n],
            count: vec![0; n],
            z_max: vec![T::zero(); n],
            d_mu_sum: vec![[T::zero(); 3]; n],
            max_radius: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.count.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count.is_empty()
    }

    pub fn accumulate(&mut self, grads: &GradientBundle<T>) {
        for i in 0..self.len() {
            if !grads.visible[i] {
                continue;
            }
            self.uv_sum[i] += grads.g_uv[i];
            self.count[i] += 1;
            self.z_max[i] = self.z_max[i].max(grads.g_z[i]);
            self.d_mu_sum[i] = add3(self.d_mu_sum[i], grads.grads[i].d_mu);
        }
    }

    pub fn observe_radii(&mut self, frame: &FrameBundle<T>) {
        for s in &frame.splats {
            self.max_radius[s.index] = self.max_radius[s.index].max(s.radius);
        }
    }

    /// Mean screen-gradient norm over the views that saw primitive `i`.
    pub fn g_uv(&self, i: usize) -> T {
        if self.count[i] == 0 {
            T::zero()
        } else {
            self.uv_sum[i] / T::from_usize_lossy(self.count[i] as usize)
        }
    }

    pub fn g_z(&self, i: usize) -> T {
        self.z_max[i]
    }

    pub fn mean_d_mu(&self, i: usize) -> Vec3<T> {
        if self.count[i] == 0 {
            [T::zero(); 3]
        } else {
            scale3(self.d_mu_sum[i], T::one() / T::from_usize_lossy(self.count[i] as usize))
        }
    }

    /// Depth-gradient percentile over primitives seen at least once.
    pub fn g_z_percentile(&self, q: f64) -> Option<T> {
        let mut v: Vec<T> = (0..self.len()).filter(|i| self.count[*i] > 0).map(|i| self.z_max[i]).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let k = ((v.len() - 1) as f64 * q).round() as usize;
        Some(v[k])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct DensifyReport {
    pub n_cloned: usize,
    pub n_split: usize,
    pub n_pruned: usize,
    /// Flagged by the depth criterion but not the screen criterion.
    pub n_depth_only: usize,
}

/// Controller state: configuration, running statistics and the resolved
/// depth threshold.
#[derive(Clone, Debug)]
pub struct Densifier<T> {
    pub cfg: DensifyConfig<T>,
    pub stats: DensifyStats<T>,
    tau_z: Option<T>,
}

impl<T: Real> Densifier<T> {
    pub fn new(cfg: DensifyConfig<T>, n: usize) -> Self {
        let tau_z = match cfg.tau_z {
            DepthThreshold::Fixed(v) => Some(v),
            DepthThreshold::Disabled => Some(T::infinity()),
            DepthThreshold::Auto => None,
        };
        Self { cfg, stats: DensifyStats::new(n), tau_z }
    }

    /// The depth threshold in force, once resolved.
    pub fn tau_z(&self) -> Option<T> {
        self.tau_z
    }

    fn resolve_tau_z(&mut self) -> T {
        if let Some(t) = self.tau_z {
            return t;
        }
        let t = self.stats.g_z_percentile(AUTO_TAU_Z_PERCENTILE).unwrap_or(T::infinity());
        self.tau_z = Some(t);
        t
    }

    /// Which primitives the two gradient criteria select.
    pub fn flags(&mut self) -> Vec<bool> {
        let tz = self.resolve_tau_z();
        (0..self.stats.len()).map(|i| self.stats.g_uv(i) > self.cfg.tau_uv || self.stats.g_z(i) > tz).collect()
    }

    /// Clones, splits and prunes, then resets the statistics. The returned
    /// origins map each new primitive to its source for optimizer state.
    pub fn densify_and_prune(&mut self, scene: &mut Scene<T>) -> (DensifyReport, Vec<Origin>) {
        assert_eq!(self.stats.len(), scene.len(), "densify stats out of sync with scene");
        let flags = self.flags();
        let mut report = DensifyReport {
            n_depth_only: (0..flags.len()).filter(|&i| flags[i] && self.stats.g_uv(i) <= self.cfg.tau_uv).count(),
            ..DensifyReport::default()
        };
        let mut kept: Vec<(SkewGaussian<T>, Origin, T)> = Vec::with_capacity(scene.len());
        let mut added: Vec<(SkewGaussian<T>, Origin, T)> = Vec::new();
        for (i, g) in scene.primitives.iter().enumerate() {
            let radius = self.stats.max_radius[i];
            if !flags[i] {
                kept.push((g.clone(), Origin::Kept(i), radius));
                continue;
            }
            let max_scale = g.log_scale[g.max_scale_axis()].exp();
            if max_scale <= self.cfg.split_scale_threshold {
                let mut c = g.clone();
                c.mu = sub3(c.mu, scale3(self.stats.mean_d_mu(i), self.cfg.clone_step));
                kept.push((g.clone(), Origin::Kept(i), radius));
                added.push((c, Origin::New, T::zero()));
                report.n_cloned += 1;
            } else {
                let [a, b] = split(g);
                added.push((a, Origin::New, T::zero()));
                added.push((b, Origin::New, T::zero()));
                report.n_split += 1;
            }
        }
        kept.extend(added);
        let before = kept.len();
        kept.retain(|(g, _, radius)| !self.should_prune(g, *radius));
        report.n_pruned = before - kept.len();
        let origins = kept.iter().map(|k| k.1).collect();
        scene.primitives = kept.into_iter().map(|k| k.0).collect();
        self.stats = DensifyStats::new(scene.len());
        (report, origins)
    }

    fn should_prune(&self, g: &SkewGaussian<T>, radius: T) -> bool {
        let [p1, p2] = g.opacities();
        if p1.max(p2) < self.cfg.prune_alpha {
            return true;
        }
        if let Some(cap) = self.cfg.max_screen_radius {
            if radius > cap {
                return true;
            }
        }
        if let Some(cap) = self.cfg.max_world_scale {
            if g.log_scale[g.max_scale_axis()].exp() > cap {
                return true;
            }
        }
        false
    }

    /// Drops primitives whose opacity fell below the prune threshold
    /// without densifying.
    pub fn prune_only(&mut self, scene: &mut Scene<T>) -> (usize, Vec<Origin>) {
        let mut origins = Vec::new();
        let mut out = Vec::new();
        for (i, g) in scene.primitives.iter().enumerate() {
            if !self.should_prune(g, self.stats.max_radius[i]) {
                origins.push(Origin::Kept(i));
                out.push(g.clone());
            }
        }
        let n = scene.len() - out.len();
        scene.primitives = out;
        self.stats = DensifyStats::new(scene.len());
        (n, origins)
    }
}

/// Splits along the world-space max-scale axis into two shrunk children.
/// The child on the side the skew pushes mass toward keeps the larger
/// opacity, the other the smaller.
pub fn split<T: Real>(g: &SkewGaussian<T>) -> [SkewGaussian<T>; 2] {
    let k = g.max_scale_axis();
    let r = g.rotation();
    let axis = [r[0][k], r[1][k], r[2][k]];
    let half = g.log_scale[k].exp() / T::lit(2.0);
    let shrink = T::lit(SPLIT_SHRINK).ln();
    let mut a = g.clone();
    let mut b = g.clone();
    a.mu = add3(g.mu, scale3(axis, half));
    b.mu = sub3(g.mu, scale3(axis, half));
    for c in [&mut a, &mut b] {
        for s in c.log_scale.iter_mut() {
            *s -= shrink;
        }
    }
    let side = dot3(axis, mat3_vec(&g.covariance3d(), g.beta));
    if side != T::zero() {
        let [l1, l2] = g.opacity_logits;
        let (hi, lo) = if sigmoid(l1) >= sigmoid(l2) { (l1, l2) } else { (l2, l1) };
        let (near, far) = if side > T::zero() { (&mut a, &mut b) } else { (&mut b, &mut a) };
        near.opacity_logits = [hi, hi];
        far.opacity_logits = [lo, lo];
    }
    [a, b]
}
