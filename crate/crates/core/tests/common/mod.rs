//! Shared fixtures for the integration and acceptance suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use skewsplat::backward::render_backward;
use skewsplat::camera::{CameraView, Convention};
use skewsplat::forward::{render_forward, RenderConfig};
use skewsplat::scene::{Scene, SkewGaussian};
use skewsplat_oracles::fd::relative_error;
use skewsplat_oracles::reference::{RefCamera, RefGaussian};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Camera looking down +z from a point slightly off the origin, so that
/// the world-to-camera transform is not the identity.
pub fn test_view(rng: &mut impl Rng, w: usize, h: usize) -> CameraView<f64> {
    let eye = [rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.5..0.0)];
    let target = [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 4.0];
    CameraView::look_at(eye, target, [0.0, -1.0, 0.0], w, h, rng.random_range(0.7..1.1)).unwrap()
}

fn random_quat(rng: &mut impl Rng) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.2 {
            return q;
        }
    }
}

/// Random primitive in the frustum of [`test_view`]. Screen sizes land
/// around one to three pixels on an 8×8 image.
pub fn random_primitive(rng: &mut impl Rng, sh_degree: usize, skewed: bool) -> SkewGaussian<f64> {
    let z = rng.random_range(3.0..5.0);
    let mu = [rng.random_range(-0.5..0.5) * z * 0.4, rng.random_range(-0.5..0.5) * z * 0.4, z];
    let mut g = SkewGaussian::isotropic(mu, 0.3, [0.5; 3], 0.5, sh_degree);
    g.log_scale = std::array::from_fn(|_| rng.random_range(0.15f64..0.45).ln());
    g.rot = random_quat(rng);
    for c in g.sh.iter_mut() {
        *c = std::array::from_fn(|_| rng.random_range(-0.6..0.6));
    }
    g.sh[0] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let l1 = rng.random_range(-1.5..0.8);
    if skewed {
        g.opacity_logits = [l1, rng.random_range(-1.5..0.8)];
        g.beta = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        g.dir = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
    } else {
        g.opacity_logits = [l1, l1];
    }
    g
}

pub fn random_scene(rng: &mut impl Rng, n: usize, sh_degree: usize, skewed: bool) -> Scene<f64> {
    let bg = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let mut scene = Scene::new(sh_degree).with_background(bg);
    for _ in 0..n {
        scene.push(random_primitive(rng, sh_degree, skewed));
    }
    scene
}

pub fn to_reference(scene: &Scene<f64>) -> Vec<RefGaussian<f64>> {
    scene
        .primitives
        .iter()
        .map(|g| RefGaussian {
            mean: g.mu,
            log_scale: g.log_scale,
            quat: g.rot,
            sh: g.sh.clone(),
            opacity_logit: g.opacity_logits[0],
        })
        .collect()
}

pub fn reference_camera(view: &CameraView<f64>) -> RefCamera {
    let cv = view.to_opencv();
    let m = cv.c2w;
    let rot = [[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]];
    let center = [m[0][3], m[1][3], m[2][3]];
    let t: [f64; 3] = std::array::from_fn(|i| -(0..3).map(|k| rot[i][k] * center[k]).sum::<f64>());
    let fx = cv.width as f64 / (2.0 * (cv.fov_x / 2.0).tan());
    let fy = cv.height as f64 / (2.0 * (cv.fov_y / 2.0).tan());
    RefCamera {
        world_to_cam_rot: rot,
        world_to_cam_t: t,
        center,
        fx,
        fy,
        cx: cv.width as f64 / 2.0,
        cy: cv.height as f64 / 2.0,
        width: cv.width,
        height: cv.height,
        near: cv.near,
    }
}

/// Named handle on one scalar parameter of one primitive.
#[derive(Clone, Copy, Debug)]
pub enum Param {
    Mu(usize),
    LogScale(usize),
    Rot(usize),
    Opacity(usize),
    Beta(usize),
    Dir(usize),
    Sh(usize, usize),
}

impl Param {
    pub fn all(sh_len: usize) -> Vec<Param> {
        let mut v = Vec::new();
        v.extend((0..3).map(Param::Mu));
        v.extend((0..3).map(Param::LogScale));
        v.extend((0..4).map(Param::Rot));
        v.extend((0..2).map(Param::Opacity));
        v.extend((0..3).map(Param::Beta));
        v.extend((0..3).map(Param::Dir));
        for k in 0..sh_len {
            v.extend((0..3).map(|c| Param::Sh(k, c)));
        }
        v
    }

    pub fn get_mut(self, g: &mut SkewGaussian<f64>) -> &mut f64 {
        match self {
            Param::Mu(i) => &mut g.mu[i],
            Param::LogScale(i) => &mut g.log_scale[i],
            Param::Rot(i) => &mut g.rot[i],
            Param::Opacity(i) => &mut g.opacity_logits[i],
            Param::Beta(i) => &mut g.beta[i],
            Param::Dir(i) => &mut g.dir[i],
            Param::Sh(k, c) => &mut g.sh[k][c],
        }
    }

    pub fn grad(self, g: &skewsplat::backward::PrimitiveGrad<f64>) -> f64 {
        match self {
            Param::Mu(i) => g.d_mu[i],
            Param::LogScale(i) => g.d_log_scale[i],
            Param::Rot(i) => g.d_rot[i],
            Param::Opacity(i) => g.d_opacity_logits[i],
            Param::Beta(i) => g.d_beta[i],
            Param::Dir(i) => g.d_dir[i],
            Param::Sh(k, c) => g.d_sh[k][c],
        }
    }

    /// Finite-difference step: coarser for rotations and skewness.
    pub fn step(self) -> f64 {
        match self {
            Param::Rot(_) | Param::Beta(_) | Param::Dir(_) => 1e-3,
            _ => 1e-4,
        }
    }

    pub fn group(self) -> &'static str {
        match self {
            Param::Mu(_) => "position",
            Param::LogScale(_) => "scale",
            Param::Rot(_) => "rotation",
            Param::Opacity(_) => "opacity",
            Param::Beta(_) => "skew",
            Param::Dir(_) => "boundary",
            Param::Sh(..) => "color",
        }
    }
}

/// Squared-error loss against `target` and its pixel gradient.
pub fn sq_loss(img: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let mut l = 0.0;
    let mut d = Vec::with_capacity(img.len());
    for (a, b) in img.iter().zip(target) {
        l += (a - b) * (a - b);
        d.push(2.0 * (a - b));
    }
    (l, d)
}

#[derive(Debug, Default, Clone)]
pub struct GradCheck {
    pub total: usize,
    pub passed: usize,
    pub worst: Vec<(String, f64, f64)>,
}

impl GradCheck {
    pub fn merge(&mut self, o: GradCheck) {
        self.total += o.total;
        self.passed += o.passed;
        self.worst.extend(o.worst);
    }

    pub fn pass_rate(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.passed as f64 / self.total as f64
        }
    }
}

/// A coordinate passes with relative error below `1e-3`, or when both
/// derivatives are below `1e-8` in magnitude.
pub fn coordinate_passes(analytic: f64, numeric: f64) -> bool {
    (analytic.abs() < 1e-8 && numeric.abs() < 1e-8) || relative_error(analytic, numeric) < 1e-3
}

/// Compares the analytic backward pass with central differences of the
/// squared-error loss on every parameter of every primitive.
pub fn gradient_check(scene: &Scene<f64>, view: &CameraView<f64>, cfg: &RenderConfig<f64>, target: &[f64]) -> GradCheck {
    let frame = render_forward(scene, view, cfg).unwrap();
    let (_, d_pix) = sq_loss(&frame.color.data, target);
    let grads = render_backward(scene, view, cfg, &frame, &d_pix).unwrap();
    let loss_of = |s: &Scene<f64>| sq_loss(&render_forward(s, view, cfg).unwrap().color.data, target).0;
    let mut out = GradCheck::default();
    for (i, g) in scene.primitives.iter().enumerate() {
        for p in Param::all(g.sh.len()) {
            let h = p.step();
            let mut plus = scene.clone();
            *p.get_mut(&mut plus.primitives[i]) += h;
            let mut minus = scene.clone();
            *p.get_mut(&mut minus.primitives[i]) -= h;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let analytic = p.grad(&grads.grads[i]);
            out.total += 1;
            if coordinate_passes(analytic, numeric) {
                out.passed += 1;
            } else {
                out.worst.push((format!("prim {i} {p:?}"), analytic, numeric));
            }
        }
    }
    out
}

pub fn random_target(rng: &mut impl Rng, view: &CameraView<f64>) -> Vec<f64> {
    (0..view.width * view.height * 3).map(|_| rng.random_range(0.0..1.0)).collect()
}

pub fn opencv_identity_view(w: usize, h: usize, fov_x: f64) -> CameraView<f64> {
    CameraView::new(skewsplat::linalg::identity4(), Convention::OpenCv, w, h, fov_x).unwrap()
}

/// Random covariance, skewness vector and full-rank 2×3 map.
pub fn random_skew_config(r: &mut impl Rng) -> ([[f64; 3]; 3], [f64; 3], [[f64; 3]; 2]) {
    let a: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| r.random_range(-1.0..1.0)));
    let mut sigma = skewsplat::linalg::mul33(&a, &skewsplat::linalg::transpose3(&a));
    for (i, row) in sigma.iter_mut().enumerate() {
        row[i] += 0.1;
    }
    let eta = std::array::from_fn(|_| r.random_range(-2.5..2.5));
    let t = std::array::from_fn(|_| std::array::from_fn(|_| r.random_range(-1.5..1.5)));
    (sigma, eta, t)
}

