//! Analytic backward pass of the rasterizer.
//!
//! Pixels are replayed back to front from the stored final transmittance.
//! Screen-space gradients are accumulated per tile and reduced in tile order,
//! then each splat's gradients are chained through the projection to the
//! primitive's parameters.

use rayon::prelude::*;

use crate::camera::{
    covariance_backward, perspective_backward, project_skewness_backward, projection_terms,
    screen_cov_backward, CameraView, KernelMode, ScreenSplat, ViewContext,
};
use crate::error::{Error, Result};
use crate::forward::{eval_pixel, fingerprint, FrameBundle, RenderConfig, NO_INSTANCE};
use crate::kernel::sqrt_2_over_pi;
use crate::linalg::{add3, mat3t_vec, Mat2, Mat23, Vec3};
use crate::scalar::Real;
use crate::scene::{sigmoid, Scene, SkewGaussian};
use crate::sh::eval_color_backward;

/// Gradient of the loss with respect to one primitive's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveGrad<T> {
    pub d_mu: Vec3<T>,
    pub d_log_scale: Vec3<T>,
    pub d_rot: [T; 4],
    pub d_sh: Vec<[T; 3]>,
    pub d_opacity_logits: [T; 2],
    pub d_beta: Vec3<T>,
    pub d_dir: Vec3<T>,
}

impl<T: Real> PrimitiveGrad<T> {
    pub fn zeros(sh_len: usize) -> Self {
        let z = T::zero();
        Self {
            d_mu: [z; 3],
            d_log_scale: [z; 3],
            d_rot: [z; 4],
            d_sh: vec![[z; 3]; sh_len],
            d_opacity_logits: [z; 2],
            d_beta: [z; 3],
            d_dir: [z; 3],
        }
    }

    pub fn add_assign(&mut self, o: &PrimitiveGrad<T>) {
        let add = |a: &mut [T], b: &[T]| a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        add(&mut self.d_mu, &o.d_mu);
        add(&mut self.d_log_scale, &o.d_log_scale);
        add(&mut self.d_rot, &o.d_rot);
        add(&mut self.d_opacity_logits, &o.d_opacity_logits);
        add(&mut self.d_beta, &o.d_beta);
        add(&mut self.d_dir, &o.d_dir);
        for (a, b) in self.d_sh.iter_mut().zip(&o.d_sh) {
            add(a, b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_mu
            .iter()
            .chain(&self.d_log_scale)
            .chain(&self.d_rot)
            .chain(&self.d_opacity_logits)
            .chain(&self.d_beta)
            .chain(&self.d_dir)
            .chain(self.d_sh.iter().flatten())
            .all(|v| v.is_finite())
    }
}

/// Gradients of one backward pass.
#[derive(Clone, Debug)]
pub struct GradientBundle<T> {
    pub grads: Vec<PrimitiveGrad<T>>,
    /// Norm of the NDC mean gradient in this view (0 if not visible).
    pub g_uv: Vec<T>,
    /// `|∂L/∂z_cam|` in this view.
    pub g_z: Vec<T>,
    pub visible: Vec<bool>,
}

impl<T: Real> GradientBundle<T> {
    pub fn zeros(scene: &Scene<T>) -> Self {
        let n = scene.len();
        Self {
            grads: scene.primitives.iter().map(|g| PrimitiveGrad::zeros(g.sh.len())).collect(),
            g_uv: vec![T::zero(); n],
            g_z: vec![T::zero(); n],
            visible: vec![false; n],
        }
    }
}

/// Screen-space gradient of one splat.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScreenGrad<T> {
    pub d_mean2d: [T; 2],
    /// `(a, b, c)` of the dilated conic.
    pub d_conic: [T; 3],
    pub d_skew: [T; 2],
    pub d_boundary: [T; 2],
    pub d_opacity_pair: [T; 2],
    pub d_color: [T; 3],
}

impl<T: Real> ScreenGrad<T> {
    fn add(&mut self, o: &ScreenGrad<T>) {
        for i in 0..2 {
            self.d_mean2d[i] += o.d_mean2d[i];
            self.d_skew[i] += o.d_skew[i];
            self.d_boundary[i] += o.d_boundary[i];
            self.d_opacity_pair[i] += o.d_opacity_pair[i];
        }
        for i in 0..3 {
            self.d_conic[i] += o.d_conic[i];
            self.d_color[i] += o.d_color[i];
        }
    }
}

fn backward_tile<T: Real>(frame: &FrameBundle<T>, d_pixels: &[T], tile: usize) -> Vec<ScreenGrad<T>> {
    let grid = &frame.grid;
    let (x0, x1, y0, y1) = grid.tile_rect(tile);
    let (start, end) = grid.ranges[tile];
    let mut acc = vec![ScreenGrad::default(); end - start];
    let w = frame.color.width;
    let bg = frame.background;
    let s2p = sqrt_2_over_pi::<T>();
    let half = T::lit(0.5);
    for py in y0..y1 {
        for px in x0..x1 {
            let p = py * w + px;
            let last = frame.last_idx[p];
            if last == NO_INSTANCE {
                continue;
            }
            let dc = [d_pixels[p * 3], d_pixels[p * 3 + 1], d_pixels[p * 3 + 2]];
            let t_final = frame.final_t[p];
            let bg_dot = bg[0] * dc[0] + bg[1] * dc[1] + bg[2] * dc[2];
            let mut t = t_final;
            // color composited behind the current splat, excluding background
            let mut behind = [T::zero(); 3];
            let mut prev_alpha = T::zero();
            let mut prev_color = [T::zero(); 3];
            for inst in (start..=last as usize).rev() {
                let s = &frame.splats[grid.instances[inst] as usize];
                let Some(ev) = eval_pixel(s, px, py) else { continue };
                let one_minus = T::one() - ev.alpha;
                t /= one_minus;
                for ch in 0..3 {
                    behind[ch] = prev_alpha * prev_color[ch] + (T::one() - prev_alpha) * behind[ch];
                }
                prev_alpha = ev.alpha;
                prev_color = s.color;
                let g = &mut acc[inst - start];
                let wgt = ev.alpha * t;
                for ch in 0..3 {
                    g.d_color[ch] += wgt * dc[ch];
                }
                if ev.clamped {
                    continue;
                }
                let mut d_alpha = T::zero();
                for ch in 0..3 {
                    d_alpha += (s.color[ch] - behind[ch]) * dc[ch];
                }
                d_alpha = d_alpha * t - t_final / one_minus * bg_dot;

                // α = o · G · m
                let d_o = d_alpha * ev.g * ev.m;
                let d_g = d_alpha * ev.o * ev.m;
                let d_m = d_alpha * ev.o * ev.g;
                g.d_opacity_pair[0] += half * (T::one() + ev.e) * d_o;
                g.d_opacity_pair[1] += half * (T::one() - ev.e) * d_o;
                let [p1, p2] = s.opacity_pair;
                let d_e = half * (p1 - p2) * d_o;
                let d_w = d_e * s2p * (-half * ev.w * ev.w).exp();
                let d_zlin = d_m * s2p * (-ev.z * ev.z).exp(); // ∂m/∂(βᵀδ)
                let d_power = d_g * ev.g;
                let (dx, dy) = (ev.dx, ev.dy);
                g.d_boundary[0] += d_w * dx;
                g.d_boundary[1] += d_w * dy;
                g.d_skew[0] += d_zlin * dx;
                g.d_skew[1] += d_zlin * dy;
                g.d_conic[0] += -half * dx * dx * d_power;
                g.d_conic[1] += -dx * dy * d_power;
                g.d_conic[2] += -half * dy * dy * d_power;
                let c = &s.conic;
                let d_dx = d_power * -(c.a * dx + c.b * dy)
                    + d_zlin * s.skew2d.beta_x
                    + d_w * s.boundary2d.beta_x;
                let d_dy = d_power * -(c.b * dx + c.c * dy)
                    + d_zlin * s.skew2d.beta_y
                    + d_w * s.boundary2d.beta_y;
                // δ = pixel − μ
                g.d_mean2d[0] -= d_dx;
                g.d_mean2d[1] -= d_dy;
            }
        }
    }
    acc
}

/// Chains a splat's screen-space gradient to its primitive's parameters.
/// Also returns `|∂L/∂z_cam|` and the NDC mean-gradient norm.
pub fn chain_to_primitive<T: Real>(
    g: &SkewGaussian<T>,
    s: &ScreenSplat<T>,
    sg: &ScreenGrad<T>,
    ctx: &ViewContext<T>,
    cfg: &RenderConfig<T>,
) -> (PrimitiveGrad<T>, T, T) {
    let mut out = PrimitiveGrad::zeros(g.sh.len());
    let half = T::lit(0.5);
    let two = T::lit(2.0);

    // opacity pair p_i = sigmoid(l_i) · comp
    let lam = cfg.opacity_grad_damping;
    let damp = if lam > T::zero() {
        let b = s.skew2d.norm();
        T::one() / (T::one() + lam * b * b)
    } else {
        T::one()
    };
    let comp = s.dilation_comp;
    let mut d_comp = T::zero();
    for i in 0..2 {
        let sg_i = sigmoid(g.opacity_logits[i]);
        let dp = sg.d_opacity_pair[i];
        out.d_opacity_logits[i] = damp * dp * comp * sg_i * (T::one() - sg_i);
        d_comp += dp * sg_i;
    }

    // conic (a, b, c) = inverse of Σ′ + sI, and comp = √(det Σ′ / det(Σ′ + sI))
    let sdil = cfg.project.dilation;
    let [m00, m01, m11] = s.cov2d;
    let (m00s, m11s) = (m00 + sdil, m11 + sdil);
    let ds = m00s * m11s - m01 * m01;
    let ds2 = ds * ds;
    let [da, db, dc] = sg.d_conic;
    let mut d00 = da * (-m11s * m11s / ds2) + db * (m01 * m11s / ds2) + dc * (-m01 * m01 / ds2);
    let mut d11 = da * (-m01 * m01 / ds2) + db * (m01 * m00s / ds2) + dc * (-m00s * m00s / ds2);
    let mut d01 = da * (two * m01 * m11s / ds2)
        + db * (-(ds + two * m01 * m01) / ds2)
        + dc * (two * m01 * m00s / ds2);
    if d_comp != T::zero() {
        let det = m00 * m11 - m01 * m01;
        let k = half * comp * d_comp;
        d00 += k * (m11 / det - m11s / ds);
        d11 += k * (m00 / det - m00s / ds);
        d01 += k * (-two * m01 / det + two * m01 / ds);
    }
    // full-matrix gradient of the symmetric Σ′
    let mut d_sigma2d: Mat2<T> = [[d00, half * d01], [half * d01, d11]];

    let terms = projection_terms(g, ctx);
    let mut d_sigma3 = [[T::zero(); 3]; 3];
    let mut d_tmap: Mat23<T> = [[T::zero(); 3]; 2];
    if cfg.project.kernel == KernelMode::Skew {
        let bound = cfg.project.skew_bound;
        let d_skew_raw = s.skew2d_raw.clamped_backward(bound, sg.d_skew);
        // a degenerate projection (zero-skew fallback) pulls back to zero
        let mut pull = |eta: Vec3<T>, grad: [T; 2]| -> Vec3<T> {
            if grad == [T::zero(); 2] {
                return [T::zero(); 3];
            }
            let r = project_skewness_backward(eta, &terms.t_map, &terms.sigma, &terms.sigma2d, grad);
            for i in 0..3 {
                for j in 0..3 {
                    d_sigma3[i][j] += r.d_sigma[i][j];
                }
            }
            for i in 0..2 {
                for j in 0..3 {
                    d_tmap[i][j] += r.d_t[i][j];
                }
                for j in 0..2 {
                    d_sigma2d[i][j] += r.d_sigma2d[i][j];
                }
            }
            r.d_eta
        };
        let d_eta_k = pull(g.beta, d_skew_raw);
        let d_eta_b = pull(add3(g.beta, g.dir), sg.d_boundary);
        out.d_beta = add3(d_eta_k, d_eta_b);
        out.d_dir = d_eta_b;
    }

    let (ds3, dt3) = screen_cov_backward(&terms, &d_sigma2d);
    for i in 0..3 {
        for j in 0..3 {
            d_sigma3[i][j] += ds3[i][j];
        }
    }
    for i in 0..2 {
        for j in 0..3 {
            d_tmap[i][j] += dt3[i][j];
        }
    }
    let (d_ls, d_q) = covariance_backward(g, &d_sigma3);
    out.d_log_scale = d_ls;
    out.d_rot = d_q;

    let d_t = perspective_backward(ctx, terms.t_cam, &d_tmap, sg.d_mean2d);
    out.d_mu = mat3t_vec(&ctx.rot, d_t);
    let d_mu_color = eval_color_backward(&g.sh, g.mu, ctx.center, s.color_active, sg.d_color, &mut out.d_sh);
    out.d_mu = add3(out.d_mu, d_mu_color);

    let ndc_x = sg.d_mean2d[0] * T::from_usize_lossy(ctx.width) * half;
    let ndc_y = sg.d_mean2d[1] * T::from_usize_lossy(ctx.height) * half;
    (out, d_t[2].abs(), (ndc_x * ndc_x + ndc_y * ndc_y).sqrt())
}

/// Screen-space gradients of every splat in `frame`, reduced over tiles in
/// tile order.
pub fn screen_gradients<T: Real>(frame: &FrameBundle<T>, d_pixels: &[T]) -> Vec<ScreenGrad<T>> {
    let grid = &frame.grid;
    let per_tile: Vec<Vec<ScreenGrad<T>>> = (0..grid.tile_count())
        .into_par_iter()
        .map(|tile| backward_tile(frame, d_pixels, tile))
        .collect();
    let mut acc = vec![ScreenGrad::default(); frame.splats.len()];
    for (tile, grads) in per_tile.iter().enumerate() {
        let (start, _) = grid.ranges[tile];
        for (k, g) in grads.iter().enumerate() {
            acc[grid.instances[start + k] as usize].add(g);
        }
    }
    acc
}

/// Backward pass for `frame`, produced by `render_forward` on the same
/// scene, view and config, given `∂L/∂pixel` (interleaved RGB).
pub fn render_backward<T: Real>(
    scene: &Scene<T>,
    view: &CameraView<T>,
    cfg: &RenderConfig<T>,
    frame: &FrameBundle<T>,
    d_pixels: &[T],
) -> Result<GradientBundle<T>> {
    if frame.fingerprint != fingerprint(scene, view) {
        return Err(Error::FrameMismatch("frame was rendered from a different scene or view".into()));
    }
    let n_px = view.width * view.height;
    if d_pixels.len() != n_px * 3 {
        return Err(Error::dims((n_px * 3, 1), (d_pixels.len(), 1)));
    }
    let screen = screen_gradients(frame, d_pixels);
    let ctx = view.context();
    let chained: Vec<(usize, PrimitiveGrad<T>, T, T)> = frame
        .splats
        .par_iter()
        .zip(&screen)
        .map(|(s, sg)| {
            let (g, gz, guv) = chain_to_primitive(&scene.primitives[s.index], s, sg, &ctx, cfg);
            (s.index, g, gz, guv)
        })
        .collect();
    let mut out = GradientBundle::zeros(scene);
    for (i, g, gz, guv) in chained {
        out.grads[i] = g;
        out.g_z[i] = gz;
        out.g_uv[i] = guv;
        out.visible[i] = true;
    }
    Ok(out)
}
