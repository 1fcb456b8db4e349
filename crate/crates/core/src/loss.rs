//! Training objective: photometric terms plus skew and opacity regularizers.

use crate::backward::GradientBundle;
use crate::error::Result;
use crate::image::Image;
use crate::metrics::ssim_with_grad;
use crate::scalar::Real;
use crate::scene::Scene;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights<T> {
    pub lambda_ssim: T,
    /// Weight decay on every skewness vector.
    pub lambda_beta_reg: T,
    /// L1 penalty on the gap between the two opacities of a primitive.
    pub lambda_op: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self { lambda_ssim: T::lit(0.2), lambda_beta_reg: T::lit(1e-4), lambda_op: T::lit(1e-3) }
    }
}

#[derive(Clone, Debug)]
pub struct LossValue<T> {
    pub total: T,
    pub l1: T,
    pub ssim: T,
    pub reg: T,
    /// Gradient of the photometric part with respect to the rendered pixels.
    pub d_pixels: Vec<T>,
}

/// `(1 − λ)·L1 + λ·(1 − SSIM)` and its pixel gradient.
pub fn photometric<T: Real>(rendered: &Image<T>, target: &Image<T>, lambda_ssim: T) -> Result<(T, T, T, Vec<T>)> {
    rendered.check_same_size(target)?;
    let n = T::from_usize_lossy(rendered.data.len().max(1));
    let w1 = T::one() - lambda_ssim;
    let mut l1 = T::zero();
    let mut d: Vec<T> = rendered
        .data
        .iter()
        .zip(&target.data)
        .map(|(a, b)| {
            let e = *a - *b;
            l1 += e.abs();
            w1 * sign(e) / n
        })
        .collect();
    l1 /= n;
    let mut ssim = T::one();
    if lambda_ssim != T::zero() {
        let (s, g) = ssim_with_grad(rendered, target, true)?;
        ssim = s;
        for (di, gi) in d.iter_mut().zip(g) {
            *di -= lambda_ssim * gi;
        }
    }
    Ok((w1 * l1 + lambda_ssim * (T::one() - ssim), l1, ssim, d))
}

fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Regularizer value; its parameter gradient is added into `grads`.
pub fn regularize<T: Real>(scene: &Scene<T>, w: &LossWeights<T>, grads: &mut GradientBundle<T>) -> T {
    let two = T::lit(2.0);
    let mut total = T::zero();
    for (g, pg) in scene.primitives.iter().zip(grads.grads.iter_mut()) {
        if w.lambda_beta_reg != T::zero() {
            for k in 0..3 {
                total += w.lambda_beta_reg * g.beta[k] * g.beta[k];
                pg.d_beta[k] += w.lambda_beta_reg * two * g.beta[k];
            }
        }
        if w.lambda_op != T::zero() {
            let [p1, p2] = g.opacities();
            let s = sign(p1 - p2);
            total += w.lambda_op * (p1 - p2).abs();
            pg.d_opacity_logits[0] += w.lambda_op * s * p1 * (T::one() - p1);
            pg.d_opacity_logits[1] -= w.lambda_op * s * p2 * (T::one() - p2);
        }
    }
    total
}

/// Full objective for one view. The pixel gradient covers the photometric
/// part only; regularizer gradients go through [`regularize`].
pub fn loss<T: Real>(rendered: &Image<T>, target: &Image<T>, scene: &Scene<T>, w: &LossWeights<T>) -> Result<LossValue<T>> {
    let (photo, l1, ssim, d_pixels) = photometric(rendered, target, w.lambda_ssim)?;
    let mut reg = T::zero();
    for g in &scene.primitives {
        reg += w.lambda_beta_reg * g.beta.iter().map(|b| *b * *b).sum::<T>();
        let [p1, p2] = g.opacities();
        reg += w.lambda_op * (p1 - p2).abs();
    }
    Ok(LossValue { total: photo + reg, l1, ssim, reg, d_pixels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SkewGaussian;

    fn img(seed: u64) -> Image<f64> {
        let mut s = seed;
        Image::from_fn(12, 12, |_, _| {
            std::array::from_fn(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
        })
    }

    #[test]
    fn identical_images_zero_loss() {
        let a = img(1);
        let scene = Scene::<f64>::new(0);
        let l = loss(&a, &a, &scene, &LossWeights::default()).unwrap();
        assert!(l.total.abs() < 1e-12);
    }

    #[test]
    fn pure_l1_is_mean_absolute_error() {
        let (a, b) = (img(1), img(2));
        let (l, ..) = photometric(&a, &b, 0.0).unwrap();
        let mae = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data.len() as f64;
        assert!((l - mae).abs() < 1e-14);
    }

    #[test]
    fn photometric_gradient_matches_fd() {
        let (a, b) = (img(3), img(4));
        let (_, _, _, d) = photometric(&a, &b, 0.2).unwrap();
        let h = 1e-7;
        for i in (0..a.data.len()).step_by(11) {
            let mut p = a.clone();
            p.data[i] += h;
            let mut m = a.clone();
            m.data[i] -= h;
            let fd = (photometric(&p, &b, 0.2).unwrap().0 - photometric(&m, &b, 0.2).unwrap().0) / (2.0 * h);
            assert!((fd - d[i]).abs() < 1e-7, "{fd} {}", d[i]);
        }
    }

    #[test]
    fn regularizer_gradient_matches_fd() {
        let mut scene = Scene::<f64>::new(0);
        let mut g = SkewGaussian::isotropic([0.0; 3], 0.1, [0.5; 3], 0.5, 0);
        g.beta = [0.3, -1.2, 0.7];
        g.opacity_logits = [0.4, -0.9];
        scene.push(g);
        let w = LossWeights { lambda_ssim: 0.0, lambda_beta_reg: 0.01, lambda_op: 0.1 };
        let mut grads = GradientBundle::zeros(&scene);
        let r0 = regularize(&scene, &w, &mut grads);
        let h = 1e-6;
        let eval = |s: &Scene<f64>| regularize(s, &w, &mut GradientBundle::zeros(s));
        for k in 0..3 {
            let mut p = scene.clone();
            p.primitives[0].beta[k] += h;
            let mut m = scene.clone();
            m.primitives[0].beta[k] -= h;
            assert!(((eval(&p) - eval(&m)) / (2.0 * h) - grads.grads[0].d_beta[k]).abs() < 1e-8);
        }
        for k in 0..2 {
            let mut p = scene.clone();
            p.primitives[0].opacity_logits[k] += h;
            let mut m = scene.clone();
            m.primitives[0].opacity_logits[k] -= h;
            assert!(((eval(&p) - eval(&m)) / (2.0 * h) - grads.grads[0].d_opacity_logits[k]).abs() < 1e-8);
        }
        assert!(r0 > 0.0);
    }
}
