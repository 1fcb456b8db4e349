//! Image quality metrics: PSNR and SSIM, with the SSIM gradient.

use crate::error::Result;
use crate::image::Image;
use crate::scalar::Real;

pub const PSNR_CAP: f64 = 100.0;
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

pub fn mse<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<T> {
    a.check_same_size(b)?;
    let n = T::from_usize_lossy(a.data.len().max(1));
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>() / n)
}

/// PSNR in dB for images in `[0, 1]`, capped at [`PSNR_CAP`].
pub fn psnr<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<T> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse<T: Real>(mse: T) -> T {
    let cap = T::lit(PSNR_CAP);
    if mse <= T::zero() {
        return cap;
    }
    (T::lit(-10.0) * mse.log10()).min(cap)
}

fn gaussian_taps<T: Real>() -> [T; WINDOW] {
    let half = (WINDOW / 2) as f64;
    let raw: [f64; WINDOW] = std::array::from_fn(|i| {
        let d = i as f64 - half;
        (-d * d / (2.0 * SIGMA * SIGMA)).exp()
    });
    let s: f64 = raw.iter().sum();
    std::array::from_fn(|i| T::lit(raw[i] / s))
}

/// Separable "same"-size Gaussian filter of one channel plane with zero
/// padding. The filter is symmetric, so it is its own adjoint.
fn blur<T: Real>(plane: &[T], w: usize, h: usize, taps: &[T; WINDOW]) -> Vec<T> {
    let r = (WINDOW / 2) as isize;
    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, t) in taps.iter().enumerate() {
                let xx = x as isize + k as isize - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += *t * plane[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, t) in taps.iter().enumerate() {
                let yy = y as isize + k as isize - r;
                if yy >= 0 && (yy as usize) < h {
                    acc += *t * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn channel<T: Real>(img: &Image<T>, ch: usize) -> Vec<T> {
    img.data.iter().skip(ch).step_by(3).copied().collect()
}

/// Mean SSIM over pixels and channels.
pub fn ssim<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<T> {
    Ok(ssim_with_grad(a, b, false)?.0)
}

/// Mean SSIM and, when `want_grad`, its gradient with respect to `a`.
pub fn ssim_with_grad<T: Real>(a: &Image<T>, b: &Image<T>, want_grad: bool) -> Result<(T, Vec<T>)> {
    a.check_same_size(b)?;
    let (w, h) = (a.width, a.height);
    let n = w * h;
    let taps = gaussian_taps::<T>();
    let (c1, c2) = (T::lit(C1), T::lit(C2));
    let two = T::lit(2.0);
    let mut total = T::zero();
    let mut grad = if want_grad { vec![T::zero(); n * 3] } else { Vec::new() };
    let inv_count = T::one() / T::from_usize_lossy((n * 3).max(1));
    for ch in 0..3 {
        let x = channel(a, ch);
        let y = channel(b, ch);
        let xx: Vec<T> = x.iter().map(|v| *v * *v).collect();
        let yy: Vec<T> = y.iter().map(|v| *v * *v).collect();
        let xy: Vec<T> = x.iter().zip(&y).map(|(p, q)| *p * *q).collect();
        let mx = blur(&x, w, h, &taps);
        let my = blur(&y, w, h, &taps);
        let exx = blur(&xx, w, h, &taps);
        let eyy = blur(&yy, w, h, &taps);
        let exy = blur(&xy, w, h, &taps);
        let mut d_mx = vec![T::zero(); if want_grad { n } else { 0 }];
        let mut d_exx = d_mx.clone();
        let mut d_exy = d_mx.clone();
        for i in 0..n {
            let a1 = two * mx[i] * my[i] + c1;
            let a2 = two * (exy[i] - mx[i] * my[i]) + c2;
            let b1 = mx[i] * mx[i] + my[i] * my[i] + c1;
            let b2 = (exx[i] - mx[i] * mx[i]) + (eyy[i] - my[i] * my[i]) + c2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                let bb = b1 * b2;
                d_mx[i] = inv_count
                    * ((two * my[i] * a2 - two * my[i] * a1) / bb - s * (two * mx[i] / b1 - two * mx[i] / b2));
                d_exx[i] = inv_count * (-s / b2);
                d_exy[i] = inv_count * (two * a1 / bb);
            }
        }
        if want_grad {
            let gm = blur(&d_mx, w, h, &taps);
            let gxx = blur(&d_exx, w, h, &taps);
            let gxy = blur(&d_exy, w, h, &taps);
            for i in 0..n {
                grad[i * 3 + ch] = gm[i] + two * x[i] * gxx[i] + y[i] * gxy[i];
            }
        }
    }
    Ok((total * inv_count, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Metrics {
    pub psnr: f64,
    pub ssim: f64,
}

pub fn metrics<T: Real>(a: &Image<T>, b: &Image<T>) -> Result<Metrics> {
    Ok(Metrics { psnr: psnr(a, b)?.to_f64_lossy(), ssim: ssim(a, b)?.to_f64_lossy() })
}
