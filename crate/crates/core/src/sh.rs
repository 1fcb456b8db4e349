//! View-dependent color from low-order spherical harmonics (degrees 0 and 1).

use crate::linalg::{norm3, sub3, Vec3};
use crate::scalar::Real;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;

/// Highest degree the renderer evaluates.
pub const MAX_SH_DEGREE: usize = 1;

pub fn rgb_to_dc<T: Real>(rgb: [T; 3]) -> [T; 3] {
    let c0 = T::lit(SH_C0);
    let h = T::lit(0.5);
    [(rgb[0] - h) / c0, (rgb[1] - h) / c0, (rgb[2] - h) / c0]
}

/// Color seen from `cam_center`, clamped below at zero per channel. The
/// second value flags channels that were not clamped.
pub fn eval_color<T: Real>(sh: &[[T; 3]], mu: Vec3<T>, cam_center: Vec3<T>) -> ([T; 3], [bool; 3]) {
    let c0 = T::lit(SH_C0);
    let mut rgb = [T::zero(); 3];
    for ch in 0..3 {
        rgb[ch] = c0 * sh[0][ch] + T::lit(0.5);
    }
    if sh.len() >= 4 {
        let d = sub3(mu, cam_center);
        let n = norm3(d);
        let (x, y, z) = (d[0] / n, d[1] / n, d[2] / n);
        let c1 = T::lit(SH_C1);
        for ch in 0..3 {
            rgb[ch] += -c1 * y * sh[1][ch] + c1 * z * sh[2][ch] - c1 * x * sh[3][ch];
        }
    }
    let mut active = [true; 3];
    for ch in 0..3 {
        if rgb[ch] < T::zero() {
            rgb[ch] = T::zero();
            active[ch] = false;
        }
    }
    (rgb, active)
}

/// Backward of [`eval_color`]: accumulates coefficient gradients into
/// `d_sh` and returns the gradient with respect to the primitive position.
pub fn eval_color_backward<T: Real>(
    sh: &[[T; 3]],
    mu: Vec3<T>,
    cam_center: Vec3<T>,
    active: [bool; 3],
    d_rgb: [T; 3],
    d_sh: &mut [[T; 3]],
) -> Vec3<T> {
    let mut g = d_rgb;
    for ch in 0..3 {
        if !active[ch] {
            g[ch] = T::zero();
        }
    }
    let c0 = T::lit(SH_C0);
    for ch in 0..3 {
        d_sh[0][ch] += c0 * g[ch];
    }
    if sh.len() < 4 {
        return [T::zero(); 3];
    }
    let d = sub3(mu, cam_center);
    let n = norm3(d);
    let (x, y, z) = (d[0] / n, d[1] / n, d[2] / n);
    let c1 = T::lit(SH_C1);
    let mut d_dir = [T::zero(); 3];
    for ch in 0..3 {
        d_sh[1][ch] += -c1 * y * g[ch];
        d_sh[2][ch] += c1 * z * g[ch];
        d_sh[3][ch] += -c1 * x * g[ch];
        d_dir[0] += -c1 * sh[3][ch] * g[ch];
        d_dir[1] += -c1 * sh[1][ch] * g[ch];
        d_dir[2] += c1 * sh[2][ch] * g[ch];
    }
    // unit-vector normalization: (I - u uᵀ)/|d|
    let u = [x, y, z];
    let proj = d_dir[0] * u[0] + d_dir[1] * u[1] + d_dir[2] * u[2];
    [
        (d_dir[0] - u[0] * proj) / n,
        (d_dir[1] - u[1] * proj) / n,
        (d_dir[2] - u[2] * proj) / n,
    ]
}
