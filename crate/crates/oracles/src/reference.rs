//! Brute-force symmetric Gaussian splatting renderer.
//!
//! No tiles, no caching: every pixel walks the full depth-sorted list. Pixel
//! conventions follow the standard splatting pipeline: pixel centers at
//! `(i + 0.5, j + 0.5)`, opacity clamped at 0.99, contributions below 1/255
//! skipped, a splat is ignored at pixels farther than three standard
//! deviations (largest axis) from its center, and blending stops before the
//! transmittance would fall under 1e-4.

use crate::dual::RefScalar;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;

#[derive(Clone, Debug)]
pub struct RefGaussian<S> {
    pub mean: [S; 3],
    pub log_scale: [S; 3],
    /// `(w, x, y, z)`, normalized inside the renderer.
    pub quat: [S; 4],
    /// Degree-0 coefficient first, then the three degree-1 coefficients if present.
    pub sh: Vec<[S; 3]>,
    pub opacity_logit: S,
}

/// Pinhole camera in the computer-vision convention (x right, y down, z forward).
#[derive(Clone, Debug)]
pub struct RefCamera {
    pub world_to_cam_rot: [[f64; 3]; 3],
    pub world_to_cam_t: [f64; 3],
    pub center: [f64; 3],
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
}

struct Splat<S> {
    depth: f64,
    index: usize,
    mean: [S; 2],
    conic: [S; 3],
    opacity: S,
    color: [S; 3],
    radius: f64,
}

fn sigmoid<S: RefScalar>(x: S) -> S {
    S::cst(1.0) / (S::cst(1.0) + (-x).exp())
}

/// Screen covariance `J W Σ Wᵀ Jᵀ`, computed with full 3x3 products.
pub fn screen_covariance<S: RefScalar>(g: &RefGaussian<S>, cam: &RefCamera) -> Option<([S; 3], [S; 3])> {
    let c = |v: f64| S::cst(v);
    let w = &cam.world_to_cam_rot;
    let mut t = [c(0.0); 3];
    for i in 0..3 {
        t[i] = c(w[i][0]) * g.mean[0] + c(w[i][1]) * g.mean[1] + c(w[i][2]) * g.mean[2]
            + c(cam.world_to_cam_t[i]);
    }
    if t[2].val() <= cam.near {
        return None;
    }
    let qn = (g.quat[0] * g.quat[0] + g.quat[1] * g.quat[1] + g.quat[2] * g.quat[2]
        + g.quat[3] * g.quat[3])
        .sqrt();
    let (qw, qx, qy, qz) = (g.quat[0] / qn, g.quat[1] / qn, g.quat[2] / qn, g.quat[3] / qn);
    let one = c(1.0);
    let two = c(2.0);
    let r = [
        [one - two * (qy * qy + qz * qz), two * (qx * qy - qw * qz), two * (qx * qz + qw * qy)],
        [two * (qx * qy + qw * qz), one - two * (qx * qx + qz * qz), two * (qy * qz - qw * qx)],
        [two * (qx * qz - qw * qy), two * (qy * qz + qw * qx), one - two * (qx * qx + qy * qy)],
    ];
    let s = [g.log_scale[0].exp(), g.log_scale[1].exp(), g.log_scale[2].exp()];
    // Σ = R diag(s²) Rᵀ
    let mut sigma = [[c(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = c(0.0);
            for k in 0..3 {
                acc = acc + r[i][k] * s[k] * s[k] * r[j][k];
            }
            sigma[i][j] = acc;
        }
    }
    // 3x3 Jacobian with an empty last row, as in the classic splatting code.
    let z = t[2];
    let jac = [
        [c(cam.fx) / z, c(0.0), -(c(cam.fx) * t[0]) / (z * z)],
        [c(0.0), c(cam.fy) / z, -(c(cam.fy) * t[1]) / (z * z)],
        [c(0.0), c(0.0), c(0.0)],
    ];
    let mut m = [[c(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = c(0.0);
            for k in 0..3 {
                acc = acc + jac[i][k] * c(w[k][j]);
            }
            m[i][j] = acc;
        }
    }
    let mut ms = [[c(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = c(0.0);
            for k in 0..3 {
                acc = acc + m[i][k] * sigma[k][j];
            }
            ms[i][j] = acc;
        }
    }
    let mut cov = [[c(0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = c(0.0);
            for k in 0..3 {
                acc = acc + ms[i][k] * m[j][k];
            }
            cov[i][j] = acc;
        }
    }
    Some(([cov[0][0], cov[0][1], cov[1][1]], t))
}

fn project<S: RefScalar>(g: &RefGaussian<S>, index: usize, cam: &RefCamera, dilation: f64) -> Option<Splat<S>> {
    let c = |v: f64| S::cst(v);
    let (cov, t) = screen_covariance(g, cam)?;
    let det_plain = cov[0] * cov[2] - cov[1] * cov[1];
    let (a, b, cc) = (cov[0] + c(dilation), cov[1], cov[2] + c(dilation));
    let det = a * cc - b * b;
    if det.val() <= 0.0 || det_plain.val() <= 0.0 {
        return None;
    }
    let conic = [cc / det, -b / det, a / det];
    let comp = (det_plain / det).sqrt();
    let mid = 0.5 * (a.val() + cc.val());
    let lambda = mid + (mid * mid - det.val()).max(0.0).sqrt();
    let radius = 3.0 * lambda.sqrt();
    let mean = [
        c(cam.fx) * t[0] / t[2] + c(cam.cx),
        c(cam.fy) * t[1] / t[2] + c(cam.cy),
    ];
    let mut color = [c(0.0); 3];
    for ch in 0..3 {
        let mut v = c(SH_C0) * g.sh[0][ch] + c(0.5);
        if g.sh.len() >= 4 {
            let d = [
                g.mean[0] - c(cam.center[0]),
                g.mean[1] - c(cam.center[1]),
                g.mean[2] - c(cam.center[2]),
            ];
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let (x, y, z) = (d[0] / n, d[1] / n, d[2] / n);
            v = v - c(SH_C1) * y * g.sh[1][ch] + c(SH_C1) * z * g.sh[2][ch]
                - c(SH_C1) * x * g.sh[3][ch];
        }
        color[ch] = v.max0();
    }
    Some(Splat {
        depth: t[2].val(),
        index,
        mean,
        conic,
        opacity: sigmoid(g.opacity_logit) * comp,
        color,
        radius,
    })
}

/// Renders an RGB image (row-major, interleaved) over `background`.
pub fn render<S: RefScalar>(
    gaussians: &[RefGaussian<S>],
    cam: &RefCamera,
    dilation: f64,
    background: [f64; 3],
) -> Vec<S> {
    let mut splats: Vec<Splat<S>> = gaussians
        .iter()
        .enumerate()
        .filter_map(|(i, g)| project(g, i, cam, dilation))
        .collect();
    splats.sort_by(|p, q| p.depth.total_cmp(&q.depth).then(p.index.cmp(&q.index)));

    let mut out = Vec::with_capacity(cam.width * cam.height * 3);
    for py in 0..cam.height {
        for px in 0..cam.width {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut trans = S::cst(1.0);
            let mut rgb = [S::cst(0.0); 3];
            for s in &splats {
                let dx = S::cst(x) - s.mean[0];
                let dy = S::cst(y) - s.mean[1];
                if (dx.val() * dx.val() + dy.val() * dy.val()).sqrt() > s.radius {
                    continue;
                }
                let power = S::cst(-0.5) * (s.conic[0] * dx * dx + s.conic[2] * dy * dy)
                    - s.conic[1] * dx * dy;
                if power.val() > 0.0 {
                    continue;
                }
                let mut alpha = s.opacity * power.exp();
                if alpha.val() > 0.99 {
                    alpha = S::cst(0.99);
                }
                if alpha.val() < 1.0 / 255.0 {
                    continue;
                }
                let next = trans * (S::cst(1.0) - alpha);
                if next.val() < 1e-4 {
                    break;
                }
                for ch in 0..3 {
                    rgb[ch] = rgb[ch] + s.color[ch] * alpha * trans;
                }
                trans = next;
            }
            for ch in 0..3 {
                out.push(rgb[ch] + trans * S::cst(background[ch]));
            }
        }
    }
    out
}
