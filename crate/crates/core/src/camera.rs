//! Camera poses, pinhole intrinsics and per-view projection of primitives
//! into screen-space splats.
//!
//! Internally everything runs in the computer-vision frame (x right, y down,
//! z forward). Poses tagged with the graphics convention (x right, y up,
//! z backward, as exported by Blender) are converted on entry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Conic, Skew2D};
use crate::linalg::{
    add3, det2, inv2, mat23_vec, mat3_vec, mul22, mul23_33, mul23_23t, mul23t_23, mul33, norm3,
    rigid_inverse, sub3, sym2_eigenvalues, transpose3, Mat2, Mat23, Mat3, Mat4, Vec2, Vec3,
};
use crate::scalar::Real;
use crate::scene::SkewGaussian;
use crate::sh::eval_color;

/// Axis convention of a camera-to-world matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Right, up, back (OpenGL, Blender).
    #[serde(alias = "blender", alias = "opengl_rub")]
    OpenGl,
    /// Right, down, forward (OpenCV, COLMAP).
    #[default]
    #[serde(alias = "opencv_rdf")]
    OpenCv,
}

/// A posed pinhole camera.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraView<T> {
    /// Row-major camera-to-world transform.
    pub c2w: Mat4<T>,
    pub convention: Convention,
    pub width: usize,
    pub height: usize,
    pub fov_x: T,
    pub fov_y: T,
    pub near: T,
    pub far: T,
}

pub const DEFAULT_NEAR: f64 = 0.01;
pub const DEFAULT_FAR: f64 = 1.0e4;

/// Vertical field of view matching `fov_x` on a `width` × `height` sensor
/// with square pixels.
pub fn fov_y_from_x<T: Real>(fov_x: T, width: usize, height: usize) -> T {
    let aspect = T::from_usize_lossy(height) / T::from_usize_lossy(width);
    T::lit(2.0) * ((fov_x * T::lit(0.5)).tan() * aspect).atan()
}

impl<T: Real> CameraView<T> {
    /// Builds and validates a view; `fov_y` follows from the aspect ratio.
    /// A bottom row within `1e-6` of `(0, 0, 0, 1)` is snapped to it.
    pub fn new(c2w: Mat4<T>, convention: Convention, width: usize, height: usize, fov_x: T) -> Result<Self> {
        let mut view = Self {
            c2w,
            convention,
            width,
            height,
            fov_x,
            fov_y: fov_y_from_x(fov_x, width.max(1), height.max(1)),
            near: T::lit(DEFAULT_NEAR),
            far: T::lit(DEFAULT_FAR),
        };
        view.validate()?;
        view.c2w[3] = [T::zero(), T::zero(), T::zero(), T::one()];
        Ok(view)
    }

    pub fn with_fov_y(mut self, fov_y: T) -> Result<Self> {
        self.fov_y = fov_y;
        self.validate()?;
        Ok(self)
    }

    /// OpenCV-convention camera at `eye` looking at `target`.
    pub fn look_at(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>, width: usize, height: usize, fov_x: T) -> Result<Self> {
        let normalize = |v: Vec3<T>| {
            let n = norm3(v);
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let cross = |a: Vec3<T>, b: Vec3<T>| {
            [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
        };
        let fwd = normalize(sub3(target, eye));
        let right = normalize(cross(fwd, up));
        let down = cross(fwd, right);
        let (o, z) = (T::one(), T::zero());
        let c2w = [
            [right[0], down[0], fwd[0], eye[0]],
            [right[1], down[1], fwd[1], eye[1]],
            [right[2], down[2], fwd[2], eye[2]],
            [z, z, z, o],
        ];
        Self::new(c2w, Convention::OpenCv, width, height, fov_x)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidCamera(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{}", self.width, self.height));
        }
        for (name, fov) in [("fov_x", self.fov_x), ("fov_y", self.fov_y)] {
            if !(fov > T::zero() && fov < T::PI()) {
                return bad(format!("{name} = {fov} outside (0, pi)"));
            }
        }
        if !(self.near > T::zero() && self.far > self.near) {
            return bad(format!("clip range [{}, {}]", self.near, self.far));
        }
        if self.c2w.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite pose".into());
        }
        let row = self.c2w[3];
        let want = [T::zero(), T::zero(), T::zero(), T::one()];
        if row.iter().zip(want).any(|(a, b)| (*a - b).abs() > T::lit(1e-6)) {
            return bad("bottom row is not (0, 0, 0, 1)".into());
        }
        let tol = T::lit(1e-6).max(T::epsilon() * T::lit(32.0));
        for i in 0..3 {
            for j in 0..3 {
                let d: T = (0..3).map(|k| self.c2w[k][i] * self.c2w[k][j]).sum();
                let want = if i == j { T::one() } else { T::zero() };
                if (d - want).abs() > tol {
                    return bad("rotation block is not orthonormal".into());
                }
            }
        }
        Ok(())
    }

    /// Same pose expressed in the OpenCV convention.
    pub fn to_opencv(&self) -> Self {
        let mut out = self.clone();
        if self.convention == Convention::OpenGl {
            // c2w · diag(1, -1, -1, 1)
            for row in out.c2w.iter_mut() {
                row[1] = -row[1];
                row[2] = -row[2];
            }
            out.convention = Convention::OpenCv;
        }
        out
    }

    /// Same pose expressed in the OpenGL convention.
    pub fn to_opengl(&self) -> Self {
        let mut out = self.clone();
        if self.convention == Convention::OpenCv {
            for row in out.c2w.iter_mut() {
                row[1] = -row[1];
                row[2] = -row[2];
            }
            out.convention = Convention::OpenGl;
        }
        out
    }

    pub fn intrinsics(&self) -> Intrinsics<T> {
        let half = T::lit(0.5);
        let w = T::from_usize_lossy(self.width);
        let h = T::from_usize_lossy(self.height);
        Intrinsics {
            fx: w / (T::lit(2.0) * (self.fov_x * half).tan()),
            fy: h / (T::lit(2.0) * (self.fov_y * half).tan()),
            cx: w * half,
            cy: h * half,
        }
    }

    /// Camera center in world space.
    pub fn center(&self) -> Vec3<T> {
        [self.c2w[0][3], self.c2w[1][3], self.c2w[2][3]]
    }

    /// Precomputed world-to-camera quantities for projection.
    pub fn context(&self) -> ViewContext<T> {
        let cv = self.to_opencv();
        let (rot, trans) = rigid_inverse(&cv.c2w);
        ViewContext {
            rot,
            trans,
            center: cv.center(),
            intr: cv.intrinsics(),
            width: cv.width,
            height: cv.height,
            near: cv.near,
            far: cv.far,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

impl<T: Real> Intrinsics<T> {
    pub fn matrix(&self) -> Mat3<T> {
        let (o, z) = (T::one(), T::zero());
        [[self.fx, z, self.cx], [z, self.fy, self.cy], [z, z, o]]
    }
}

/// World-to-camera transform and intrinsics of one OpenCV-convention view.
#[derive(Clone, Debug)]
pub struct ViewContext<T> {
    pub rot: Mat3<T>,
    pub trans: Vec3<T>,
    pub center: Vec3<T>,
    pub intr: Intrinsics<T>,
    pub width: usize,
    pub height: usize,
    pub near: T,
    pub far: T,
}

impl<T: Real> ViewContext<T> {
    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        add3(mat3_vec(&self.rot, p), self.trans)
    }

    /// 2×3 perspective Jacobian at camera-space point `t`.
    pub fn jacobian(&self, t: Vec3<T>) -> Mat23<T> {
        let Intrinsics { fx, fy, .. } = self.intr;
        let iz = T::one() / t[2];
        let iz2 = iz * iz;
        [[fx * iz, T::zero(), -fx * t[0] * iz2], [T::zero(), fy * iz, -fy * t[1] * iz2]]
    }
}

/// Kernel family used by the rasterizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    #[default]
    Skew,
    /// Symmetric Gaussian; skewness and boundary directions are ignored.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectParams<T> {
    /// Screen-space dilation `s` added to the covariance diagonal (px²).
    pub dilation: T,
    /// Largest admissible magnitude of the screen-space skewness.
    pub skew_bound: T,
    pub kernel: KernelMode,
}

impl<T: Real> Default for ProjectParams<T> {
    fn default() -> Self {
        Self {
            dilation: T::lit(0.3),
            skew_bound: T::lit(crate::kernel::SKEW_BOUND),
            kernel: KernelMode::Skew,
        }
    }
}

/// One primitive as seen from one view.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenSplat<T> {
    pub index: usize,
    pub mean2d: Vec2<T>,
    pub conic: Conic<T>,
    /// Skewness used by the kernel (after the magnitude bound).
    pub skew2d: Skew2D<T>,
    pub skew2d_raw: Skew2D<T>,
    /// Normal of the line separating the two opacity regions.
    pub boundary2d: Skew2D<T>,
    pub depth: T,
    pub t_cam: Vec3<T>,
    /// Base opacities, already multiplied by `dilation_comp`.
    pub opacity_pair: [T; 2],
    pub dilation_comp: T,
    pub color: [T; 3],
    pub color_active: [bool; 3],
    pub radius: T,
    /// Undilated screen covariance `[σxx, σxy, σyy]`.
    pub cov2d: [T; 3],
    /// Number of skew projections that fell back to zero skew.
    pub skew_fallbacks: u8,
}

/// Projects a 3D skewness vector `eta` through the affine map `T` for a
/// skew-normal of covariance `sigma` whose image has covariance `sigma2d`.
///
/// Returns `None` when the normalizer is not positive (numerically
/// degenerate input); callers treat that as zero skew.
pub fn project_skewness<T: Real>(eta: Vec3<T>, t: &Mat23<T>, sigma: &Mat3<T>, sigma2d: &Mat2<T>) -> Option<Skew2D<T>> {
    if eta.iter().all(|v| *v == T::zero()) {
        return Some(Skew2D::zero());
    }
    let p = inv2(sigma2d)?;
    let se = mat3_vec(sigma, eta);
    let v = mat23_vec(t, se);
    let num = [p[0][0] * v[0] + p[0][1] * v[1], p[1][0] * v[0] + p[1][1] * v[1]];
    let q = eta[0] * se[0] + eta[1] * se[1] + eta[2] * se[2] - (v[0] * num[0] + v[1] * num[1]);
    let r = T::one() + q;
    if !(r > T::zero()) || !r.is_finite() {
        return None;
    }
    let k = T::one() / r.sqrt();
    Some(Skew2D::new(num[0] * k, num[1] * k))
}

/// Gradients of [`project_skewness`] with respect to all of its inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkewProjectionGrad<T> {
    pub d_eta: Vec3<T>,
    pub d_t: Mat23<T>,
    pub d_sigma: Mat3<T>,
    pub d_sigma2d: Mat2<T>,
}

/// Backward of [`project_skewness`] for an upstream gradient `g` on the
/// projected skewness. Matrix gradients are full (not symmetrized).
pub fn project_skewness_backward<T: Real>(
    eta: Vec3<T>,
    t: &Mat23<T>,
    sigma: &Mat3<T>,
    sigma2d: &Mat2<T>,
    g: [T; 2],
) -> SkewProjectionGrad<T> {
    let z = T::zero();
    let mut out = SkewProjectionGrad { d_eta: [z; 3], d_t: [[z; 3]; 2], d_sigma: [[z; 3]; 3], d_sigma2d: [[z; 2]; 2] };
    let Some(p) = inv2(sigma2d) else { return out };
    let se = mat3_vec(sigma, eta);
    let v = mat23_vec(t, se);
    let num = [p[0][0] * v[0] + p[0][1] * v[1], p[1][0] * v[0] + p[1][1] * v[1]];
    let q = eta[0] * se[0] + eta[1] * se[1] + eta[2] * se[2] - (v[0] * num[0] + v[1] * num[1]);
    let r = T::one() + q;
    if !(r > T::zero()) || !r.is_finite() {
        return out;
    }
    let sr = r.sqrt();
    let beta = [num[0] / sr, num[1] / sr];
    let d_num = [g[0] / sr, g[1] / sr];
    let dq = -(g[0] * beta[0] + g[1] * beta[1]) / (T::lit(2.0) * r);
    let two = T::lit(2.0);

    // num = P v and the -vᵀPv term of q
    let mut d_p = [[z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            d_p[i][j] = d_num[i] * v[j] - dq * v[i] * v[j];
        }
    }
    let pt_dnum = [p[0][0] * d_num[0] + p[1][0] * d_num[1], p[0][1] * d_num[0] + p[1][1] * d_num[1]];
    let dv = [pt_dnum[0] - two * dq * num[0], pt_dnum[1] - two * dq * num[1]];

    // ηᵀΣη
    for i in 0..3 {
        out.d_eta[i] += two * dq * se[i];
        for j in 0..3 {
            out.d_sigma[i][j] += dq * eta[i] * eta[j];
        }
    }
    // v = T Σ η
    let tdv = [
        t[0][0] * dv[0] + t[1][0] * dv[1],
        t[0][1] * dv[0] + t[1][1] * dv[1],
        t[0][2] * dv[0] + t[1][2] * dv[1],
    ];
    for i in 0..2 {
        for j in 0..3 {
            out.d_t[i][j] += dv[i] * se[j];
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            out.d_sigma[i][j] += tdv[i] * eta[j];
        }
    }
    let st_tdv = crate::linalg::mat3t_vec(sigma, tdv);
    for i in 0..3 {
        out.d_eta[i] += st_tdv[i];
    }
    // P = Σ'⁻¹ ⇒ dΣ' = -Pᵀ dP Pᵀ
    let pt = [[p[0][0], p[1][0]], [p[0][1], p[1][1]]];
    let m = mul22(&mul22(&pt, &d_p), &pt);
    for i in 0..2 {
        for j in 0..2 {
            out.d_sigma2d[i][j] = -m[i][j];
        }
    }
    out
}

/// Intermediate products of the EWA projection of one primitive.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionTerms<T> {
    pub t_cam: Vec3<T>,
    /// `J · W`, the linear map from world offsets to pixels.
    pub t_map: Mat23<T>,
    pub sigma: Mat3<T>,
    pub sigma2d: Mat2<T>,
}

pub fn projection_terms<T: Real>(g: &SkewGaussian<T>, ctx: &ViewContext<T>) -> ProjectionTerms<T> {
    let t_cam = ctx.to_camera(g.mu);
    let t_map = mul23_33(&ctx.jacobian(t_cam), &ctx.rot);
    let sigma = g.covariance3d();
    let full = mul23_23t(&mul23_33(&t_map, &sigma), &t_map);
    let off = T::lit(0.5) * (full[0][1] + full[1][0]);
    ProjectionTerms { t_cam, t_map, sigma, sigma2d: [[full[0][0], off], [off, full[1][1]]] }
}

/// Projects one primitive; `None` when it is culled.
pub fn project_splat<T: Real>(
    g: &SkewGaussian<T>,
    index: usize,
    ctx: &ViewContext<T>,
    params: &ProjectParams<T>,
) -> Option<ScreenSplat<T>> {
    let t_cam = ctx.to_camera(g.mu);
    if !(t_cam[2] > ctx.near) || t_cam[2] > ctx.far {
        return None;
    }
    let terms = projection_terms(g, ctx);
    let sigma2d = terms.sigma2d;
    let det = det2(&sigma2d);
    let s = params.dilation;
    let dilated = [[sigma2d[0][0] + s, sigma2d[0][1]], [sigma2d[1][0], sigma2d[1][1] + s]];
    let det_d = det2(&dilated);
    if !(det > T::zero()) || !(det_d > T::zero()) || !det.is_finite() {
        return None;
    }
    let inv = inv2(&dilated)?;
    let conic = Conic::new(inv[0][0], inv[0][1], inv[1][1]);
    let comp = (det / det_d).sqrt();
    let (lmax, _) = sym2_eigenvalues(&dilated);
    let radius = T::lit(3.0) * lmax.sqrt();
    let Intrinsics { fx, fy, cx, cy } = ctx.intr;
    let mean2d = [fx * t_cam[0] / t_cam[2] + cx, fy * t_cam[1] / t_cam[2] + cy];
    let (w, h) = (T::from_usize_lossy(ctx.width), T::from_usize_lossy(ctx.height));
    if mean2d[0] + radius < T::zero()
        || mean2d[0] - radius > w
        || mean2d[1] + radius < T::zero()
        || mean2d[1] - radius > h
        || !radius.is_finite()
    {
        return None;
    }

    let mut fallbacks = 0u8;
    let (skew_raw, boundary) = match params.kernel {
        KernelMode::Gaussian => (Skew2D::zero(), Skew2D::zero()),
        KernelMode::Skew => {
            let mut proj = |eta: Vec3<T>| {
                project_skewness(eta, &terms.t_map, &terms.sigma, &sigma2d).unwrap_or_else(|| {
                    fallbacks += 1;
                    Skew2D::zero()
                })
            };
            let k = proj(g.beta);
            let b = proj(add3(g.beta, g.dir));
            (k, b)
        }
    };
    let (color, color_active) = eval_color(&g.sh, g.mu, ctx.center);
    let p = g.opacities();
    Some(ScreenSplat {
        index,
        mean2d,
        conic,
        skew2d: skew_raw.clamped(params.skew_bound),
        skew2d_raw: skew_raw,
        boundary2d: boundary,
        depth: t_cam[2],
        t_cam,
        opacity_pair: [p[0] * comp, p[1] * comp],
        dilation_comp: comp,
        color,
        color_active,
        radius,
        cov2d: [sigma2d[0][0], sigma2d[0][1], sigma2d[1][1]],
        skew_fallbacks: fallbacks,
    })
}

/// Gradient of the loss with respect to the world covariance and the
/// projection map, given a full-matrix gradient on the screen covariance.
pub fn screen_cov_backward<T: Real>(terms: &ProjectionTerms<T>, d_sigma2d: &Mat2<T>) -> (Mat3<T>, Mat23<T>) {
    let sym = |m: &Mat2<T>| {
        let o = T::lit(0.5) * (m[0][1] + m[1][0]);
        [[m[0][0], o], [o, m[1][1]]]
    };
    let g = sym(d_sigma2d);
    // Σ' = T Σ Tᵀ: dΣ = Tᵀ G T, dT = 2 G T Σ
    let gt = crate::linalg::mul22_23(&g, &terms.t_map);
    let d_sigma = mul23t_23(&terms.t_map, &gt);
    let gts = mul23_33(&gt, &terms.sigma);
    let two = T::lit(2.0);
    let d_t = [
        [two * gts[0][0], two * gts[0][1], two * gts[0][2]],
        [two * gts[1][0], two * gts[1][1], two * gts[1][2]],
    ];
    (d_sigma, d_t)
}

/// Pulls a full-matrix gradient on `Σ = R S Sᵀ Rᵀ` back to log-scales and
/// the raw quaternion.
pub fn covariance_backward<T: Real>(g: &SkewGaussian<T>, d_sigma: &Mat3<T>) -> (Vec3<T>, [T; 4]) {
    let r = g.rotation();
    let s = g.scales();
    let mut m = r;
    for row in m.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= s[j];
        }
    }
    let mut sym = *d_sigma;
    for i in 0..3 {
        for j in 0..3 {
            sym[i][j] = d_sigma[i][j] + d_sigma[j][i];
        }
    }
    let d_m = mul33(&sym, &m);
    let mut d_r = d_m;
    let mut d_log_scale = [T::zero(); 3];
    for i in 0..3 {
        for j in 0..3 {
            d_r[i][j] = d_m[i][j] * s[j];
            d_log_scale[j] += d_m[i][j] * r[i][j] * s[j];
        }
    }
    (d_log_scale, crate::linalg::quat_to_rot_backward(g.rot, &d_r))
}

/// Pulls gradients on the projection map `T = J(t)·W` and on the pixel
/// mean back to the camera-space position.
pub fn perspective_backward<T: Real>(ctx: &ViewContext<T>, t: Vec3<T>, d_t_map: &Mat23<T>, d_mean2d: Vec2<T>) -> Vec3<T> {
    let Intrinsics { fx, fy, .. } = ctx.intr;
    // dJ = dT Wᵀ
    let wt = transpose3(&ctx.rot);
    let d_j = mul23_33(d_t_map, &wt);
    let iz = T::one() / t[2];
    let iz2 = iz * iz;
    let iz3 = iz2 * iz;
    let two = T::lit(2.0);
    let mut d = [T::zero(); 3];
    d[0] += d_j[0][2] * (-fx * iz2);
    d[1] += d_j[1][2] * (-fy * iz2);
    d[2] += d_j[0][0] * (-fx * iz2)
        + d_j[0][2] * (two * fx * t[0] * iz3)
        + d_j[1][1] * (-fy * iz2)
        + d_j[1][2] * (two * fy * t[1] * iz3);
    d[0] += d_mean2d[0] * fx * iz;
    d[1] += d_mean2d[1] * fy * iz;
    d[2] += -d_mean2d[0] * fx * t[0] * iz2 - d_mean2d[1] * fy * t[1] * iz2;
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity4;
    use proptest::prelude::*;
    use skewsplat_oracles::special::erf_series;

    fn straight_view(w: usize, h: usize, fov_x: f64) -> CameraView<f64> {
        CameraView::new(identity4(), Convention::OpenCv, w, h, fov_x).unwrap()
    }

    #[test]
    fn to_opencv_flips_y_and_z() {
        let v = CameraView::new(identity4::<f64>(), Convention::OpenGl, 4, 4, 1.0).unwrap();
        let cv = v.to_opencv();
        assert_eq!(cv.convention, Convention::OpenCv);
        let mut want = identity4::<f64>();
        want[1][1] = -1.0;
        want[2][2] = -1.0;
        assert_eq!(cv.c2w, want);
        assert_eq!(cv.to_opencv(), cv);
    }

    #[test]
    fn intrinsics_examples() {
        let k = straight_view(800, 600, std::f64::consts::FRAC_PI_2).intrinsics();
        assert!((k.fx - 400.0).abs() < 1e-9);
        assert_eq!((k.cx, k.cy), (400.0, 300.0));
        let v = straight_view(640, 480, 1.0).with_fov_y(0.8).unwrap();
        let k = v.intrinsics();
        // independent: f = (W/2) / tan(fov/2) via sin/cos
        let fx = 320.0 * (0.5f64).cos() / (0.5f64).sin();
        let fy = 240.0 * (0.4f64).cos() / (0.4f64).sin();
        assert!((k.fx - fx).abs() < 1e-9 && (k.fx - 585.756_071).abs() < 1e-5);
        assert!((k.fy - fy).abs() < 1e-9 && (k.fy - 567.653_381).abs() < 1e-5);
    }

    #[test]
    fn fov_y_follows_aspect() {
        let v = straight_view(200, 100, std::f64::consts::FRAC_PI_2);
        assert!(((v.fov_y * 0.5).tan() - 0.5).abs() < 1e-12);
        let k = v.intrinsics();
        assert!((k.fx - k.fy).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_bad_poses() {
        let mut m = identity4::<f64>();
        m[3][0] = 1.0;
        assert!(CameraView::new(m, Convention::OpenCv, 8, 8, 1.0).is_err());
        let mut m = identity4::<f64>();
        m[0][0] = 1.1;
        assert!(CameraView::new(m, Convention::OpenCv, 8, 8, 1.0).is_err());
        assert!(CameraView::new(identity4::<f64>(), Convention::OpenCv, 0, 8, 1.0).is_err());
        assert!(CameraView::new(identity4::<f64>(), Convention::OpenCv, 8, 8, 3.2).is_err());
    }

    #[test]
    fn convention_serde_names() {
        let c: Convention = serde_json::from_str("\"opengl\"").unwrap();
        assert_eq!(c, Convention::OpenGl);
        let c: Convention = serde_json::from_str("\"blender\"").unwrap();
        assert_eq!(c, Convention::OpenGl);
        assert_eq!(serde_json::to_string(&Convention::OpenCv).unwrap(), "\"opencv\"");
    }

    fn params(s: f64) -> ProjectParams<f64> {
        ProjectParams { dilation: s, ..Default::default() }
    }

    #[test]
    fn behind_camera_is_culled() {
        let ctx = straight_view(64, 64, 1.0).context();
        let g = SkewGaussian::isotropic([0.0, 0.0, -2.0], 0.1, [1.0; 3], 0.5, 0);
        assert!(project_splat(&g, 0, &ctx, &params(0.3)).is_none());
    }

    #[test]
    fn on_axis_fixture() {
        // fx = fy = 100
        let ctx = straight_view(200, 200, std::f64::consts::FRAC_PI_2).context();
        let g = SkewGaussian::isotropic([0.0, 0.0, 5.0], 0.1, [1.0; 3], 0.5, 0);
        let s = project_splat(&g, 0, &ctx, &params(0.0)).unwrap();
        assert!((s.cov2d[0] - 4.0).abs() < 1e-9 && (s.cov2d[2] - 4.0).abs() < 1e-9);
        assert!(s.cov2d[1].abs() < 1e-12);
        assert!((s.conic.a - 0.25).abs() < 1e-9 && (s.conic.c - 0.25).abs() < 1e-9);
        assert_eq!(s.conic.b, 0.0);
        assert_eq!(s.dilation_comp, 1.0);
        assert!((s.radius - 6.0).abs() < 1e-9);
        assert_eq!(s.mean2d, [100.0, 100.0]);
    }

    #[test]
    fn axis_aligned_skew_marginal_keeps_in_plane_shape() {
        let t: Mat23<f64> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let sigma = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let s2 = [[1.0, 0.0], [0.0, 1.0]];
        let b = project_skewness([0.7, -1.3, 0.0], &t, &sigma, &s2).unwrap();
        assert!((b.beta_x - 0.7).abs() < 1e-15 && (b.beta_y + 1.3).abs() < 1e-15);
        let b = project_skewness([0.7, -1.3, 2.0], &t, &sigma, &s2).unwrap();
        let k = 1.0 / 5f64.sqrt();
        assert!((b.beta_x - 0.7 * k).abs() < 1e-15);
        assert_eq!(project_skewness([0.0; 3], &t, &sigma, &s2), Some(Skew2D::zero()));
    }

    #[test]
    fn skew_projection_backward_matches_fd() {
        let eta = [0.8, -0.4, 1.1];
        let t = [[1.2, 0.3, -0.5], [-0.2, 0.9, 0.4]];
        let a = [[1.0, 0.2, 0.1], [0.0, 0.8, -0.3], [0.2, 0.1, 1.3]];
        let sigma = mul33(&a, &transpose3(&a));
        let w = [0.6, -1.4];
        let loss = |eta: [f64; 3], t: &Mat23<f64>, sigma: &Mat3<f64>, s2: &Mat2<f64>| {
            let b = project_skewness(eta, t, sigma, s2).unwrap();
            w[0] * b.beta_x + w[1] * b.beta_y
        };
        let s2 = mul23_23t(&mul23_33(&t, &sigma), &t);
        let grad = project_skewness_backward(eta, &t, &sigma, &s2, w);
        let h = 1e-6;
        for i in 0..3 {
            let (mut p, mut m) = (eta, eta);
            p[i] += h;
            m[i] -= h;
            let fd = (loss(p, &t, &sigma, &s2) - loss(m, &t, &sigma, &s2)) / (2.0 * h);
            assert!((fd - grad.d_eta[i]).abs() < 1e-7);
            for j in 0..3 {
                let (mut p, mut m) = (sigma, sigma);
                p[i][j] += h;
                m[i][j] -= h;
                let fd = (loss(eta, &t, &p, &s2) - loss(eta, &t, &m, &s2)) / (2.0 * h);
                assert!((fd - grad.d_sigma[i][j]).abs() < 1e-7);
            }
        }
        for i in 0..2 {
            for j in 0..3 {
                let (mut p, mut m) = (t, t);
                p[i][j] += h;
                m[i][j] -= h;
                let fd = (loss(eta, &p, &sigma, &s2) - loss(eta, &m, &sigma, &s2)) / (2.0 * h);
                assert!((fd - grad.d_t[i][j]).abs() < 1e-7);
            }
            for j in 0..2 {
                let (mut p, mut m) = (s2, s2);
                p[i][j] += h;
                m[i][j] -= h;
                let fd = (loss(eta, &t, &sigma, &p) - loss(eta, &t, &sigma, &m)) / (2.0 * h);
                assert!((fd - grad.d_sigma2d[i][j]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn projected_density_integrates_to_one() {
        // numeric check of the closed form against the 2D skew-normal normalizer
        let t: Mat23<f64> = [[0.9, 0.2, -0.4], [0.1, 1.1, 0.3]];
        let sigma = [[1.0, 0.3, 0.0], [0.3, 0.7, 0.1], [0.0, 0.1, 0.5]];
        let s2 = mul23_23t(&mul23_33(&t, &sigma), &t);
        let b = project_skewness([1.5, -0.5, 2.0], &t, &sigma, &s2).unwrap();
        let p = inv2(&s2).unwrap();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * det2(&s2).sqrt());
        let (mut total, step) = (0.0, 0.02);
        for i in -400..400 {
            for j in -400..400 {
                let (x, y) = (i as f64 * step, j as f64 * step);
                let q = p[0][0] * x * x + 2.0 * p[0][1] * x * y + p[1][1] * y * y;
                let z = (b.beta_x * x + b.beta_y * y) / std::f64::consts::SQRT_2;
                total += norm * (-0.5 * q).exp() * (1.0 + erf_series(z)) * step * step;
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    proptest! {
        #[test]
        fn dilation_comp_in_unit_interval(
            mu in prop::array::uniform3(-1.0f64..1.0),
            ls in prop::array::uniform3(-4.0f64..0.0),
            q in prop::array::uniform4(-1.0f64..1.0),
            s in 0.0f64..2.0,
        ) {
            prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-3);
            let ctx = straight_view(64, 48, 1.2).context();
            let mut g = SkewGaussian::isotropic([mu[0], mu[1], mu[2] + 4.0], 0.1, [0.5; 3], 0.5, 0);
            g.log_scale = ls;
            g.rot = q;
            if let Some(sp) = project_splat(&g, 0, &ctx, &params(s)) {
                prop_assert!(sp.dilation_comp > 0.0 && sp.dilation_comp <= 1.0);
                prop_assert!(sp.conic.is_positive_definite());
                prop_assert!(sp.radius > 0.0 && sp.depth > ctx.near);
            }
        }

        #[test]
        fn opengl_and_converted_pose_project_identically(
            angle in -3.0f64..3.0,
            p in prop::array::uniform3(-0.5f64..0.5),
        ) {
            let (s, c) = angle.sin_cos();
            // camera orbiting the origin, OpenGL convention (looks down -z)
            let gl = [
                [c, 0.0, s, 4.0 * s],
                [0.0, 1.0, 0.0, 0.0],
                [-s, 0.0, c, 4.0 * c],
                [0.0, 0.0, 0.0, 1.0],
            ];
            let v = CameraView::new(gl, Convention::OpenGl, 32, 32, 1.0).unwrap();
            let g = SkewGaussian::isotropic(p, 0.2, [0.5; 3], 0.5, 0);
            let a = project_splat(&g, 0, &v.context(), &params(0.3));
            let b = project_splat(&g, 0, &v.to_opencv().context(), &params(0.3));
            prop_assert_eq!(a.clone(), b);
            prop_assert!(a.is_some());
        }
    }
}
