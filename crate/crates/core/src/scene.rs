//! Skew-Gaussian primitives and the scene container.

use crate::linalg::{mul33, quat_normalize, quat_to_rot, transpose3, Mat3, Vec3};
use crate::scalar::Real;

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline]
pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

/// Number of color coefficients per channel for a spherical-harmonics degree.
pub const fn sh_coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// One skewed volumetric primitive.
///
/// Scales are stored as logs, opacities as logits; the skewness vector and
/// the opacity-boundary direction live in world space and are used raw.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewGaussian<T> {
    pub mu: Vec3<T>,
    pub log_scale: Vec3<T>,
    /// `(w, x, y, z)`.
    pub rot: [T; 4],
    /// Spherical-harmonics color coefficients, degree-0 first.
    pub sh: Vec<[T; 3]>,
    pub opacity_logits: [T; 2],
    pub beta: Vec3<T>,
    pub dir: Vec3<T>,
}

impl<T: Real> SkewGaussian<T> {
    /// Unskewed primitive with constant opacity `opacity` and a flat color.
    pub fn isotropic(mu: Vec3<T>, scale: T, rgb: [T; 3], opacity: T, sh_degree: usize) -> Self {
        let mut sh = vec![[T::zero(); 3]; sh_coeff_count(sh_degree)];
        sh[0] = crate::sh::rgb_to_dc(rgb);
        let l = logit(opacity);
        let ls = scale.ln();
        Self {
            mu,
            log_scale: [ls, ls, ls],
            rot: [T::one(), T::zero(), T::zero(), T::zero()],
            sh,
            opacity_logits: [l, l],
            beta: [T::zero(); 3],
            dir: [T::zero(); 3],
        }
    }

    pub fn scales(&self) -> Vec3<T> {
        [self.log_scale[0].exp(), self.log_scale[1].exp(), self.log_scale[2].exp()]
    }

    pub fn rotation(&self) -> Mat3<T> {
        quat_to_rot(self.rot)
    }

    pub fn opacities(&self) -> [T; 2] {
        [sigmoid(self.opacity_logits[0]), sigmoid(self.opacity_logits[1])]
    }

    pub fn max_scale_axis(&self) -> usize {
        let s = self.log_scale;
        if s[0] >= s[1] && s[0] >= s[2] {
            0
        } else if s[1] >= s[2] {
            1
        } else {
            2
        }
    }

    /// World covariance `R S Sᵀ Rᵀ`.
    pub fn covariance3d(&self) -> Mat3<T> {
        covariance3d(self)
    }

    pub fn normalize_rotation(&mut self) {
        self.rot = quat_normalize(self.rot);
    }

    pub fn is_finite(&self) -> bool {
        self.mu
            .iter()
            .chain(&self.log_scale)
            .chain(&self.rot)
            .chain(&self.opacity_logits)
            .chain(&self.beta)
            .chain(&self.dir)
            .chain(self.sh.iter().flatten())
            .all(|v| v.is_finite())
    }
}

pub fn covariance3d<T: Real>(g: &SkewGaussian<T>) -> Mat3<T> {
    let r = g.rotation();
    let s = g.scales();
    let mut m = r;
    for row in m.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= s[j];
        }
    }
    mul33(&m, &transpose3(&m))
}

/// The primitive set plus rendering context shared by all primitives.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene<T> {
    pub primitives: Vec<SkewGaussian<T>>,
    pub background: [T; 3],
    pub sh_degree: usize,
}

impl<T: Real> Scene<T> {
    pub fn new(sh_degree: usize) -> Self {
        Self { primitives: Vec::new(), background: [T::zero(); 3], sh_degree }
    }

    pub fn with_background(mut self, rgb: [T; 3]) -> Self {
        self.background = rgb;
        self
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn push(&mut self, g: SkewGaussian<T>) {
        debug_assert_eq!(g.sh.len(), sh_coeff_count(self.sh_degree));
        self.primitives.push(g);
    }

    /// Converts every field to another scalar width.
    pub fn cast<U: Real>(&self) -> Scene<U> {
        let c = |v: T| U::lit(v.to_f64_lossy());
        let c3 = |v: [T; 3]| [c(v[0]), c(v[1]), c(v[2])];
        Scene {
            primitives: self
                .primitives
                .iter()
                .map(|g| SkewGaussian {
                    mu: c3(g.mu),
                    log_scale: c3(g.log_scale),
                    rot: [c(g.rot[0]), c(g.rot[1]), c(g.rot[2]), c(g.rot[3])],
                    sh: g.sh.iter().map(|s| c3(*s)).collect(),
                    opacity_logits: [c(g.opacity_logits[0]), c(g.opacity_logits[1])],
                    beta: c3(g.beta),
                    dir: c3(g.dir),
                })
                .collect(),
            background: c3(self.background),
            sh_degree: self.sh_degree,
        }
    }
}
