//! Skew-normal splat kernel: error function, normal CDF, the modulated
//! opacity of a single splat and its analytic derivatives.
//!
//! The per-pixel opacity of a splat at offset `δ = x - μ` is
//!
//! ```text
//! α = d · G'(δ) · (1 + erf(z)),   G'(δ) = exp(-½(a δx² + c δy²) - b δx δy),
//!                                  z     = (βx δx + βy δy) / √2
//! ```
//!
//! which is `d · 2 G'(δ) Φ(βᵀδ)`; at `β = 0` it reduces to the symmetric
//! Gaussian falloff `d · G'(δ)`.

use crate::scalar::Real;

/// Largest opacity a single splat may contribute at a pixel.
pub const ALPHA_MAX: f64 = 0.99;
/// Splats below this opacity at a pixel are skipped.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
/// Default bound on the magnitude of screen-space skewness.
pub const SKEW_BOUND: f64 = 20.0;

/// Upper triangle of the inverse 2D screen covariance, `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Conic<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Real> Conic<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { a, b, c }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > T::zero() && self.c > T::zero() && self.a * self.c - self.b * self.b > T::zero()
    }

    /// Exponent of the falloff, `-½(a δx² + c δy²) - b δx δy`.
    #[inline]
    pub fn power(&self, dx: T, dy: T) -> T {
        -T::lit(0.5) * (self.a * dx * dx + self.c * dy * dy) - self.b * dx * dy
    }
}

/// Screen-space skewness coefficients (per pixel of offset).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Skew2D<T> {
    pub beta_x: T,
    pub beta_y: T,
}

impl<T: Real> Skew2D<T> {
    pub fn new(beta_x: T, beta_y: T) -> Self {
        Self { beta_x, beta_y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn norm(&self) -> T {
        (self.beta_x * self.beta_x + self.beta_y * self.beta_y).sqrt()
    }

    #[inline]
    pub fn dot(&self, dx: T, dy: T) -> T {
        self.beta_x * dx + self.beta_y * dy
    }

    /// Rescales the vector so its magnitude does not exceed `bound`.
    pub fn clamped(&self, bound: T) -> Self {
        let n = self.norm();
        if n > bound {
            let s = bound / n;
            Self::new(self.beta_x * s, self.beta_y * s)
        } else {
            *self
        }
    }

    /// Pulls a gradient on [`Skew2D::clamped`]'s output back to its input.
    pub fn clamped_backward(&self, bound: T, grad: [T; 2]) -> [T; 2] {
        let n = self.norm();
        if n <= bound {
            return grad;
        }
        // d/dv [v·B/|v|] = (B/|v|)(I - v̂ v̂ᵀ)
        let (ux, uy) = (self.beta_x / n, self.beta_y / n);
        let proj = grad[0] * ux + grad[1] * uy;
        let s = bound / n;
        [s * (grad[0] - proj * ux), s * (grad[1] - proj * uy)]
    }
}

#[inline]
pub fn erf<T: Real>(x: T) -> T {
    x.erf()
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn phi_std<T: Real>(z: T) -> T {
    T::lit(0.5) * (T::one() + erf(z / T::SQRT_2()))
}

/// `√(2/π)`.
#[inline]
pub fn sqrt_2_over_pi<T: Real>() -> T {
    T::FRAC_2_SQRT_PI() / T::SQRT_2()
}

/// Unclamped skew kernel `S'(δ) = G'(δ)·(1 + erf(z))`.
#[inline]
pub fn skew_kernel<T: Real>(dx: T, dy: T, conic: &Conic<T>, skew: &Skew2D<T>) -> T {
    let g = conic.power(dx, dy).exp();
    g * (T::one() + erf(skew.dot(dx, dy) / T::SQRT_2()))
}

/// Modulated opacity of one splat at pixel offset `(dx, dy)` with base
/// opacity `d`, clamped to `[0, 0.99]`.
pub fn eval_skew_alpha<T: Real>(dx: T, dy: T, conic: &Conic<T>, skew: &Skew2D<T>, d: T) -> T {
    let power = conic.power(dx, dy);
    if power > T::zero() {
        return T::zero();
    }
    let g = power.exp();
    if g == T::zero() {
        return T::zero();
    }
    let alpha = d * g * (T::one() + erf(skew.dot(dx, dy) / T::SQRT_2()));
    alpha.max(T::zero()).min(T::lit(ALPHA_MAX))
}

/// Partials of the unclamped skew kernel `S'` with respect to `(βx, βy)`:
/// `√(2/π) · δ · exp(-½(a δx² + c δy² + (βᵀδ)²) - b δx δy)`.
pub fn skew_grad_beta<T: Real>(dx: T, dy: T, conic: &Conic<T>, skew: &Skew2D<T>) -> (T, T) {
    let s = skew.dot(dx, dy);
    let e = (conic.power(dx, dy) - T::lit(0.5) * s * s).exp();
    let k = sqrt_2_over_pi::<T>() * e;
    (k * dx, k * dy)
}

/// Partials of the unclamped skew kernel `S'` with respect to the offset
/// `(δx, δy)`. The mean-position gradient is the negation.
pub fn skew_grad_offset<T: Real>(dx: T, dy: T, conic: &Conic<T>, skew: &Skew2D<T>) -> (T, T) {
    let g = conic.power(dx, dy).exp();
    let z = skew.dot(dx, dy) / T::SQRT_2();
    let modulation = T::one() + erf(z);
    let tail = sqrt_2_over_pi::<T>() * (-z * z).exp();
    (
        g * (-(conic.a * dx + conic.b * dy) * modulation + tail * skew.beta_x),
        g * (-(conic.b * dx + conic.c * dy) * modulation + tail * skew.beta_y),
    )
}
