//! One-dimensional mixture fits with skew-normal or normal kernels.

use serde::Serialize;

use crate::adam::Adam;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `w · 2/σ · φ((x−μ)/σ) · Φ(β(x−μ)/σ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Kernel1D<T> {
    pub mu: T,
    pub log_sigma: T,
    pub beta: T,
    pub weight: T,
}

fn phi<T: Real>(u: T) -> T {
    (-(u * u) / T::lit(2.0)).exp() / T::lit((2.0 * std::f64::consts::PI).sqrt())
}

fn cdf<T: Real>(v: T) -> T {
    T::lit(0.5) * (T::one() + (v / T::SQRT_2()).erf())
}

impl<T: Real> Kernel1D<T> {
    pub fn eval(&self, x: T) -> T {
        let s = self.log_sigma.exp();
        let u = (x - self.mu) / s;
        self.weight * T::lit(2.0) * phi(u) * cdf(self.beta * u) / s
    }

    /// Value and gradient `[d/dμ, d/dlogσ, d/dβ, d/dw]`.
    pub fn eval_grad(&self, x: T) -> (T, [T; 4]) {
        let two = T::lit(2.0);
        let s = self.log_sigma.exp();
        let u = (x - self.mu) / s;
        let (p, c) = (phi(u), cdf(self.beta * u));
        let k = two * p * c / s;
        let dk_du = two / s * (-u * p * c + self.beta * p * phi(self.beta * u));
        let w = self.weight;
        let d_mu = w * dk_du * (-T::one() / s);
        let d_log_sigma = w * (-k - dk_du * u);
        let d_beta = w * two / s * p * phi(self.beta * u) * u;
        (w * k, [d_mu, d_log_sigma, d_beta, k])
    }

    fn to_array(self) -> [T; 4] {
        [self.mu, self.log_sigma, self.beta, self.weight]
    }

    fn from_array(a: &[T]) -> Self {
        Self { mu: a[0], log_sigma: a[1], beta: a[2], weight: a[3] }
    }
}

pub fn mixture<T: Real>(kernels: &[Kernel1D<T>], x: T) -> T {
    kernels.iter().map(|k| k.eval(x)).sum()
}

/// Mean squared error of the mixture on samples `(xs, ys)` and its gradient
/// per kernel.
pub fn mse_and_grad<T: Real>(kernels: &[Kernel1D<T>], xs: &[T], ys: &[T]) -> (T, Vec<[T; 4]>) {
    let n = T::from_usize_lossy(xs.len().max(1));
    let mut grads = vec![[T::zero(); 4]; kernels.len()];
    let mut total = T::zero();
    let mut parts = vec![(T::zero(), [T::zero(); 4]); kernels.len()];
    for (x, y) in xs.iter().zip(ys) {
        let mut f = T::zero();
        for (k, p) in kernels.iter().zip(parts.iter_mut()) {
            *p = k.eval_grad(*x);
            f += p.0;
        }
        let r = f - *y;
        total += r * r;
        let scale = T::lit(2.0) * r / n;
        for (g, p) in grads.iter_mut().zip(&parts) {
            for j in 0..4 {
                g[j] += scale * p.1[j];
            }
        }
    }
    (total / n, grads)
}

/// Unit pulse on `|x| < 1.5`, sampled on `[−3, 3]`.
pub fn square_wave<T: Real>(samples: usize) -> (Vec<T>, Vec<T>) {
    let xs: Vec<T> = (0..samples)
        .map(|i| T::lit(-3.0 + 6.0 * i as f64 / (samples - 1).max(1) as f64))
        .collect();
    let ys = xs.iter().map(|x| if x.abs() < T::lit(1.5) { T::one() } else { T::zero() }).collect();
    (xs, ys)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fit1dConfig<T> {
    pub steps: usize,
    /// Initial Adam rate, decayed exponentially to `lr · final_lr_ratio`.
    pub lr: T,
    /// Rate for the skewness, which lives on a larger scale than the rest.
    pub lr_beta: T,
    pub final_lr_ratio: T,
    pub skew: bool,
}

impl<T: Real> Default for Fit1dConfig<T> {
    fn default() -> Self {
        Self { steps: 4000, lr: T::lit(0.02), lr_beta: T::lit(0.2), final_lr_ratio: T::lit(0.01), skew: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit1dResult<T> {
    pub kernels: Vec<Kernel1D<T>>,
    pub mse: T,
    /// MSE before the first step.
    pub initial_mse: T,
    /// Set when the first attempt diverged and the fit was rerun at half
    /// the rate.
    pub restarted: bool,
}

/// `k` unskewed kernels spread evenly over the middle of `[lo, hi]`.
pub fn init_kernels<T: Real>(k: usize, lo: T, hi: T) -> Vec<Kernel1D<T>> {
    let span = hi - lo;
    let width = span / T::from_usize_lossy(k + 1);
    (0..k)
        .map(|i| Kernel1D {
            mu: lo + width * T::from_usize_lossy(i + 1),
            log_sigma: (width * T::lit(0.75)).ln(),
            beta: T::zero(),
            weight: width * T::lit(0.5),
        })
        .collect()
}

fn run<T: Real>(init: &[Kernel1D<T>], xs: &[T], ys: &[T], cfg: &Fit1dConfig<T>, lr: T) -> (Vec<Kernel1D<T>>, T) {
    let mut opt = Adam::<T>::with_dims(init.len(), 4);
    let mut params: Vec<[T; 4]> = init.iter().map(|k| k.to_array()).collect();
    let mut kernels = init.to_vec();
    let decay = cfg.final_lr_ratio.ln() / T::from_usize_lossy(cfg.steps.max(1));
    for step in 0..cfg.steps {
        let (_, grads) = mse_and_grad(&kernels, xs, ys);
        let rate = lr * (decay * T::from_usize_lossy(step)).exp();
        let mut rates = [rate; 4];
        rates[2] = if cfg.skew { rate * cfg.lr_beta / cfg.lr } else { T::zero() };
        for (i, p) in params.iter_mut().enumerate() {
            let mut g = grads[i];
            if !cfg.skew {
                g[2] = T::zero();
            }
            opt.update(i, p, &g, &rates);
            kernels[i] = Kernel1D::from_array(p);
        }
    }
    let mse = mse_and_grad(&kernels, xs, ys).0;
    (kernels, mse)
}

/// Fits `init` to samples `(xs, ys)` with Adam. With `cfg.skew` unset the
/// skewness stays at its initial value.
pub fn fit1d<T: Real>(init: &[Kernel1D<T>], xs: &[T], ys: &[T], cfg: &Fit1dConfig<T>) -> Result<Fit1dResult<T>> {
    if init.is_empty() {
        return Err(Error::Config("at least one kernel is required".into()));
    }
    if xs.len() < 64 || xs.len() != ys.len() {
        return Err(Error::Config(format!("need at least 64 paired samples, got {} and {}", xs.len(), ys.len())));
    }
    let initial_mse = mse_and_grad(init, xs, ys).0;
    let (kernels, mse) = run(init, xs, ys, cfg, cfg.lr);
    if mse.is_finite() {
        return Ok(Fit1dResult { kernels, mse, initial_mse, restarted: false });
    }
    let (kernels, mse) = run(init, xs, ys, cfg, cfg.lr / T::lit(2.0));
    if !mse.is_finite() {
        return Err(Error::Config("fit diverged twice".into()));
    }
    Ok(Fit1dResult { kernels, mse, initial_mse, restarted: true })
}
