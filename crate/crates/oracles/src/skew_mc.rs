//! Monte-Carlo marginalization of a 3D skew-normal through a linear map.
//!
//! Samples use the selection representation: draw `X ~ N(0, Σ)` and
//! `U ~ N(0, 1)` and keep `X` when `U ≤ ηᵀX`, else `-X`. The result has
//! density `2 φ(x; Σ) Φ(ηᵀx)` without relying on any closed-form
//! transformation law.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::special::erf_series;

fn cholesky3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                l[i][j] = s.max(0.0).sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    l
}

/// Draws `n` samples of `T X` with `X` skew-normal `(Σ, η)`.
pub fn sample_projected(
    sigma: &[[f64; 3]; 3],
    eta: [f64; 3],
    t: &[[f64; 3]; 2],
    n: usize,
    seed: u64,
) -> Vec<[f64; 2]> {
    let l = cholesky3(sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let e: [f64; 3] = [
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        ];
        let mut x = [0.0; 3];
        for i in 0..3 {
            for k in 0..=i {
                x[i] += l[i][k] * e[k];
            }
        }
        let u: f64 = StandardNormal.sample(&mut rng);
        if u > eta[0] * x[0] + eta[1] * x[1] + eta[2] * x[2] {
            x = [-x[0], -x[1], -x[2]];
        }
        out.push([
            t[0][0] * x[0] + t[0][1] * x[1] + t[0][2] * x[2],
            t[1][0] * x[0] + t[1][1] * x[1] + t[1][2] * x[2],
        ]);
    }
    out
}

/// L1 distance between the empirical distribution of `samples` and the 2D
/// skew-normal density `2 φ(y; Σy) Φ(βᵀy)`, measured as the summed absolute
/// difference of bin probabilities on a grid in whitened coordinates (bins
/// of width 0.5 over ±4.5 standard deviations plus one overflow bin).
pub fn density_l1(samples: &[[f64; 2]], sigma_y: &[[f64; 2]; 2], beta: [f64; 2]) -> f64 {
    // y = L w with L the lower Cholesky factor of Σy
    let l00 = sigma_y[0][0].sqrt();
    let l10 = sigma_y[1][0] / l00;
    let l11 = (sigma_y[1][1] - l10 * l10).sqrt();
    const BINS: usize = 18;
    const HALF: f64 = 4.5;
    let width = 2.0 * HALF / BINS as f64;

    let mut counts = vec![0usize; BINS * BINS];
    let mut outside = 0usize;
    for y in samples {
        let w0 = y[0] / l00;
        let w1 = (y[1] - l10 * w0) / l11;
        let i = ((w0 + HALF) / width).floor();
        let j = ((w1 + HALF) / width).floor();
        if i < 0.0 || j < 0.0 || i >= BINS as f64 || j >= BINS as f64 {
            outside += 1;
        } else {
            counts[j as usize * BINS + i as usize] += 1;
        }
    }

    // whitened density 2 φ(w; I) Φ(βᵀ L w)
    let bw = [beta[0] * l00 + beta[1] * l10, beta[1] * l11];
    let density = |w0: f64, w1: f64| {
        let phi = (-0.5 * (w0 * w0 + w1 * w1)).exp() / (2.0 * std::f64::consts::PI);
        let s = bw[0] * w0 + bw[1] * w1;
        2.0 * phi * 0.5 * (1.0 + erf_series(s / std::f64::consts::SQRT_2))
    };
    const SUB: usize = 8;
    let h = width / SUB as f64;
    let n = samples.len() as f64;
    let mut l1 = 0.0;
    let mut inside_mass = 0.0;
    for j in 0..BINS {
        for i in 0..BINS {
            let x0 = -HALF + i as f64 * width;
            let y0 = -HALF + j as f64 * width;
            let mut mass = 0.0;
            for sj in 0..SUB {
                for si in 0..SUB {
                    mass += density(x0 + (si as f64 + 0.5) * h, y0 + (sj as f64 + 0.5) * h);
                }
            }
            mass *= h * h;
            inside_mass += mass;
            l1 += (counts[j * BINS + i] as f64 / n - mass).abs();
        }
    }
    l1 + (outside as f64 / n - (1.0 - inside_mass)).abs()
}
