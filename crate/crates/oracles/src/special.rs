//! Slow, high-precision special functions.

/// `erf(x)` from the all-positive Maclaurin series
/// `erf(x) = 2/√π · e^{-x²} · Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1))`.
pub fn erf_series(x: f64) -> f64 {
    let ax = x.abs();
    if ax > 6.0 {
        return x.signum();
    }
    let mut term = ax;
    let mut sum = ax;
    let mut n = 0u32;
    while term > sum * 1e-18 {
        n += 1;
        term *= 2.0 * ax * ax / (2 * n + 1) as f64;
        sum += term;
        if n > 10_000 {
            break;
        }
    }
    let v = 2.0 / std::f64::consts::PI.sqrt() * (-ax * ax).exp() * sum;
    v.copysign(x)
}

/// Standard normal CDF by composite Simpson integration of the density.
pub fn normal_cdf_quadrature(z: f64) -> f64 {
    let n = 20_000;
    let h = z / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = pdf(0.0) + pdf(z);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * pdf(i as f64 * h);
    }
    0.5 + acc * h / 3.0
}
