//! Plain EWA projection of an unskewed Gaussian.

use crate::reference::{screen_covariance, RefCamera, RefGaussian};

/// Screen covariance `[σxx, σxy, σyy]` and its inverse `[a, b, c]` with no
/// dilation, or `None` for primitives behind the near plane.
pub fn plain_ewa(g: &RefGaussian<f64>, cam: &RefCamera) -> Option<([f64; 3], [f64; 3])> {
    let (cov, _) = screen_covariance(g, cam)?;
    let det = cov[0] * cov[2] - cov[1] * cov[1];
    Some((cov, [cov[2] / det, -cov[1] / det, cov[0] / det]))
}
