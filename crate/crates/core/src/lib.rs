//! Skew-Gaussian splatting: a differentiable tile rasterizer with an
//! analytic backward pass, plus the optimizer and densification loop that
//! fit scenes from posed images.
//!
//! Every numeric routine is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the width for common uses.

// Small fixed-size matrix code reads best with explicit indices, and the
// negated comparisons are there to reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod backward;
pub mod camera;
pub mod dataset;
pub mod densify;
pub mod error;
pub mod fit1d;
pub mod fit2d;
pub mod forward;
pub mod image;
pub mod kernel;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod multiview;
pub mod ply;
pub mod scalar;
pub mod scene;
pub mod sh;
pub mod tiles;
pub mod train;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Scene32 = scene::Scene<f32>;
pub type Scene64 = scene::Scene<f64>;
pub type Primitive32 = scene::SkewGaussian<f32>;
pub type Primitive64 = scene::SkewGaussian<f64>;
pub type View32 = camera::CameraView<f32>;
pub type View64 = camera::CameraView<f64>;
pub type Image32 = image::Image<f32>;
pub type Image64 = image::Image<f64>;
pub type RenderConfig32 = forward::RenderConfig<f32>;
pub type RenderConfig64 = forward::RenderConfig<f64>;
