//! Reference implementations used as test oracles.
//!
//! Nothing here depends on the `skewsplat` crate: each routine is coded
//! from its textbook definition so that agreement with the production code
//! is meaningful.

// Small fixed-size matrix code reads best with explicit indices, and the
// negated comparisons are there to reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod ewa;
pub mod fd;
pub mod reference;
pub mod skew_mc;
pub mod special;
