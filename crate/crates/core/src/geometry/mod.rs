//! Averaging accelerability and the shrinkage, projection and covering
//! primitives used to build aggregation grids inside the unit l1-ball.

mod accelerability;
mod cover;
mod shrink;

pub use accelerability::{
    accelerability, accelerability_bisect, bound_l1, bound_support, UNIT_BALL_SLACK,
};
pub use cover::{build_cover, sparsity_prior, SparsityPattern, COVER_SIZE_CAP};
pub use shrink::{dilated_soft_threshold, hard_truncate, project_l1, soft_threshold};
