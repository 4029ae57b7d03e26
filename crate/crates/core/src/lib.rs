//! Sparse online convex optimization over the l1-ball.
//!
//! The crate provides the Squint/BOA aggregation core ([`squint`]), the
//! averaging-accelerability geometry and shrinkage primitives
//! ([`geometry`]), the BOA+ and SABOA restart meta-algorithms ([`meta`]),
//! synthetic loss streams ([`streams`]), regret accounting and rate-slope
//! fitting ([`metrics`]) and a config-driven experiment runner
//! ([`experiment`]).
//!
//! The per-expert and per-round inner loops run on rayon when the default
//! `parallel` feature is enabled; see [`par::Execution`].

pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod grid;
pub mod meta;
pub mod metrics;
pub mod par;
pub mod squint;
pub mod streams;
pub mod vector;

pub use error::{Error, Result};
pub use grid::{canonical_basis, corners, ExpertGrid, SimplexWeights};
pub use par::Execution;
pub use squint::{RateLadder, SquintState};
pub use vector::{dot, ParamVector};
