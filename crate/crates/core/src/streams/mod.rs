//! Synthetic loss streams.
//!
//! Rounds are 1-indexed. Every stream is a pure function of `(seed, t)`: the
//! randomness of round `t` comes from a ChaCha stream keyed by `t`, so rounds
//! can be regenerated in any order and from any thread.

mod absolute;
mod adversarial;
mod experts;
mod objective;
mod quadratic;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector::ParamVector;

pub use absolute::{AbsoluteDeviationConfig, AbsoluteDeviationStream};
pub use adversarial::{AdversarialConfig, AdversarialStrongStream};
pub use experts::{
    make_expert_stream, ExpertAdviceStream, ExpertSpec, SyntheticExperts, SQUARE_LOSS_ALPHA,
    SQUARE_LOSS_BETA,
};
pub use objective::{Objective, QuadraticObjective, ReplayObjective};
pub use quadratic::{
    sparse_parameter, Design, Latent, NoiseKind, QuadraticConfig, QuadraticIIDStream,
};

/// How the conditional expectation `E_{t-1}[l_t]` relates to `l_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Losses are i.i.d.; the risk is time-invariant.
    Iid,
    /// Losses are deterministic given the round.
    Adversarial,
}

pub trait LossStream: Send + Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn regime(&self) -> Regime;

    /// Almost-sure bound on `||grad l_t(theta)||_inf` over `||theta||_1 <= radius`.
    fn gradient_bound(&self, radius: f64) -> f64;

    fn loss_and_gradient(&self, t: usize, theta: &ParamVector) -> Result<(f64, ParamVector)>;

    fn loss(&self, t: usize, theta: &ParamVector) -> Result<f64> {
        Ok(self.loss_and_gradient(t, theta)?.0)
    }

    fn gradient(&self, t: usize, theta: &ParamVector) -> Result<ParamVector> {
        Ok(self.loss_and_gradient(t, theta)?.1)
    }

    /// Closed-form risk `E[l_t(theta)]` for i.i.d. streams.
    fn risk(&self, _theta: &ParamVector) -> Option<f64> {
        None
    }

    /// A minimizer of the risk (i.i.d.) or of the average loss over a full
    /// cycle (adversarial), when known.
    fn optimum(&self) -> Option<ParamVector> {
        None
    }

    /// Excess risk over the risk minimizer.
    fn risk_excess(&self, theta: &ParamVector) -> Result<f64> {
        match (self.risk(theta), self.optimum().and_then(|o| self.risk(&o))) {
            (Some(r), Some(best)) => Ok(r - best),
            _ => Err(Error::UnsupportedRegime(format!(
                "{} stream has no closed-form risk",
                self.name()
            ))),
        }
    }

    /// Average loss over rounds `1..=upto` in closed form, when the stream
    /// has one cheaper than replaying every round.
    fn closed_form_objective(&self, _upto: usize) -> Option<Result<Box<dyn Objective + '_>>> {
        None
    }
}

/// Average loss over rounds `1..=upto`, closed form when available and a
/// replay of the stream otherwise.
pub fn empirical_objective(
    stream: &dyn LossStream,
    upto: usize,
) -> Result<Box<dyn Objective + '_>> {
    match stream.closed_form_objective(upto) {
        Some(obj) => obj,
        None => Ok(Box::new(ReplayObjective::new(stream, upto)?)),
    }
}

/// Randomness for round `t` of the stream seeded with `seed`.
pub(crate) fn round_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

/// Randomness for quantities drawn once per stream (targets, design factors).
pub(crate) fn setup_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

pub(crate) fn check_query(dim: usize, t: usize, theta: &ParamVector) -> Result<()> {
    if t == 0 {
        return Err(Error::domain("rounds are 1-indexed"));
    }
    if theta.dim() != dim {
        return Err(Error::config(format!(
            "query dimension {} does not match stream dimension {dim}",
            theta.dim()
        )));
    }
    Ok(())
}
