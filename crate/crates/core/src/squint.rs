//! Squint / BOA aggregation with a geometric ladder of constant learning
//! rates per expert.
//!
//! Every expert `k` of the grid is replicated once per rate `eta_i` of the
//! ladder. The state keeps the cumulative exponents
//! `A[k][i] = sum_s (eta_i r_{k,s} - eta_i^2 r_{k,s}^2)` where
//! `r_{k,s} = g_s . (prediction_{s-1} - theta_k)` is the linearized excess loss
//! of expert `k` (gradient trick). The weight of expert `k` is proportional to
//! `prior_k * sum_i eta_i exp(A[k][i])`, normalized in the log domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ExpertGrid, SimplexWeights};
use crate::par::{self, Execution};
use crate::vector::{dot_slices, ParamVector};

/// Experts per work item when the update runs in parallel.
const EXPERT_CHUNK: usize = 512;

/// Magic header of the JSON snapshot format.
pub const SNAPSHOT_MAGIC: &str = "SPARSE-OCO/SQUINT-SNAPSHOT";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Decreasing learning rates `eta_i = 1 / (e^i E)`, `i = 1..=depth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateLadder {
    rates: Vec<f64>,
}

impl RateLadder {
    /// Ladder for scale `E` and horizon `T`: `depth = max(1, ceil(ln(E T^p)))`.
    pub fn build(scale: f64, horizon: usize, exponent: u32) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!(
                "scale E must be positive, got {scale}"
            )));
        }
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        let log_arg = scale.ln() + exponent as f64 * (horizon as f64).ln();
        let depth = log_arg.ceil().max(1.0) as usize;
        let rates = (1..=depth).map(|i| (-(i as f64)).exp() / scale).collect();
        Ok(Self { rates })
    }

    /// Ladder with explicit rates (must be positive and strictly decreasing).
    pub fn from_rates(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::config("rate ladder needs at least one rate"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config("learning rates must be positive and finite"));
        }
        if rates.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("learning rates must be strictly decreasing"));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn depth(&self) -> usize {
        self.rates.len()
    }
}

/// State of one Squint run over a fixed grid.
#[derive(Debug, Clone)]
pub struct SquintState {
    grid: ExpertGrid,
    ladder: RateLadder,
    scale: f64,
    /// Row-major `K x depth` cumulative exponents.
    cum: Vec<f64>,
    round: usize,
    log_prior: Vec<f64>,
    log_rates: Vec<f64>,
    /// Grid points, row-major `K x d`.
    flat_points: Vec<f64>,
    /// Unnormalized log weights, one per expert.
    log_weights: Vec<f64>,
    weights: SimplexWeights,
    prediction: ParamVector,
    gradient_bound: Option<f64>,
    exec: Execution,
}

impl SquintState {
    /// Fresh state with an explicit ladder.
    pub fn new(grid: ExpertGrid, ladder: RateLadder, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!(
                "scale E must be positive, got {scale}"
            )));
        }
        let k = grid.len();
        let cum = vec![0.0; k * ladder.depth()];
        Self::assemble(grid, ladder, scale, cum, 0)
    }

    /// Fresh state whose ladder is sized for `horizon` rounds with exponent `p`.
    pub fn with_horizon(
        grid: ExpertGrid,
        scale: f64,
        horizon: usize,
        exponent: u32,
    ) -> Result<Self> {
        let ladder = RateLadder::build(scale, horizon, exponent)?;
        Self::new(grid, ladder, scale)
    }

    fn assemble(
        grid: ExpertGrid,
        ladder: RateLadder,
        scale: f64,
        cum: Vec<f64>,
        round: usize,
    ) -> Result<Self> {
        let dim = grid.dim();
        let flat_points: Vec<f64> = grid
            .points()
            .iter()
            .flat_map(|p| p.iter().copied())
            .collect();
        let log_prior = grid.prior().iter().map(|p| p.ln()).collect();
        let log_rates = ladder.rates().iter().map(|r| r.ln()).collect();
        let k = grid.len();
        let mut state = Self {
            grid,
            ladder,
            scale,
            cum,
            round,
            log_prior,
            log_rates,
            flat_points,
            log_weights: vec![0.0; k],
            weights: SimplexWeights::uniform(k),
            prediction: ParamVector::zeros(dim),
            gradient_bound: None,
            exec: Execution::default(),
        };
        let depth = state.ladder.depth();
        for kk in 0..k {
            state.log_weights[kk] = log_weight(
                state.log_prior[kk],
                &state.log_rates,
                &state.cum[kk * depth..(kk + 1) * depth],
            );
        }
        state.refresh();
        Ok(state)
    }

    /// Execution strategy for the per-expert update.
    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Declares the l-infinity gradient bound `G`; debug builds then check
    /// `|r_k| <= 2 G max_k ||theta_k||_1` on every update.
    pub fn with_gradient_bound(mut self, bound: f64) -> Self {
        self.gradient_bound = Some(bound);
        self
    }

    pub fn grid(&self) -> &ExpertGrid {
        &self.grid
    }

    pub fn ladder(&self) -> &RateLadder {
        &self.ladder
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Cumulative exponent `A[k][i]`.
    pub fn cum_stat(&self, expert: usize, rate: usize) -> f64 {
        self.cum[expert * self.ladder.depth() + rate]
    }

    /// All cumulative exponents, row-major `K x depth`.
    pub fn cum_stats(&self) -> &[f64] {
        &self.cum
    }

    /// Current prediction `sum_k w_k theta_k`.
    pub fn predict(&self) -> &ParamVector {
        &self.prediction
    }

    pub fn current_weights(&self) -> &SimplexWeights {
        &self.weights
    }

    /// Feeds the gradient of the current loss at [`Self::predict`].
    ///
    /// On error the state is left untouched.
    pub fn update(&mut self, gradient: &ParamVector) -> Result<()> {
        let dim = self.grid.dim();
        if gradient.dim() != dim {
            return Err(Error::config(format!(
                "gradient has dimension {}, grid has {dim}",
                gradient.dim()
            )));
        }
        let g = gradient.as_slice();
        let g_pred = dot_slices(g, self.prediction.as_slice());
        let k = self.grid.len();
        let flat = &self.flat_points;
        let r: Vec<f64> = par::map_chunks(self.exec, k, EXPERT_CHUNK, |range| {
            range
                .map(|kk| g_pred - dot_slices(g, &flat[kk * dim..(kk + 1) * dim]))
                .collect::<Vec<f64>>()
        })
        .concat();
        if let Some(bad) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::stream(format!(
                "non-finite linearized loss for expert {bad} at round {}",
                self.round + 1
            )));
        }
        if let Some(bound) = self.gradient_bound {
            let limit = 2.0 * bound * self.grid.radius() * (1.0 + 1e-9) + 1e-12;
            debug_assert!(
                r.iter().all(|x| x.abs() <= limit),
                "linearized loss exceeds 2 G R = {limit}"
            );
        }

        let depth = self.ladder.depth();
        let rates = self.ladder.rates();
        let log_rates = &self.log_rates;
        let log_prior = &self.log_prior;
        let r = &r;
        par::for_each_row_pair_chunk(
            self.exec,
            &mut self.cum,
            depth,
            &mut self.log_weights,
            EXPERT_CHUNK,
            |first, rows, lws| {
                for (j, (row, lw)) in rows.chunks_mut(depth).zip(lws.iter_mut()).enumerate() {
                    let kk = first + j;
                    let rk = r[kk];
                    for (a, eta) in row.iter_mut().zip(rates) {
                        *a += eta * rk - eta * eta * rk * rk;
                    }
                    *lw = log_weight(log_prior[kk], log_rates, row);
                }
            },
        );
        self.round += 1;
        self.refresh();
        Ok(())
    }

    /// Recomputes normalized weights and the prediction from `log_weights`.
    fn refresh(&mut self) {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = self.log_weights.iter().map(|lw| (lw - max).exp()).collect();
        self.weights = match SimplexWeights::from_unnormalized(raw) {
            Some(w) => w,
            None => {
                log::warn!(
                    "squint weights underflowed at round {}; falling back to prior",
                    self.round
                );
                SimplexWeights::from_unnormalized(self.grid.prior().to_vec())
                    .expect("prior is positive")
            }
        };
        let dim = self.grid.dim();
        let w = self.weights.as_slice();
        let flat = &self.flat_points;
        let coords = par::sum_vec_chunks(self.exec, w.len(), EXPERT_CHUNK, dim, |range| {
            let mut part = vec![0.0; dim];
            for kk in range {
                let wk = w[kk];
                if wk == 0.0 {
                    continue;
                }
                for (p, c) in part.iter_mut().zip(&flat[kk * dim..(kk + 1) * dim]) {
                    *p += wk * c;
                }
            }
            part
        });
        self.prediction = ParamVector::from_finite(coords);
    }

    /// Serializes grid, ladder, cumulative exponents and round counter.
    pub fn to_snapshot_json(&self) -> String {
        let depth = self.ladder.depth();
        let snap = Snapshot {
            magic: SNAPSHOT_MAGIC.to_string(),
            version: SNAPSHOT_VERSION,
            scale: self.scale,
            round: self.round,
            grid: self.grid.clone(),
            rates: self.ladder.rates().to_vec(),
            cum_stats: self.cum.chunks(depth).map(<[f64]>::to_vec).collect(),
        };
        serde_json::to_string_pretty(&snap).expect("snapshot serializes")
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("invalid squint snapshot: {e}")))?;
        if snap.magic != SNAPSHOT_MAGIC {
            return Err(Error::config(format!(
                "bad snapshot magic `{}`",
                snap.magic
            )));
        }
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::config(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        let ladder = RateLadder::from_rates(snap.rates)?;
        if snap.cum_stats.len() != snap.grid.len()
            || snap.cum_stats.iter().any(|row| row.len() != ladder.depth())
        {
            return Err(Error::config(
                "snapshot statistics do not match grid and ladder sizes",
            ));
        }
        let cum: Vec<f64> = snap.cum_stats.into_iter().flatten().collect();
        if cum.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("snapshot statistics must be finite"));
        }
        if !(snap.scale > 0.0 && snap.scale.is_finite()) {
            return Err(Error::config("snapshot scale must be positive"));
        }
        Self::assemble(snap.grid, ladder, snap.scale, cum, snap.round)
    }
}

/// `ln prior + ln sum_i exp(ln eta_i + A_i)`, with max subtraction.
fn log_weight(log_prior: f64, log_rates: &[f64], row: &[f64]) -> f64 {
    let m = log_rates
        .iter()
        .zip(row)
        .map(|(l, a)| l + a)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = log_rates
        .iter()
        .zip(row)
        .map(|(l, a)| (l + a - m).exp())
        .sum();
    log_prior + m + s.ln()
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    magic: String,
    version: u32,
    scale: f64,
    round: usize,
    grid: ExpertGrid,
    rates: Vec<f64>,
    cum_stats: Vec<Vec<f64>>,
}
