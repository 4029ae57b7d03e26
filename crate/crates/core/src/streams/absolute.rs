use rand::Rng;

use crate::error::{Error, Result};
use crate::streams::{check_query, round_rng, setup_rng, LossStream, Regime};
use crate::vector::{dot_slices, ParamVector};

#[derive(Debug, Clone)]
pub struct AbsoluteDeviationConfig {
    pub theta_star: ParamVector,
    /// Number of fixed design rows the stream samples from.
    pub rows: usize,
    pub seed: u64,
}

/// Piecewise-linear i.i.d. losses `l_t(theta) = |a_m' theta - a_m' theta*|`
/// with `m` uniform over a fixed seeded set of rows `a_m ~ U[-1, 1]^d`.
///
/// The risk is the convex piecewise-linear function
/// `(1/M) sum_m |a_m' (theta - theta*)|`, minimized at `theta*` with value 0.
#[derive(Debug, Clone)]
pub struct AbsoluteDeviationStream {
    dim: usize,
    theta_star: ParamVector,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    seed: u64,
}

impl AbsoluteDeviationStream {
    pub fn new(cfg: AbsoluteDeviationConfig) -> Result<Self> {
        if cfg.rows == 0 {
            return Err(Error::config(
                "absolute-deviation stream needs at least one row",
            ));
        }
        if cfg.theta_star.norm_l1() > 1.0 + 1e-9 {
            return Err(Error::config("theta* must lie in the unit l1-ball"));
        }
        let dim = cfg.theta_star.dim();
        let mut rng = setup_rng(cfg.seed);
        let rows: Vec<Vec<f64>> = (0..cfg.rows)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let targets = rows
            .iter()
            .map(|a| dot_slices(a, cfg.theta_star.as_slice()))
            .collect();
        Ok(Self {
            dim,
            theta_star: cfg.theta_star,
            rows,
            targets,
            seed: cfg.seed,
        })
    }

    fn row_of(&self, t: usize) -> usize {
        round_rng(self.seed, t).gen_range(0..self.rows.len())
    }
}

impl LossStream for AbsoluteDeviationStream {
    fn name(&self) -> &'static str {
        "absolute"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn regime(&self) -> Regime {
        Regime::Iid
    }

    fn gradient_bound(&self, _radius: f64) -> f64 {
        self.rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn loss_and_gradient(&self, t: usize, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        check_query(self.dim, t, theta)?;
        let m = self.row_of(t);
        let r = dot_slices(&self.rows[m], theta.as_slice()) - self.targets[m];
        let sign = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        Ok((
            r.abs(),
            ParamVector::from_finite(self.rows[m].iter().map(|a| sign * a).collect()),
        ))
    }

    fn risk(&self, theta: &ParamVector) -> Option<f64> {
        if theta.dim() != self.dim {
            return None;
        }
        let total: f64 = self
            .rows
            .iter()
            .zip(&self.targets)
            .map(|(a, b)| (dot_slices(a, theta.as_slice()) - b).abs())
            .sum();
        Some(total / self.rows.len() as f64)
    }

    fn optimum(&self) -> Option<ParamVector> {
        Some(self.theta_star.clone())
    }
}
