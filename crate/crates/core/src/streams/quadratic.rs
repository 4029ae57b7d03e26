use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::streams::{
    check_query, round_rng, setup_rng, LossStream, Objective, QuadraticObjective, Regime,
};
use crate::vector::{dot_slices, ParamVector};

const SUMS_CHUNK: usize = 1024;

/// Gaussian noise is truncated at this many standard deviations.
const GAUSSIAN_NOISE_CLIP: f64 = 3.0;
/// Variance of a standard normal truncated to `[-3, 3]`.
const GAUSSIAN_CLIPPED_VARIANCE: f64 = 0.973_336_924_7;

/// Covariance structure of the design vectors, given through a factor `F`
/// with `Sigma = F F'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Design {
    Identity,
    /// `Sigma_ij = rho^|i-j|`.
    Toeplitz {
        rho: f64,
    },
    /// Orthogonal projection removing `deficiency` seeded random directions.
    RankDeficient {
        deficiency: usize,
    },
    /// Explicit `d x m` factor, one row per coordinate.
    Factor {
        rows: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Uniform on `[-1, 1]`, variance 1/3.
    #[default]
    Uniform,
    /// Standard normal truncated to `[-3, 3]`.
    Gaussian,
}

impl NoiseKind {
    fn variance(self) -> f64 {
        match self {
            NoiseKind::Uniform => 1.0 / 3.0,
            NoiseKind::Gaussian => GAUSSIAN_CLIPPED_VARIANCE,
        }
    }

    fn max_abs(self) -> f64 {
        match self {
            NoiseKind::Uniform => 1.0,
            NoiseKind::Gaussian => GAUSSIAN_NOISE_CLIP,
        }
    }

    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Uniform => rng.gen_range(-1.0..=1.0),
            NoiseKind::Gaussian => loop {
                let z: f64 = rng.sample(StandardNormal);
                if z.abs() <= GAUSSIAN_NOISE_CLIP {
                    break z;
                }
            },
        }
    }
}

/// Distribution of the latent vector `z` in `x = F z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Latent {
    /// Standard normal, followed by radial shrinkage into the box.
    #[default]
    Gaussian,
    /// Uniform on `[-sqrt 3, sqrt 3]` (unit variance); bounded, so no
    /// shrinkage is needed and `E[x x'] = Sigma` exactly.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct QuadraticConfig {
    pub theta_star: ParamVector,
    pub design: Design,
    /// Noise scale `sigma`; the noise is `sigma * xi` with `xi` of kind `noise_kind`.
    pub noise: f64,
    pub noise_kind: NoiseKind,
    pub latent: Latent,
    /// Gaussian designs: design vectors are shrunk radially so that `||x||_inf <= B` with
    /// `B = truncation * max_j sqrt(Sigma_jj)`.
    pub truncation: f64,
    pub seed: u64,
}

impl QuadraticConfig {
    pub fn new(theta_star: ParamVector, design: Design, noise: f64, seed: u64) -> Self {
        Self {
            theta_star,
            design,
            noise,
            noise_kind: NoiseKind::Uniform,
            latent: Latent::Gaussian,
            truncation: 4.0,
            seed,
        }
    }
}

/// Least-squares regression `l_t(theta) = (y_t - x_t' theta)^2` with
/// `x_t = F z_t`, `z_t ~ N(0, I)` shrunk into a box, and `y_t = x_t' theta* + noise`.
///
/// The shrinkage is radial, so `x_t` stays in the range of `Sigma` and
/// `theta*` remains a risk minimizer. The risk oracle uses the untruncated
/// covariance; at the default 4 standard deviations the truncation moves it
/// by a relative amount of order `d * 1e-5`.
#[derive(Debug, Clone)]
pub struct QuadraticIIDStream {
    dim: usize,
    theta_star: ParamVector,
    factor: Vec<f64>,
    latent_dim: usize,
    sigma: Vec<f64>,
    noise: f64,
    noise_kind: NoiseKind,
    latent: Latent,
    box_bound: f64,
    seed: u64,
}

fn orthonormal_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = setup_rng(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let proj = dot_slices(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = dot_slices(&v, &v).sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

fn design_factor(dim: usize, design: &Design, seed: u64) -> Result<(Vec<f64>, usize)> {
    match design {
        Design::Identity => {
            let mut f = vec![0.0; dim * dim];
            (0..dim).for_each(|i| f[i * dim + i] = 1.0);
            Ok((f, dim))
        }
        Design::Toeplitz { rho } => {
            if !(rho.abs() < 1.0) {
                return Err(Error::config(format!(
                    "design.rho must lie in (-1, 1), got {rho}"
                )));
            }
            // AR(1): x_1 = z_1, x_i = rho x_{i-1} + sqrt(1 - rho^2) z_i
            let s = (1.0 - rho * rho).sqrt();
            let mut f = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..=i {
                    let scale = if j == 0 { 1.0 } else { s };
                    f[i * dim + j] = rho.powi((i - j) as i32) * scale;
                }
            }
            Ok((f, dim))
        }
        Design::RankDeficient { deficiency } => {
            if *deficiency >= dim {
                return Err(Error::config(format!(
                    "design.deficiency must be below the dimension {dim}, got {deficiency}"
                )));
            }
            let dirs = orthonormal_directions(dim, *deficiency, seed);
            let mut f = vec![0.0; dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    let kernel: f64 = dirs.iter().map(|v| v[i] * v[j]).sum();
                    f[i * dim + j] = if i == j { 1.0 } else { 0.0 } - kernel;
                }
            }
            Ok((f, dim))
        }
        Design::Factor { rows } => {
            if rows.len() != dim {
                return Err(Error::config(format!(
                    "design.rows has {} rows, expected {dim}",
                    rows.len()
                )));
            }
            let m = rows.first().map_or(0, Vec::len);
            if m == 0
                || rows
                    .iter()
                    .any(|r| r.len() != m || r.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::config(
                    "design.rows must be a finite rectangular matrix",
                ));
            }
            Ok((rows.concat(), m))
        }
    }
}

impl QuadraticIIDStream {
    pub fn new(cfg: QuadraticConfig) -> Result<Self> {
        let dim = cfg.theta_star.dim();
        if cfg.theta_star.norm_l1() > 1.0 + 1e-9 {
            return Err(Error::config("theta* must lie in the unit l1-ball"));
        }
        if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
            return Err(Error::config(format!(
                "noise must be nonnegative, got {}",
                cfg.noise
            )));
        }
        if !(cfg.truncation > 0.0 && cfg.truncation.is_finite()) {
            return Err(Error::config(format!(
                "truncation must be positive, got {}",
                cfg.truncation
            )));
        }
        let (factor, latent) = design_factor(dim, &cfg.design, cfg.seed)?;
        let mut sigma = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                sigma[i * dim + j] = dot_slices(
                    &factor[i * latent..(i + 1) * latent],
                    &factor[j * latent..(j + 1) * latent],
                );
            }
        }
        let max_sd = (0..dim)
            .map(|i| sigma[i * dim + i].sqrt())
            .fold(0.0, f64::max);
        if max_sd == 0.0 {
            return Err(Error::config("design covariance is zero"));
        }
        let box_bound = match cfg.latent {
            Latent::Gaussian => cfg.truncation * max_sd,
            Latent::Uniform => {
                let row_sum = factor
                    .chunks(latent)
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                3f64.sqrt() * row_sum
            }
        };
        Ok(Self {
            dim,
            theta_star: cfg.theta_star,
            factor,
            latent_dim: latent,
            sigma,
            noise: cfg.noise,
            noise_kind: cfg.noise_kind,
            latent: cfg.latent,
            box_bound,
            seed: cfg.seed,
        })
    }

    /// Design covariance `Sigma` (row-major).
    pub fn covariance(&self) -> &[f64] {
        &self.sigma
    }

    pub fn theta_star(&self) -> &ParamVector {
        &self.theta_star
    }

    /// Box bound `B` on `||x_t||_inf`.
    pub fn box_bound(&self) -> f64 {
        self.box_bound
    }

    /// Variance of the additive noise.
    pub fn noise_variance(&self) -> f64 {
        self.noise * self.noise * self.noise_kind.variance()
    }

    /// Design vector and response of round `t`.
    pub fn sample(&self, t: usize) -> (Vec<f64>, f64) {
        let mut rng = round_rng(self.seed, t);
        let z: Vec<f64> = match self.latent {
            Latent::Gaussian => (0..self.latent_dim)
                .map(|_| rng.sample(StandardNormal))
                .collect(),
            Latent::Uniform => {
                let r = 3f64.sqrt();
                (0..self.latent_dim)
                    .map(|_| rng.gen_range(-r..=r))
                    .collect()
            }
        };
        let mut x: Vec<f64> = self
            .factor
            .chunks(self.latent_dim)
            .map(|row| dot_slices(row, &z))
            .collect();
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > self.box_bound {
            let s = self.box_bound / peak;
            x.iter_mut().for_each(|v| *v *= s);
        }
        let y = dot_slices(&x, self.theta_star.as_slice())
            + self.noise * self.noise_kind.draw(&mut rng);
        (x, y)
    }

    fn quadratic_form(&self, delta: &[f64]) -> f64 {
        self.sigma
            .chunks(self.dim)
            .zip(delta)
            .map(|(row, di)| di * dot_slices(row, delta))
            .sum::<f64>()
            .max(0.0)
    }
}

impl LossStream for QuadraticIIDStream {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn regime(&self) -> Regime {
        Regime::Iid
    }

    fn gradient_bound(&self, radius: f64) -> f64 {
        let b = self.box_bound;
        2.0 * b
            * (b * (radius + self.theta_star.norm_l1()) + self.noise * self.noise_kind.max_abs())
    }

    fn loss_and_gradient(&self, t: usize, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        check_query(self.dim, t, theta)?;
        let (x, y) = self.sample(t);
        let r = dot_slices(&x, theta.as_slice()) - y;
        let grad = x.into_iter().map(|v| 2.0 * r * v).collect();
        Ok((r * r, ParamVector::from_finite(grad)))
    }

    fn risk(&self, theta: &ParamVector) -> Option<f64> {
        self.risk_excess(theta)
            .ok()
            .map(|e| e + self.noise_variance())
    }

    fn optimum(&self) -> Option<ParamVector> {
        Some(self.theta_star.clone())
    }

    /// `(theta - theta*)' Sigma (theta - theta*)`.
    fn risk_excess(&self, theta: &ParamVector) -> Result<f64> {
        if theta.dim() != self.dim {
            return Err(Error::config("risk query dimension mismatch"));
        }
        Ok(self.quadratic_form(theta.sub(&self.theta_star).as_slice()))
    }

    fn closed_form_objective(&self, upto: usize) -> Option<Result<Box<dyn Objective + '_>>> {
        if upto == 0 {
            return Some(Err(Error::config(
                "empirical objective needs at least one round",
            )));
        }
        let d = self.dim;
        let sums = par::sum_vec_chunks(
            Execution::default(),
            upto,
            SUMS_CHUNK,
            d * d + d + 1,
            |range| {
                let mut acc = vec![0.0; d * d + d + 1];
                for t in range {
                    let (x, y) = self.sample(t + 1);
                    for i in 0..d {
                        let row = &mut acc[i * d..(i + 1) * d];
                        row.iter_mut().zip(&x).for_each(|(a, xj)| *a += x[i] * xj);
                    }
                    acc[d * d..d * d + d]
                        .iter_mut()
                        .zip(&x)
                        .for_each(|(a, xi)| *a += y * xi);
                    acc[d * d + d] += y * y;
                }
                acc
            },
        );
        let c = sums[d * d + d];
        let b = sums[d * d..d * d + d].to_vec();
        let a = sums[..d * d].to_vec();
        Some(Ok(Box::new(QuadraticObjective::from_sums(
            d, a, b, c, upto,
        ))))
    }
}

/// A `d0`-sparse vector with l1 norm `norm`: seeded random support and signs,
/// magnitudes uniform on `[0.5, 1]` before normalization.
pub fn sparse_parameter(dim: usize, d0: usize, norm: f64, seed: u64) -> Result<ParamVector> {
    if d0 == 0 || d0 > dim {
        return Err(Error::config(format!(
            "sparsity must lie in 1..={dim}, got {d0}"
        )));
    }
    if !(0.0..=1.0).contains(&norm) {
        return Err(Error::config(format!(
            "parameter norm must lie in [0, 1], got {norm}"
        )));
    }
    let mut rng = setup_rng(seed ^ 0x5eed_0f_7e7a);
    let support = sample(&mut rng, dim, d0);
    let mut coords = vec![0.0; dim];
    for i in support.iter() {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        coords[i] = sign * rng.gen_range(0.5..=1.0);
    }
    let total: f64 = coords.iter().map(|c: &f64| c.abs()).sum();
    ParamVector::new(coords.into_iter().map(|c| c / total * norm).collect())
}
