use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::streams::{check_query, setup_rng, LossStream, Objective, QuadraticObjective, Regime};
use crate::vector::ParamVector;

#[derive(Debug, Clone)]
pub struct AdversarialConfig {
    pub dim: usize,
    /// Strong-convexity modulus `mu`.
    pub modulus: f64,
    /// Support size of every target.
    pub sparsity: usize,
    /// l1 norm of the cycle centre.
    pub centre_norm: f64,
    /// l1 norm of the perturbations around the centre.
    pub spread: f64,
    pub seed: u64,
}

/// `l_t(theta) = (mu/2) ||theta - c_t||_2^2` with targets cycling through
/// `cbar + p, cbar - p, cbar + q, cbar - q`.
///
/// The centre `cbar` is 2-sparse (1-sparse when the sparsity is 1); `p` and
/// `q` live on a common support of `sparsity` coordinates containing that of
/// `cbar`, so every target is `sparsity`-sparse and the cycle average is `cbar`.
#[derive(Debug, Clone)]
pub struct AdversarialStrongStream {
    dim: usize,
    modulus: f64,
    targets: Vec<ParamVector>,
    centre: ParamVector,
}

pub const CYCLE: usize = 4;

impl AdversarialStrongStream {
    pub fn new(cfg: AdversarialConfig) -> Result<Self> {
        let AdversarialConfig {
            dim,
            modulus,
            sparsity,
            centre_norm,
            spread,
            seed,
        } = cfg;
        if dim == 0 {
            return Err(Error::config("dimension must be positive"));
        }
        if !(modulus > 0.0 && modulus.is_finite()) {
            return Err(Error::config(format!(
                "modulus must be positive, got {modulus}"
            )));
        }
        if sparsity == 0 || sparsity > dim {
            return Err(Error::config(format!(
                "sparsity must lie in 1..={dim}, got {sparsity}"
            )));
        }
        if centre_norm < 0.0 || spread < 0.0 || centre_norm + spread > 1.0 {
            return Err(Error::config("centre_norm + spread must lie in [0, 1]"));
        }
        let mut rng = setup_rng(seed);
        let support: Vec<usize> = sample(&mut rng, dim, sparsity).into_vec();
        let centre_support = sparsity.min(2);
        let mut centre = vec![0.0; dim];
        let mut raw: Vec<f64> = (0..centre_support)
            .map(|_| rng.gen_range(0.5..=1.0))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|v| *v *= centre_norm / total);
        for (k, &i) in support.iter().take(centre_support).enumerate() {
            centre[i] = if rng.gen_bool(0.5) { raw[k] } else { -raw[k] };
        }
        let mut perturbation = || {
            let mut p = vec![0.0; dim];
            let raw: Vec<f64> = (0..sparsity).map(|_| rng.gen_range(0.5..=1.0)).collect();
            let total: f64 = raw.iter().sum();
            for (k, &i) in support.iter().enumerate() {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                p[i] = sign * raw[k] * spread / total;
            }
            p
        };
        let p = perturbation();
        let q = perturbation();
        let shifted = |v: &[f64], sign: f64| {
            ParamVector::new(centre.iter().zip(v).map(|(c, d)| c + sign * d).collect())
        };
        let targets = vec![
            shifted(&p, 1.0)?,
            shifted(&p, -1.0)?,
            shifted(&q, 1.0)?,
            shifted(&q, -1.0)?,
        ];
        Ok(Self {
            dim,
            modulus,
            targets,
            centre: ParamVector::new(centre)?,
        })
    }

    pub fn target(&self, t: usize) -> &ParamVector {
        &self.targets[(t - 1) % CYCLE]
    }

    pub fn targets(&self) -> &[ParamVector] {
        &self.targets
    }

    /// Cycle average of the targets.
    pub fn centre(&self) -> &ParamVector {
        &self.centre
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }
}

impl LossStream for AdversarialStrongStream {
    fn name(&self) -> &'static str {
        "adversarial"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn regime(&self) -> Regime {
        Regime::Adversarial
    }

    fn gradient_bound(&self, radius: f64) -> f64 {
        let reach = self
            .targets
            .iter()
            .map(ParamVector::norm_linf)
            .fold(0.0, f64::max);
        self.modulus * (radius + reach)
    }

    fn loss_and_gradient(&self, t: usize, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        check_query(self.dim, t, theta)?;
        let diff = theta.sub(self.target(t));
        let loss = 0.5 * self.modulus * diff.iter().map(|v| v * v).sum::<f64>();
        Ok((loss, diff.scaled(self.modulus)))
    }

    fn optimum(&self) -> Option<ParamVector> {
        Some(self.centre.clone())
    }

    fn closed_form_objective(&self, upto: usize) -> Option<Result<Box<dyn Objective + '_>>> {
        if upto == 0 {
            return Some(Err(Error::config(
                "empirical objective needs at least one round",
            )));
        }
        // (mu/2)(n ||theta||^2 - 2 theta' sum c_t + sum ||c_t||^2)
        let d = self.dim;
        let half = 0.5 * self.modulus;
        let mut counts = [upto / CYCLE; CYCLE];
        counts.iter_mut().take(upto % CYCLE).for_each(|c| *c += 1);
        let mut b = vec![0.0; d];
        let mut c = 0.0;
        for (target, &n) in self.targets.iter().zip(&counts) {
            let n = n as f64;
            b.iter_mut()
                .zip(target.iter())
                .for_each(|(bi, ci)| *bi += half * n * ci);
            c += half * n * target.iter().map(|v| v * v).sum::<f64>();
        }
        let mut a = vec![0.0; d * d];
        (0..d).for_each(|i| a[i * d + i] = half * upto as f64);
        Some(Ok(Box::new(QuadraticObjective::from_sums(
            d, a, b, c, upto,
        ))))
    }
}
