use rand::Rng;

use crate::error::{Error, Result};
use crate::streams::{check_query, round_rng, setup_rng, LossStream, Regime};
use crate::vector::{dot_slices, ParamVector};

/// Recorded forecasts `f_{k,t}` (one row of `K` values per round) and outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertSpec {
    pub forecasts: Vec<Vec<f64>>,
    pub outcomes: Vec<f64>,
}

/// Seeded i.i.d. expert-advice model.
///
/// Each round draws a signal `m ~ U[0.3, 0.7]` and an outcome
/// `y = m + outcome_noise * u` with `u ~ U[-1, 1]`. The first `good` experts
/// forecast `m` exactly; every other expert forecasts `m + b_k + w_k zeta_k`
/// with a seeded positive bias `b_k` drawn from `bias` and noise level
/// `w_k <= max_noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExperts {
    pub experts: usize,
    pub good: usize,
    pub outcome_noise: f64,
    pub bias: (f64, f64),
    pub max_noise: f64,
    pub seed: u64,
}

impl SyntheticExperts {
    pub fn new(experts: usize, good: usize, seed: u64) -> Self {
        Self {
            experts,
            good,
            outcome_noise: 0.25,
            bias: (0.15, 0.25),
            max_noise: 0.05,
            seed,
        }
    }
}

const SIGNAL: (f64, f64) = (0.3, 0.7);

#[derive(Debug, Clone)]
struct Model {
    biases: Vec<f64>,
    noises: Vec<f64>,
    outcome_noise: f64,
    seed: u64,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

#[derive(Debug, Clone)]
enum Source {
    Recorded(ExpertSpec),
    Synthetic(Model),
}

/// Prediction with expert advice as an online convex problem over the
/// simplex: `l_t(theta) = (theta' f_t - y_t)^2`, so that
/// `l_t(e_k) = (f_{k,t} - y_t)^2`. The square loss satisfies the
/// one-dimensional curvature condition with `beta = 1` and `alpha = 1/8`.
#[derive(Debug, Clone)]
pub struct ExpertAdviceStream {
    experts: usize,
    max_outcome: f64,
    source: Source,
}

/// Curvature exponent `beta` of the square loss.
pub const SQUARE_LOSS_BETA: f64 = 1.0;
/// Curvature constant `alpha` of the square loss on `[0, 1]`.
pub const SQUARE_LOSS_ALPHA: f64 = 0.125;

/// Validates recorded forecasts and wraps them as a stream.
pub fn make_expert_stream(spec: ExpertSpec) -> Result<ExpertAdviceStream> {
    let k = spec.forecasts.first().map_or(0, Vec::len);
    if k == 0 {
        return Err(Error::config(
            "expert stream needs at least one expert and one round",
        ));
    }
    if spec.forecasts.len() != spec.outcomes.len() {
        return Err(Error::config(format!(
            "{} forecast rows but {} outcomes",
            spec.forecasts.len(),
            spec.outcomes.len()
        )));
    }
    for (t, row) in spec.forecasts.iter().enumerate() {
        if row.len() != k {
            return Err(Error::config(format!(
                "round {} has {} forecasts, expected {k}",
                t + 1,
                row.len()
            )));
        }
        if let Some(f) = row.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::config(format!(
                "forecast {f} in round {} lies outside [0, 1]",
                t + 1
            )));
        }
    }
    if spec.outcomes.iter().any(|y| !y.is_finite()) {
        return Err(Error::config("outcomes must be finite"));
    }
    let max_outcome = spec.outcomes.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    Ok(ExpertAdviceStream {
        experts: k,
        max_outcome,
        source: Source::Recorded(spec),
    })
}

impl ExpertAdviceStream {
    pub fn synthetic(cfg: SyntheticExperts) -> Result<Self> {
        let SyntheticExperts {
            experts,
            good,
            outcome_noise,
            bias,
            max_noise,
            seed,
        } = cfg;
        if experts == 0 || good == 0 || good > experts {
            return Err(Error::config(format!(
                "need 1 <= good <= experts, got good = {good}, experts = {experts}"
            )));
        }
        if !(0.0 <= bias.0 && bias.0 <= bias.1) || max_noise < 0.0 || outcome_noise < 0.0 {
            return Err(Error::config(
                "expert bias range and noise levels must be nonnegative",
            ));
        }
        if bias.1 + max_noise > SIGNAL.0 {
            return Err(Error::config(format!(
                "bias + noise must stay below {} so that forecasts remain in [0, 1]",
                SIGNAL.0
            )));
        }
        let mut rng = setup_rng(seed);
        let mut biases = vec![0.0; experts];
        let mut noises = vec![0.0; experts];
        for k in good..experts {
            let magnitude = if bias.1 > bias.0 {
                rng.gen_range(bias.0..=bias.1)
            } else {
                bias.0
            };
            // Same sign for every biased expert, so that no mixture of them
            // cancels the bias and e_1 is the clear risk minimizer.
            biases[k] = magnitude;
            noises[k] = if max_noise > 0.0 {
                rng.gen_range(0.0..=max_noise)
            } else {
                0.0
            };
        }
        let (lo, hi) = SIGNAL;
        let m1 = 0.5 * (lo + hi);
        let m2 = (lo * lo + lo * hi + hi * hi) / 3.0;
        let mut a = vec![0.0; experts * experts];
        for i in 0..experts {
            for j in 0..experts {
                let mut v = m2 + (biases[i] + biases[j]) * m1 + biases[i] * biases[j];
                if i == j {
                    v += noises[i] * noises[i] / 3.0;
                }
                a[i * experts + j] = v;
            }
        }
        let b = biases.iter().map(|bk| m2 + bk * m1).collect();
        let c = m2 + outcome_noise * outcome_noise / 3.0;
        Ok(Self {
            experts,
            max_outcome: hi + outcome_noise,
            source: Source::Synthetic(Model {
                biases,
                noises,
                outcome_noise,
                seed,
                a,
                b,
                c,
            }),
        })
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    /// Forecasts and outcome of round `t`.
    pub fn round(&self, t: usize) -> Result<(Vec<f64>, f64)> {
        match &self.source {
            Source::Recorded(spec) => {
                let row = spec.forecasts.get(t - 1).ok_or_else(|| {
                    Error::stream(format!(
                        "round {t} is beyond the {} recorded rounds",
                        spec.outcomes.len()
                    ))
                })?;
                Ok((row.clone(), spec.outcomes[t - 1]))
            }
            Source::Synthetic(model) => {
                let mut rng = round_rng(model.seed, t);
                let m = rng.gen_range(SIGNAL.0..=SIGNAL.1);
                let y = m + model.outcome_noise * rng.gen_range(-1.0..=1.0);
                let f = model
                    .biases
                    .iter()
                    .zip(&model.noises)
                    .map(|(b, w)| {
                        let zeta: f64 = rng.gen_range(-1.0..=1.0);
                        m + b + w * zeta
                    })
                    .collect();
                Ok((f, y))
            }
        }
    }
}

impl LossStream for ExpertAdviceStream {
    fn name(&self) -> &'static str {
        "experts"
    }

    fn dim(&self) -> usize {
        self.experts
    }

    fn regime(&self) -> Regime {
        match self.source {
            Source::Recorded(_) => Regime::Adversarial,
            Source::Synthetic(_) => Regime::Iid,
        }
    }

    fn gradient_bound(&self, radius: f64) -> f64 {
        2.0 * (radius + self.max_outcome)
    }

    fn loss_and_gradient(&self, t: usize, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        check_query(self.experts, t, theta)?;
        let (f, y) = self.round(t)?;
        let r = dot_slices(&f, theta.as_slice()) - y;
        let grad = f.into_iter().map(|v| 2.0 * r * v).collect();
        Ok((r * r, ParamVector::from_finite(grad)))
    }

    fn risk(&self, theta: &ParamVector) -> Option<f64> {
        let Source::Synthetic(model) = &self.source else {
            return None;
        };
        if theta.dim() != self.experts {
            return None;
        }
        let th = theta.as_slice();
        let quad: f64 = model
            .a
            .chunks(self.experts)
            .zip(th)
            .map(|(row, ti)| ti * dot_slices(row, th))
            .sum();
        Some(quad - 2.0 * dot_slices(&model.b, th) + model.c)
    }

    fn optimum(&self) -> Option<ParamVector> {
        match self.source {
            Source::Synthetic(_) => Some(ParamVector::basis(self.experts, 0, 1.0)),
            Source::Recorded(_) => None,
        }
    }

    fn risk_excess(&self, theta: &ParamVector) -> Result<f64> {
        let Source::Synthetic(model) = &self.source else {
            return Err(Error::UnsupportedRegime(
                "recorded expert advice has no closed-form risk".into(),
            ));
        };
        if theta.dim() != self.experts {
            return Err(Error::config("risk query dimension mismatch"));
        }
        // E[(theta' f - m)^2], expanded around the first (exact) expert
        let th = theta.as_slice();
        let s: f64 = th.iter().sum();
        let (lo, hi) = SIGNAL;
        let m1 = 0.5 * (lo + hi);
        let m2 = (lo * lo + lo * hi + hi * hi) / 3.0;
        // theta' f - m = (s - 1) m + theta' b + theta' (w zeta)
        let tb = dot_slices(th, &model.biases);
        let noise: f64 = th
            .iter()
            .zip(&model.noises)
            .map(|(t, w)| t * t * w * w / 3.0)
            .sum();
        let value = (s - 1.0) * (s - 1.0) * m2 + 2.0 * (s - 1.0) * tb * m1 + tb * tb + noise;
        Ok(value.max(0.0))
    }
}
