use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::streams::LossStream;
use crate::vector::{dot_slices, ParamVector};

/// Rounds per chunk when replaying a stream.
const REPLAY_CHUNK: usize = 1024;

/// A convex objective over parameter space with (sub)gradient queries.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    /// Value and a subgradient at `theta`.
    fn evaluate(&self, theta: &ParamVector) -> Result<(f64, ParamVector)>;
}

/// `theta' A theta - 2 b' theta + c` with `A` symmetric PSD (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: f64,
}

impl QuadraticObjective {
    pub fn new(dim: usize, a: Vec<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        if a.len() != dim * dim || b.len() != dim {
            return Err(Error::config("quadratic objective shape mismatch"));
        }
        Ok(Self { dim, a, b, c })
    }

    /// Averages accumulated sums `sum x x'`, `sum y x`, `sum y^2` over `n` rounds.
    pub(crate) fn from_sums(dim: usize, a: Vec<f64>, b: Vec<f64>, c: f64, n: usize) -> Self {
        let inv = 1.0 / n as f64;
        Self {
            dim,
            a: a.into_iter().map(|v| v * inv).collect(),
            b: b.into_iter().map(|v| v * inv).collect(),
            c: c * inv,
        }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn linear(&self) -> &[f64] {
        &self.b
    }

    pub fn constant(&self) -> f64 {
        self.c
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        if theta.dim() != self.dim {
            return Err(Error::config("objective dimension mismatch"));
        }
        let th = theta.as_slice();
        let grad_half: Vec<f64> = self
            .a
            .chunks(self.dim)
            .zip(&self.b)
            .map(|(row, b)| dot_slices(row, th) - b)
            .collect();
        // theta'A theta - 2 b'theta = theta'(A theta - b) - b'theta
        let value = dot_slices(th, &grad_half) - dot_slices(&self.b, th) + self.c;
        Ok((
            value,
            ParamVector::from_finite(grad_half.into_iter().map(|g| 2.0 * g).collect()),
        ))
    }
}

/// Average loss over rounds `1..=upto`, recomputed by replaying the stream.
pub struct ReplayObjective<'a> {
    stream: &'a dyn LossStream,
    upto: usize,
    exec: Execution,
}

impl<'a> ReplayObjective<'a> {
    pub fn new(stream: &'a dyn LossStream, upto: usize) -> Result<Self> {
        if upto == 0 {
            return Err(Error::config(
                "empirical objective needs at least one round",
            ));
        }
        Ok(Self {
            stream,
            upto,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

impl Objective for ReplayObjective<'_> {
    fn dim(&self) -> usize {
        self.stream.dim()
    }

    fn evaluate(&self, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        let d = self.stream.dim();
        let parts = par::map_chunks(
            self.exec,
            self.upto,
            REPLAY_CHUNK,
            |range| -> Result<Vec<f64>> {
                let mut acc = vec![0.0; d + 1];
                for t in range {
                    let (loss, grad) = self.stream.loss_and_gradient(t + 1, theta)?;
                    acc[0] += loss;
                    for (a, g) in acc[1..].iter_mut().zip(grad.iter()) {
                        *a += g;
                    }
                }
                Ok(acc)
            },
        );
        let mut total = vec![0.0; d + 1];
        for part in parts {
            for (t, p) in total.iter_mut().zip(part?) {
                *t += p;
            }
        }
        let inv = 1.0 / self.upto as f64;
        let value = total[0] * inv;
        if !value.is_finite() {
            return Err(Error::stream("non-finite empirical loss"));
        }
        Ok((
            value,
            ParamVector::from_finite(total[1..].iter().map(|g| g * inv).collect()),
        ))
    }
}
