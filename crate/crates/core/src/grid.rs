use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// Tolerance on the total mass of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A finite, duplicate-free set of experts with a positive prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct ExpertGrid {
    points: Vec<ParamVector>,
    prior: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    points: Vec<ParamVector>,
    prior: Vec<f64>,
}

impl TryFrom<GridRepr> for ExpertGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        ExpertGrid::new(r.points, r.prior)
    }
}

impl From<ExpertGrid> for GridRepr {
    fn from(g: ExpertGrid) -> Self {
        GridRepr {
            points: g.points,
            prior: g.prior,
        }
    }
}

fn coordinate_key(v: &ParamVector) -> Vec<u64> {
    // +0.0 and -0.0 compare equal, so they must hash equal
    v.iter()
        .map(|c| if *c == 0.0 { 0u64 } else { c.to_bits() })
        .collect()
}

impl ExpertGrid {
    /// Builds a grid from points and positive prior masses. Identical points
    /// are merged (keeping the first occurrence) and their masses summed; the
    /// prior is then renormalized.
    pub fn new(points: Vec<ParamVector>, prior: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("expert grid must contain at least one point"));
        }
        if points.len() != prior.len() {
            return Err(Error::config(format!(
                "grid has {} points but {} prior weights",
                points.len(),
                prior.len()
            )));
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::config("grid points have mixed dimensions"));
        }
        if let Some(w) = prior.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::config(format!(
                "prior weights must be positive and finite, got {w}"
            )));
        }

        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.len());
        let mut kept: Vec<ParamVector> = Vec::with_capacity(points.len());
        let mut mass: Vec<f64> = Vec::with_capacity(points.len());
        for (p, w) in points.into_iter().zip(prior) {
            match index.entry(coordinate_key(&p)) {
                std::collections::hash_map::Entry::Occupied(e) => mass[*e.get()] += w,
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(kept.len());
                    kept.push(p);
                    mass.push(w);
                }
            }
        }
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            points: kept,
            prior: mass,
        })
    }

    /// Deduplicates `points` and puts the uniform prior on what remains.
    pub fn uniform(points: Vec<ParamVector>) -> Result<Self> {
        let n = points.len();
        let merged = Self::new(points, vec![1.0; n])?;
        let k = merged.len() as f64;
        Ok(Self {
            prior: vec![1.0 / k; merged.len()],
            points: merged.points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[ParamVector] {
        &self.points
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// Largest l1 norm among the grid points.
    pub fn radius(&self) -> f64 {
        self.points
            .iter()
            .map(ParamVector::norm_l1)
            .fold(0.0, f64::max)
    }

    /// Replaces the prior, which is renormalized. Points are untouched.
    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self> {
        if prior.len() != self.len() {
            return Err(Error::config("prior length does not match grid size"));
        }
        Self::new(self.points.clone(), prior)
    }

    /// Index of `point` in the grid, if present.
    pub fn position(&self, point: &ParamVector) -> Option<usize> {
        let key = coordinate_key(point);
        self.points.iter().position(|p| coordinate_key(p) == key)
    }

    /// Concatenates two grids (same dimension) and puts a uniform prior on the
    /// deduplicated union.
    pub fn union_uniform(&self, other: &ExpertGrid) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend(other.points.iter().cloned());
        Self::uniform(pts)
    }
}

/// The `2d` signed vertices `±radius * e_j`, uniform prior.
pub fn corners(dim: usize, radius: f64) -> ExpertGrid {
    assert!(dim >= 1 && radius > 0.0);
    let points = corner_points(dim, radius);
    ExpertGrid::uniform(points).expect("corners are distinct")
}

pub(crate) fn corner_points(dim: usize, radius: f64) -> Vec<ParamVector> {
    (0..dim)
        .flat_map(|j| {
            [
                ParamVector::basis(dim, j, radius),
                ParamVector::basis(dim, j, -radius),
            ]
        })
        .collect()
}

/// The canonical basis `e_1..e_d` (expert-advice reference set), uniform prior.
pub fn canonical_basis(dim: usize) -> ExpertGrid {
    ExpertGrid::uniform((0..dim).map(|j| ParamVector::basis(dim, j, 1.0)).collect())
        .expect("basis vectors are distinct")
}

/// A probability vector over the experts of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("simplex weights must be nonempty"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::domain(
                "simplex weights must be finite and nonnegative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::domain(format!(
                "simplex weights sum to {total}, not 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Clamps negatives (and NaN) to zero and renormalizes. Returns `None`
    /// when nothing positive remains.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Option<Self> {
        for w in weights.iter_mut() {
            if !(*w > 0.0) || !w.is_finite() {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return None;
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Some(Self(weights))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Convex combination `sum_k w_k * points[k]`.
    pub fn mix(&self, points: &[ParamVector]) -> ParamVector {
        assert_eq!(points.len(), self.0.len());
        let mut out = vec![0.0; points[0].dim()];
        for (w, p) in self.0.iter().zip(points) {
            if *w == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(p.iter()) {
                *o += w * c;
            }
        }
        ParamVector::from_finite(out)
    }
}
