use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::ExpertGrid;
use crate::vector::ParamVector;

/// Largest cover `build_cover` will enumerate.
pub const COVER_SIZE_CAP: usize = 1_000_000;

/// Which coordinates of a point may be nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparsityPattern {
    mask: Vec<bool>,
}

impl SparsityPattern {
    pub fn of(v: &ParamVector) -> Self {
        Self {
            mask: v.iter().map(|c| *c != 0.0).collect(),
        }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of active coordinates.
    pub fn active(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Lattice `delta Z^d` intersected with the unit l1-ball, uniform prior.
///
/// `delta = 1 / ceil(d / (2 eps))` is at most `2 eps / d`; with `1/delta`
/// integral, every point of the ball is within l1 distance `d delta / 2 <= eps`
/// of the lattice.
pub fn build_cover(dim: usize, eps: f64) -> Result<ExpertGrid> {
    if dim == 0 || dim > 3 {
        return Err(Error::config(format!(
            "cover grids support 1 <= d <= 3, got d = {dim}"
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::config(format!(
            "cover resolution must lie in (0, 1], got {eps}"
        )));
    }
    let steps = (dim as f64 / (2.0 * eps) - 1e-9).ceil().max(1.0) as i64;
    let n = steps as f64;
    let mut points = Vec::new();
    let mut idx = vec![-steps; dim];
    loop {
        if idx.iter().map(|i| i.abs()).sum::<i64>() <= steps {
            if points.len() == COVER_SIZE_CAP {
                return Err(Error::config(format!(
                    "cover for d = {dim}, eps = {eps} exceeds the size cap of {COVER_SIZE_CAP} points"
                )));
            }
            points.push(ParamVector::from_finite(
                idx.iter().map(|i| *i as f64 / n).collect(),
            ));
        }
        // odometer increment
        let mut j = 0;
        loop {
            if j == dim {
                return ExpertGrid::uniform(points);
            }
            idx[j] += 1;
            if idx[j] > steps {
                idx[j] = -steps;
                j += 1;
            } else {
                break;
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Reweights a cover so that a point with sparsity pattern `tau` gets mass
/// `1 / (#points with pattern tau * (d + 1) * binom(d, |tau|))`, then
/// renormalizes. Sparse patterns are favored.
pub fn sparsity_prior(grid: &ExpertGrid) -> ExpertGrid {
    let d = grid.dim();
    let patterns: Vec<SparsityPattern> = grid.points().iter().map(SparsityPattern::of).collect();
    let mut counts: HashMap<&SparsityPattern, usize> = HashMap::new();
    for p in &patterns {
        *counts.entry(p).or_default() += 1;
    }
    let prior = patterns
        .iter()
        .map(|p| 1.0 / (counts[p] as f64 * (d + 1) as f64 * binomial(d, p.active())))
        .collect();
    grid.with_prior(prior).expect("prior masses are positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coords(g: &ExpertGrid) -> Vec<Vec<f64>> {
        let mut c: Vec<Vec<f64>> = g.points().iter().map(|p| p.as_slice().to_vec()).collect();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c
    }

    #[test]
    fn one_dimensional_covers() {
        assert_eq!(
            coords(&build_cover(1, 0.5).unwrap()),
            vec![vec![-1.0], vec![0.0], vec![1.0]]
        );
        assert_eq!(
            coords(&build_cover(1, 0.25).unwrap()),
            vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]]
        );
    }

    #[test]
    fn cover_points_in_ball_with_uniform_prior() {
        let g = build_cover(2, 0.1).unwrap();
        assert!(g.points().iter().all(|p| p.norm_l1() <= 1.0 + 1e-12));
        // |{n in Z^2 : |n_1| + |n_2| <= 10}| = 2 * 10 * 11 + 1
        assert_eq!(g.len(), 221);
        assert!(g.prior().iter().all(|w| (w - 1.0 / 221.0).abs() < 1e-15));
    }

    #[test]
    fn nearest_lattice_point_within_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (d, eps) in [(2, 0.1), (3, 0.37), (3, 0.754), (2, 0.33)] {
            let g = build_cover(d, eps).unwrap();
            for _ in 0..300 {
                let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n: f64 = raw.iter().map(|c: &f64| c.abs()).sum();
                let r = rng.gen_range(0.0..=1.0f64).powf(1.0 / d as f64);
                let theta = ParamVector::new(raw.iter().map(|c| c / n * r).collect()).unwrap();
                let best = g
                    .points()
                    .iter()
                    .map(|p| p.dist_l1(&theta))
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= eps + 1e-12, "d={d} eps={eps} best={best}");
            }
        }
    }

    #[test]
    fn rejects_large_dimension_and_bad_eps() {
        assert!(matches!(build_cover(4, 0.5), Err(Error::Config(_))));
        assert!(build_cover(2, 0.0).is_err());
        assert!(build_cover(2, 1.5).is_err());
        let err = build_cover(3, 0.0005).unwrap_err().to_string();
        assert!(err.contains("size cap"), "{err}");
    }

    #[test]
    fn sparsity_prior_one_dimension() {
        // origin: pattern (0), 1 member, prior 1/(1*2*1) = 1/2; the two
        // points +-1 share pattern (1) with prior 1/(2*2*1) = 1/4 each.
        let g = sparsity_prior(&build_cover(1, 0.5).unwrap());
        let origin = g.position(&ParamVector::zeros(1)).unwrap();
        assert!((g.prior()[origin] - 0.5).abs() < 1e-15);
        let total: f64 = g.prior().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sparsity_prior_mass_is_already_normalized() {
        // before renormalization, the masses of all patterns sum to one
        for (d, eps) in [(1, 0.1), (2, 0.1), (3, 0.3)] {
            let g = build_cover(d, eps).unwrap();
            let patterns: Vec<SparsityPattern> =
                g.points().iter().map(SparsityPattern::of).collect();
            let mut counts: HashMap<&SparsityPattern, usize> = HashMap::new();
            for p in &patterns {
                *counts.entry(p).or_default() += 1;
            }
            let raw: f64 = patterns
                .iter()
                .map(|p| 1.0 / (counts[p] as f64 * (d + 1) as f64 * binomial(d, p.active())))
                .sum();
            assert!((raw - 1.0).abs() < 1e-12, "d={d}: {raw}");
        }
    }

    #[test]
    fn sparser_points_get_more_prior() {
        let g = sparsity_prior(&build_cover(2, 0.1).unwrap());
        let weight_of =
            |c: [f64; 2]| g.prior()[g.position(&ParamVector::new(c.to_vec()).unwrap()).unwrap()];
        let origin = weight_of([0.0, 0.0]);
        let axis = weight_of([0.3, 0.0]);
        let dense = weight_of([0.3, 0.2]);
        assert!(origin > axis && axis > dense);
    }
}
