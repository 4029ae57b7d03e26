use crate::error::{Error, Result};
use crate::vector::ParamVector;

/// Arguments may exceed the unit l1-ball by this much.
pub const UNIT_BALL_SLACK: f64 = 1e-9;

fn check_pair(theta: &ParamVector, other: &ParamVector) -> Result<()> {
    if theta.dim() != other.dim() {
        return Err(Error::config(format!(
            "dimension mismatch: {} vs {}",
            theta.dim(),
            other.dim()
        )));
    }
    for (name, v) in [("theta", theta), ("theta'", other)] {
        let n = v.norm_l1();
        if n > 1.0 + UNIT_BALL_SLACK {
            return Err(Error::domain(format!("{name} has l1 norm {n} > 1")));
        }
    }
    Ok(())
}

/// `||theta - (1 - pi) theta'||_1 - pi`, written as `||(theta - theta') + pi theta'||_1 - pi`.
fn gap(diff: &[f64], other: &[f64], pi: f64) -> f64 {
    diff.iter()
        .zip(other)
        .map(|(a, b)| (a + pi * b).abs())
        .sum::<f64>()
        - pi
}

/// Averaging accelerability `D(theta, theta') = min{pi in [0,1] : ||theta - (1-pi) theta'||_1 <= pi}`.
///
/// The gap function is convex and piecewise linear in `pi`, with kinks where a
/// coordinate of `(theta - theta') + pi theta'` changes sign. Scanning the
/// kinks in increasing order finds the segment holding the first root, which
/// is then solved exactly.
pub fn accelerability(theta: &ParamVector, other: &ParamVector) -> Result<f64> {
    check_pair(theta, other)?;
    let diff: Vec<f64> = theta.iter().zip(other.iter()).map(|(a, b)| a - b).collect();
    let other = other.as_slice();

    let g0 = gap(&diff, other, 0.0);
    if g0 <= 0.0 {
        return Ok(0.0);
    }
    let mut kinks: Vec<f64> = diff
        .iter()
        .zip(other)
        .filter(|(_, b)| **b != 0.0)
        .map(|(a, b)| -a / b)
        .filter(|p| *p > 0.0 && *p < 1.0)
        .collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();
    kinks.push(1.0);

    let (mut lo, mut g_lo) = (0.0, g0);
    for hi in kinks {
        let g_hi = gap(&diff, other, hi);
        if g_hi <= 0.0 {
            let root = lo + g_lo * (hi - lo) / (g_lo - g_hi);
            return Ok(root.clamp(lo, hi));
        }
        lo = hi;
        g_lo = g_hi;
    }
    // only reachable when theta sits marginally outside the ball
    Ok(1.0)
}

/// Bisection on the monotone feasibility predicate; independent check of
/// [`accelerability`].
pub fn accelerability_bisect(theta: &ParamVector, other: &ParamVector, tol: f64) -> Result<f64> {
    check_pair(theta, other)?;
    assert!(tol > 0.0, "tolerance must be positive");
    let feasible = |pi: f64| {
        theta
            .iter()
            .zip(other.iter())
            .map(|(a, b)| (a - (1.0 - pi) * b).abs())
            .sum::<f64>()
            <= pi
    };
    if feasible(0.0) {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Upper bound `||theta - theta'||_1 / (||theta - theta'||_1 + 1 - ||theta||_1)`.
pub fn bound_l1(theta: &ParamVector, other: &ParamVector) -> f64 {
    let dist = theta.dist_l1(other);
    if dist == 0.0 {
        return 0.0;
    }
    dist / (dist + 1.0 - theta.norm_l1())
}

/// Upper bound `1 - min_{i : theta'_i != 0} |theta_i| / |theta'_i|`, valid when
/// `||theta'||_1 >= ||theta||_1` and every nonzero `theta'_i` has the sign of
/// `theta_i`. Returns 1 (always a valid bound) when those conditions fail.
pub fn bound_support(theta: &ParamVector, other: &ParamVector) -> f64 {
    if other.norm_l1() < theta.norm_l1() {
        return 1.0;
    }
    let sign_ok = theta
        .iter()
        .zip(other.iter())
        .all(|(a, b)| *b == 0.0 || (a.signum() == b.signum() && *a != 0.0));
    if !sign_ok {
        return 1.0;
    }
    let ratio = theta
        .iter()
        .zip(other.iter())
        .filter(|(_, b)| **b != 0.0)
        .map(|(a, b)| a.abs() / b.abs())
        .fold(f64::INFINITY, f64::min);
    if ratio.is_infinite() {
        // theta' = 0, hence theta = 0
        return 0.0;
    }
    (1.0 - ratio).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(c: &[f64]) -> ParamVector {
        ParamVector::new(c.to_vec()).unwrap()
    }

    fn random_ball_point(rng: &mut ChaCha8Rng, d: usize) -> ParamVector {
        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n: f64 = raw.iter().map(|c| c.abs()).sum();
        let r = rng.gen_range(0.0..1.0f64);
        v(&raw.iter().map(|c| c / n * r).collect::<Vec<_>>())
    }

    #[test]
    fn interior_example() {
        let a = v(&[0.5, 0.0]);
        let b = v(&[0.3, 0.0]);
        let d = accelerability(&a, &b).unwrap();
        assert!((d - 2.0 / 7.0).abs() < 1e-15);
        assert!((accelerability_bisect(&a, &b, 1e-12).unwrap() - 2.0 / 7.0).abs() < 1e-9);
        assert!((bound_l1(&a, &b) - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn identity_and_origin() {
        let a = v(&[0.2, -0.3, 0.1]);
        assert_eq!(accelerability(&a, &a).unwrap(), 0.0);
        let z = ParamVector::zeros(3);
        assert!((accelerability(&a, &z).unwrap() - 0.6).abs() < 1e-15);
        assert!(accelerability_bisect(&a, &a, 1e-9).unwrap() <= 1e-9);
        assert!((accelerability_bisect(&a, &z, 1e-9).unwrap() - 0.6).abs() <= 1e-9);
        assert_eq!(bound_l1(&a, &a), 0.0);
    }

    #[test]
    fn boundary_point_is_not_accelerated_by_origin() {
        let a = v(&[0.6, -0.4]);
        assert!((accelerability(&a, &ParamVector::zeros(2)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outside_ball_is_domain_error() {
        let err = accelerability(&v(&[0.8, 0.8]), &v(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(accelerability(&v(&[0.5]), &v(&[0.5, 0.0])).is_err());
    }

    #[test]
    fn support_bound_example() {
        let a = v(&[0.6, 0.4]);
        let b = v(&[0.75, 0.25]);
        let bound = bound_support(&a, &b);
        assert!((bound - 0.2).abs() < 1e-15);
        assert!(accelerability(&a, &b).unwrap() <= 0.2 + 1e-15);
        assert_eq!(bound_support(&a, &a), 0.0);
        assert_eq!(bound_support(&v(&[0.5, 0.1]), &v(&[-0.5, 0.1])), 1.0);
    }

    #[test]
    fn exact_agrees_with_bisection_and_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let d = rng.gen_range(1..8);
            let a = random_ball_point(&mut rng, d);
            let b = random_ball_point(&mut rng, d);
            let exact = accelerability(&a, &b).unwrap();
            let bis = accelerability_bisect(&a, &b, 1e-12).unwrap();
            assert!((exact - bis).abs() <= 1e-9, "{exact} vs {bis}");
            assert!((0.0..=1.0).contains(&exact));
            let resid: f64 = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - (1.0 - exact) * y).abs())
                .sum();
            assert!(resid <= exact + 1e-9);
            if exact > 1e-6 {
                let p = exact - 1e-6;
                let resid: f64 = a
                    .iter()
                    .zip(b.iter())
                    .map(|(x, y)| (x - (1.0 - p) * y).abs())
                    .sum();
                assert!(resid > p);
            }
            assert!(bound_l1(&a, &b) >= exact - 1e-12);
            assert!(bound_support(&a, &b) >= exact - 1e-12);
        }
    }
}
