use crate::vector::ParamVector;

/// Componentwise soft threshold `sign(x_i) (|x_i| - eps)_+`.
pub fn soft_threshold(x: &ParamVector, eps: f64) -> ParamVector {
    assert!(eps >= 0.0, "threshold must be nonnegative");
    ParamVector::from_finite(
        x.iter()
            .map(|c| c.signum() * (c.abs() - eps).max(0.0))
            .map(|c| if c == 0.0 { 0.0 } else { c })
            .collect(),
    )
}

/// Keeps the `k` largest-magnitude coordinates and zeroes the rest. Ties in
/// magnitude go to the lowest index.
pub fn hard_truncate(x: &ParamVector, k: usize) -> ParamVector {
    let d = x.dim();
    if k >= d {
        return x.clone();
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()).then(i.cmp(&j)));
    let mut out = vec![0.0; d];
    for &i in order.iter().take(k) {
        out[i] = x[i];
    }
    ParamVector::from_finite(out)
}

/// Soft threshold followed by a dilation capped so the result stays in the
/// unit l1-ball:
/// `S * min(1 + 2 d0 eps / ||S||_1, 1 / ||S||_1)` with `S = S_eps(theta')`,
/// and the zero vector when `S = 0`.
pub fn dilated_soft_threshold(other: &ParamVector, eps: f64, d0: usize) -> ParamVector {
    assert!(d0 >= 1, "sparsity level must be at least 1");
    let s = soft_threshold(other, eps);
    let norm = s.norm_l1();
    if norm == 0.0 {
        return ParamVector::zeros(other.dim());
    }
    let factor = (1.0 + 2.0 * d0 as f64 * eps / norm).min(1.0 / norm);
    s.scaled(factor)
}

/// Euclidean projection onto `{||theta||_1 <= radius}` (sort-based).
pub fn project_l1(v: &ParamVector, radius: f64) -> ParamVector {
    assert!(radius > 0.0, "radius must be positive");
    if v.norm_l1() <= radius {
        return v.clone();
    }
    let mut mags: Vec<f64> = v.iter().map(|c| c.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, m) in mags.iter().enumerate() {
        cum += m;
        let candidate = (cum - radius) / (j + 1) as f64;
        if m - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    ParamVector::from_finite(
        v.iter()
            .map(|c| {
                let m = (c.abs() - tau).max(0.0);
                if m == 0.0 {
                    0.0
                } else {
                    c.signum() * m
                }
            })
            .collect(),
    )
}
