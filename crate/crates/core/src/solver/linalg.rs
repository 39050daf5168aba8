//! Small dense symmetric solves (dimension is at most a handful).

/// Solves `A x = b` for symmetric positive definite row-major `A`. Returns
/// `None` when the Cholesky factorization breaks down.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Like [`cholesky_solve`], retrying with a growing diagonal ridge.
pub(crate) fn regularized_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    if n == 0 {
        return Some(Vec::new());
    }
    if let Some(x) = cholesky_solve(a, b) {
        return Some(x);
    }
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut ridge = 1e-12 * scale;
    let mut work = a.to_vec();
    for _ in 0..12 {
        for i in 0..n {
            work[i * n + i] = a[i * n + i] + ridge;
        }
        if let Some(x) = cholesky_solve(&work, b) {
            return Some(x);
        }
        ridge *= 100.0;
    }
    None
}
